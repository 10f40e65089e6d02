#pragma once

// Lane-batched Euler-Maruyama kernel shared by single trajectories and
// ensembles. Every lane runs the same instruction sequence, so a trajectory's
// result does not depend on which batch or lane it lands in.

#include <array>
#include <cstdint>

#include "bistab/dynamics.hpp"

namespace bistab::detail {

inline constexpr int kLanes = 64;

struct LaneBatch {
  alignas(64) std::array<double, kLanes> re{};
  alignas(64) std::array<double, kLanes> im{};
  alignas(64) std::array<double, kLanes> max_norm2{};
  std::array<std::uint64_t, kLanes> index{};
};

struct StepModel {
  double gain = 0;      // lambda
  double kerr_re = 0;   // Re k of the k |alpha|^2 alpha term
  double kerr_im = 0;
  double bias = 0;
  double dt = 0;
  double noise_re = 0;  // dX coefficient * sqrt(dt/2)
  double noise_im = 0;
  std::uint64_t seed = 0;
  bool zero_noise = false;
  long steps = 0;

  static StepModel from(const OscillatorParams& params, const SimConfig& sim, bool zero_noise);
};

/// Advances all lanes by model.steps steps. When `path` is non-null, lane 0
/// is recorded every `thin` steps (and at both ends).
void integrate(LaneBatch& batch, const StepModel& model, Trajectory* path, int thin);

}  // namespace bistab::detail
