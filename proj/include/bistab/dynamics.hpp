#pragma once

// Semiclassical stochastic trajectories of the degenerate parametric
// oscillator. Time is measured in units of the inverse cavity decay rate.
//
// Drift (alpha picture):
//   OPO: -alpha + lambda conj(alpha) - g^2 |alpha|^2 alpha + b
//   JPO: -alpha + lambda conj(alpha) + i g^2 |alpha|^2 alpha + b
// Diffusion: constant, taken from the linearized quadrature equations,
//   dX ~ sqrt(1 + xi (1 - lambda)) dW1,  dY ~ sqrt(1 + xi (1 + lambda)) dW2.
// The constant diffusion is an approximation in the saturated regime; the
// corrections scale with g^2 and are negligible when g^2 << lambda - 1.

#include <array>
#include <complex>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bistab/rng.hpp"
#include "bistab/states.hpp"

namespace bistab {

enum class Nonlinearity { opo, jpo };

std::string_view nonlinearity_name(Nonlinearity kind) noexcept;
Nonlinearity nonlinearity_from_name(std::string_view name);

struct OscillatorParams {
  double lambda = 1.5;  // pump fraction above threshold; > 1
  double g = 0.05;      // quantum noise level; > 0
  double b = 0.0;       // coherent bias amplitude
  Nonlinearity kind = Nonlinearity::opo;
  bool nonlinear = true;  // false drops the |alpha|^2 alpha term (linearized limit)

  /// Coefficient k of the k |alpha|^2 alpha drift term.
  cplx kerr() const noexcept;
  /// Unbiased OPO steady-state amplitude sqrt(lambda - 1)/g.
  double opo_amplitude() const noexcept;
  void validate() const;
};

struct SimConfig {
  double dt = 0.005;
  double t_max = 30.0;
  Representation repr = Representation::husimi_q;
  std::uint64_t seed = 1;
  int n_traj = 10000;
  int threads = 0;  // 0: BISTAB_THREADS or hardware concurrency
  int thin = 0;     // path sample spacing in steps; 0 records only the endpoints

  /// dt = 0.005, t_max = max(15/(lambda - 1), 10).
  static SimConfig defaults_for(double lambda);
  /// dt <= 0.01, t_max >= 10/(lambda - 1), n_traj >= 100.
  void validate(const OscillatorParams& params) const;
  int steps() const;
};

enum class Outcome : std::uint8_t { phase_zero, phase_pi, unresolved };
std::string_view outcome_name(Outcome o) noexcept;

struct Trajectory {
  std::vector<double> t, x, y;  // thinned path in quadrature units
  cplx final_alpha;
};

struct EnsembleResult {
  long n1 = 0;  // settled at the phase-0 state
  long n0 = 0;  // settled at the phase-pi state
  long n_unresolved = 0;
  double p = 0.5;
  double se = 0.5;
  bool unresolved_warning = false;  // more than 1% unresolved
  double mean_final_abs = 0.0;      // mean |alpha| over all trajectories
  OscillatorParams params;
  SimConfig sim;
  std::vector<cplx> initial;  // per trajectory
  std::vector<cplx> final_alpha;
  std::vector<Outcome> outcomes;

  std::uint64_t n_traj() const noexcept { return outcomes.size(); }
};

cplx drift(cplx alpha, const OscillatorParams& params) noexcept;

struct DiffusionCoeffs {
  double dx;
  double dy;
};
/// Noise amplitudes of the X and Y quadratures; a negative radicand is
/// unsupported-representation-regime.
DiffusionCoeffs diffusion_coeffs(const OscillatorParams& params, Representation repr);

/// Euler-Maruyama from alpha0 to sim.t_max. The same inputs always give a
/// bit-identical path. Throws numerical-blowup when |alpha| exceeds
/// 10 sqrt(lambda - 1)/g.
Trajectory evolve_trajectory(cplx alpha0, const OscillatorParams& params, const SimConfig& sim,
                             const CounterStream& stream);

/// The two stable fixed points of the drift: `phase_zero` continues the
/// +X branch, `phase_pi` the -X branch. For the JPO they are rotated off the
/// real axis by the Kerr term.
struct AttractorPair {
  cplx phase_zero;
  cplx phase_pi;
};
/// Damped Newton from the unbiased fixed points, then from a ring of seeds.
/// Throws jpo-fixed-points-not-found when two stable roots cannot be found.
AttractorPair find_attractors(const OscillatorParams& params);
/// The stable root reached from `seed`, if any.
std::optional<cplx> locate_fixed_point(const OscillatorParams& params, cplx seed);
bool is_stable_fixed_point(cplx alpha, const OscillatorParams& params);

/// OPO: sign of X with |X| >= 0.5 sqrt(2(lambda-1))/g. JPO: nearest attractor,
/// with the projection onto its direction passing the same gate.
Outcome classify_outcome(const Trajectory& traj, const OscillatorParams& params);
Outcome classify_final(cplx alpha, const OscillatorParams& params,
                       const AttractorPair* attractors = nullptr);

/// Samples n_traj initial points (Q function for xi = +1; exact Gaussian
/// moments for xi = 0, Gaussian pure states only), evolves them and counts
/// outcomes. Trajectory i uses streams derived from (sim.seed, i), so the
/// result does not depend on the worker count.
EnsembleResult run_ensemble(const QuantumState& state, const OscillatorParams& params,
                            const SimConfig& sim);

/// Pre-sampled variant used by sweeps: `initial` must hold sim.n_traj points.
EnsembleResult run_ensemble(std::span<const cplx> initial, const OscillatorParams& params,
                            const SimConfig& sim);

/// Initial points for trajectories 0..count-1 under (seed, repr).
std::vector<cplx> sample_initial_points(const QuantumState& state, Representation repr, int count,
                                        std::uint64_t seed);

/// Number of worker threads: explicit value, else BISTAB_THREADS, else the
/// hardware concurrency.
int resolve_threads(int requested);

nlohmann::json to_json(const OscillatorParams& params);
nlohmann::json to_json(const SimConfig& sim);
/// {n1, n0, n_unresolved, p, se, params, sim} plus the warning flag.
nlohmann::json to_json(const EnsembleResult& result);
void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::vector<std::string>& header_lines = {});

}  // namespace bistab
