#include "integrator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bistab/rng.hpp"

namespace bistab::detail {

StepModel StepModel::from(const OscillatorParams& params, const SimConfig& sim, bool zero_noise) {
  const auto coeffs = diffusion_coeffs(params, sim.repr);
  const cplx k = params.nonlinear ? params.kerr() : cplx(0);
  StepModel m;
  m.gain = params.lambda;
  m.kerr_re = k.real();
  m.kerr_im = k.imag();
  m.bias = params.b;
  m.dt = sim.dt;
  m.noise_re = coeffs.dx * std::sqrt(sim.dt / 2.0);
  m.noise_im = coeffs.dy * std::sqrt(sim.dt / 2.0);
  m.seed = sim.seed;
  m.zero_noise = zero_noise;
  m.steps = sim.steps();
  return m;
}

namespace {

void fill_normals(const LaneBatch& batch, const StepModel& model, std::uint32_t block,
                  double* __restrict z) {
  const auto k0 = static_cast<std::uint32_t>(model.seed);
  const auto k1 = static_cast<std::uint32_t>(model.seed >> 32);
  for (int i = 0; i < kLanes; ++i) {
    const Block4 bits = philox4x32({static_cast<std::uint32_t>(batch.index[i]),
                                    static_cast<std::uint32_t>(batch.index[i] >> 32), block,
                                    static_cast<std::uint32_t>(StreamPurpose::dynamics)},
                                   k0, k1);
    const auto n = normals4(bits);
    z[i] = n[0];
    z[kLanes + i] = n[1];
    z[2 * kLanes + i] = n[2];
    z[3 * kLanes + i] = n[3];
  }
}

void step(LaneBatch& batch, const StepModel& m, const double* __restrict zr,
          const double* __restrict zi) {
  double* __restrict re = batch.re.data();
  double* __restrict im = batch.im.data();
  double* __restrict peak = batch.max_norm2.data();
  const double lin_re = m.gain - 1.0;
  const double lin_im = -1.0 - m.gain;
  for (int i = 0; i < kLanes; ++i) {
    const double ar = re[i];
    const double ai = im[i];
    const double n2 = ar * ar + ai * ai;
    const double dr = lin_re * ar + n2 * (m.kerr_re * ar - m.kerr_im * ai) + m.bias;
    const double di = lin_im * ai + n2 * (m.kerr_re * ai + m.kerr_im * ar);
    re[i] = ar + dr * m.dt + m.noise_re * zr[i];
    im[i] = ai + di * m.dt + m.noise_im * zi[i];
    peak[i] = std::max(peak[i], n2);
  }
}

void record(Trajectory& path, const LaneBatch& batch, double t) {
  path.t.push_back(t);
  path.x.push_back(batch.re[0] * std::numbers::sqrt2);
  path.y.push_back(batch.im[0] * std::numbers::sqrt2);
}

}  // namespace

void integrate(LaneBatch& batch, const StepModel& model, Trajectory* path, int thin) {
  alignas(64) static thread_local std::array<double, 4 * kLanes> z{};
  if (model.zero_noise) z.fill(0.0);
  if (path) record(*path, batch, 0.0);
  long done = 0;
  for (std::uint32_t block = 0; done < model.steps; ++block) {
    if (!model.zero_noise) fill_normals(batch, model, block, z.data());
    for (int half = 0; half < 2 && done < model.steps; ++half) {
      step(batch, model, z.data() + 2 * half * kLanes, z.data() + (2 * half + 1) * kLanes);
      ++done;
      if (path && thin > 0 && done % thin == 0 && done != model.steps) {
        record(*path, batch, static_cast<double>(done) * model.dt);
      }
    }
  }
  if (path) record(*path, batch, static_cast<double>(model.steps) * model.dt);
}

}  // namespace bistab::detail
