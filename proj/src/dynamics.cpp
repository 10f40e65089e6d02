#include "bistab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <ostream>
#include <thread>

#include "bistab/csv.hpp"
#include "bistab/error.hpp"
#include "integrator.hpp"

namespace bistab {

namespace {

constexpr double kBlowupFactor = 10.0;
constexpr double kGateFraction = 0.5;
constexpr double kUnresolvedWarning = 0.01;

double blowup_limit(const OscillatorParams& p) {
  if (!p.nonlinear) return 1e150;
  return kBlowupFactor * p.opo_amplitude();
}

// Real 2x2 Jacobian of the drift with respect to (Re alpha, Im alpha).
std::array<double, 4> drift_jacobian(cplx alpha, const OscillatorParams& p) {
  const cplx k = p.nonlinear ? p.kerr() : cplx(0);
  const double n2 = std::norm(alpha);
  const cplx d_re = -1.0 + p.lambda + k * (2.0 * alpha.real() * alpha + n2);
  const cplx d_im = cplx(0, -1.0) - cplx(0, p.lambda) + k * (2.0 * alpha.imag() * alpha + cplx(0, n2));
  return {d_re.real(), d_im.real(), d_re.imag(), d_im.imag()};
}

// Fixed points of the unbiased drift: modulus and angle of the phase-0 branch.
cplx unbiased_attractor(const OscillatorParams& p) {
  if (p.kind == Nonlinearity::opo) return p.opo_amplitude();
  // lambda e^{-2i phi} = 1 - i g^2 r^2 with g^4 r^4 = lambda^2 - 1.
  const double kr2 = std::sqrt(p.lambda * p.lambda - 1.0);
  const double r = std::sqrt(kr2) / p.g;
  const double phi = 0.5 * std::atan(kr2);
  return std::polar(r, phi);
}

}  // namespace

std::string_view nonlinearity_name(Nonlinearity kind) noexcept {
  return kind == Nonlinearity::opo ? "opo" : "jpo";
}

Nonlinearity nonlinearity_from_name(std::string_view name) {
  if (name == "opo" || name == "OPO") return Nonlinearity::opo;
  if (name == "jpo" || name == "JPO") return Nonlinearity::jpo;
  throw Error(ErrorCode::invalid_argument, "kind must be opo or jpo, got '" + std::string(name) + "'");
}

std::string_view outcome_name(Outcome o) noexcept {
  switch (o) {
    case Outcome::phase_zero: return "phase-0";
    case Outcome::phase_pi: return "phase-pi";
    case Outcome::unresolved: return "unresolved";
  }
  return "unknown";
}

cplx OscillatorParams::kerr() const noexcept {
  return kind == Nonlinearity::opo ? cplx(-g * g, 0) : cplx(0, g * g);
}

double OscillatorParams::opo_amplitude() const noexcept { return std::sqrt(lambda - 1.0) / g; }

void OscillatorParams::validate() const {
  if (!(lambda > 1.0) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::invalid_argument, "lambda must be > 1 (above threshold)");
  }
  if (!(g > 0.0) || !std::isfinite(g)) throw Error(ErrorCode::invalid_argument, "g must be > 0");
  if (!std::isfinite(b)) throw Error(ErrorCode::invalid_argument, "bias must be finite");
}

SimConfig SimConfig::defaults_for(double lambda) {
  SimConfig s;
  s.t_max = std::max(15.0 / (lambda - 1.0), 10.0);
  return s;
}

void SimConfig::validate(const OscillatorParams& params) const {
  if (!(dt > 0) || dt > 0.01) throw Error(ErrorCode::invalid_argument, "dt must be in (0, 0.01]");
  if (!(t_max >= 10.0 / (params.lambda - 1.0) * (1 - 1e-12))) {
    throw Error(ErrorCode::invalid_argument, "t_max must be >= 10/(lambda - 1)");
  }
  if (n_traj < 100) throw Error(ErrorCode::invalid_argument, "n_traj must be >= 100");
  if (thin < 0 || threads < 0) throw Error(ErrorCode::invalid_argument, "thin/threads must be >= 0");
}

int SimConfig::steps() const { return static_cast<int>(std::lround(t_max / dt)); }

cplx drift(cplx alpha, const OscillatorParams& params) noexcept {
  const cplx nl = params.nonlinear ? params.kerr() * std::norm(alpha) * alpha : cplx(0);
  return -alpha + params.lambda * std::conj(alpha) + nl + params.b;
}

DiffusionCoeffs diffusion_coeffs(const OscillatorParams& params, Representation repr) {
  const double xi = xi_of(repr);
  const double rx = 1.0 + xi * (1.0 - params.lambda);
  const double ry = 1.0 + xi * (1.0 + params.lambda);
  if (rx < 0 || ry < 0) {
    throw Error(ErrorCode::unsupported_representation_regime,
                "negative diffusion radicand for xi = " + std::to_string(xi_of(repr)) +
                    " at lambda = " + std::to_string(params.lambda));
  }
  return {std::sqrt(rx), std::sqrt(ry)};
}

Trajectory evolve_trajectory(cplx alpha0, const OscillatorParams& params, const SimConfig& sim,
                             const CounterStream& stream) {
  params.validate();
  if (!std::isfinite(alpha0.real()) || !std::isfinite(alpha0.imag())) {
    throw Error(ErrorCode::invalid_argument, "initial alpha must be finite");
  }
  SimConfig local = sim;
  local.seed = stream.seed;
  const auto model = detail::StepModel::from(params, local, stream.zero_noise);
  detail::LaneBatch batch;
  batch.re[0] = alpha0.real();
  batch.im[0] = alpha0.imag();
  batch.index.fill(stream.index);
  Trajectory traj;
  detail::integrate(batch, model, &traj, sim.thin);
  traj.final_alpha = cplx(batch.re[0], batch.im[0]);
  const double limit = blowup_limit(params);
  if (!(batch.max_norm2[0] <= limit * limit) || !std::isfinite(std::norm(traj.final_alpha))) {
    throw Error(ErrorCode::numerical_blowup, "|alpha| exceeded " + std::to_string(limit));
  }
  return traj;
}

bool is_stable_fixed_point(cplx alpha, const OscillatorParams& params) {
  const auto j = drift_jacobian(alpha, params);
  const double trace = j[0] + j[3];
  const double det = j[0] * j[3] - j[1] * j[2];
  return trace < 0 && det > 0;
}

std::optional<cplx> locate_fixed_point(const OscillatorParams& params, cplx seed) {
  cplx z = seed;
  const double scale = std::max(1.0, std::abs(seed));
  for (int iter = 0; iter < 200; ++iter) {
    const cplx f = drift(z, params);
    if (std::abs(f) < 1e-12 * scale) {
      if (is_stable_fixed_point(z, params)) return z;
      return std::nullopt;
    }
    const auto j = drift_jacobian(z, params);
    const double det = j[0] * j[3] - j[1] * j[2];
    if (std::abs(det) < 1e-300) return std::nullopt;
    const double sx = (j[3] * f.real() - j[1] * f.imag()) / det;
    const double sy = (-j[2] * f.real() + j[0] * f.imag()) / det;
    // Backtrack until the residual decreases.
    double damping = 1.0;
    cplx next = z;
    for (int k = 0; k < 30; ++k) {
      next = z - damping * cplx(sx, sy);
      if (std::abs(drift(next, params)) < std::abs(f)) break;
      damping *= 0.5;
    }
    z = next;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
  }
  return std::nullopt;
}

AttractorPair find_attractors(const OscillatorParams& params) {
  params.validate();
  const cplx base = unbiased_attractor(params);
  auto zero = locate_fixed_point(params, base);
  auto pi = locate_fixed_point(params, -base);
  auto distinct = [](cplx a, cplx b) { return std::abs(a - b) > 1e-6 * std::max(1.0, std::abs(a)); };
  if (!(zero && pi && distinct(*zero, *pi))) {
    // Fallback: ring of seeds; keep stable roots on either side of the
    // unbiased attractor axis.
    const cplx axis = base / std::abs(base);
    for (int k = 0; k < 32 && !(zero && pi && distinct(*zero, *pi)); ++k) {
      const cplx seed = std::polar(std::abs(base), 2 * std::numbers::pi * k / 32.0);
      const auto root = locate_fixed_point(params, seed);
      if (!root) continue;
      const double proj = (*root * std::conj(axis)).real();
      if (proj > 0 && !zero) zero = root;
      if (proj < 0 && !pi) pi = root;
    }
  }
  if (!(zero && pi && distinct(*zero, *pi))) {
    throw Error(ErrorCode::jpo_fixed_points_not_found,
                "could not locate two stable fixed points at lambda = " +
                    std::to_string(params.lambda) + ", g = " + std::to_string(params.g) +
                    ", b = " + std::to_string(params.b));
  }
  return {*zero, *pi};
}

Outcome classify_final(cplx alpha, const OscillatorParams& params, const AttractorPair* attractors) {
  if (params.kind == Nonlinearity::opo || !params.nonlinear) {
    const double gate = kGateFraction * std::sqrt(2.0 * (params.lambda - 1.0)) / params.g;
    const double x = alpha.real() * std::numbers::sqrt2;
    if (std::abs(x) < gate) return Outcome::unresolved;
    return x > 0 ? Outcome::phase_zero : Outcome::phase_pi;
  }
  const AttractorPair pair = attractors ? *attractors : find_attractors(params);
  const bool zero_nearer = std::abs(alpha - pair.phase_zero) <= std::abs(alpha - pair.phase_pi);
  const cplx target = zero_nearer ? pair.phase_zero : pair.phase_pi;
  const double reach = (alpha * std::conj(target)).real() / std::abs(target);
  if (reach < kGateFraction * params.opo_amplitude()) return Outcome::unresolved;
  return zero_nearer ? Outcome::phase_zero : Outcome::phase_pi;
}

Outcome classify_outcome(const Trajectory& traj, const OscillatorParams& params) {
  return classify_final(traj.final_alpha, params);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BISTAB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<cplx> sample_initial_points(const QuantumState& state, Representation repr, int count,
                                        std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::invalid_argument, "sample count must be >= 1");
  if (repr == Representation::husimi_q) return sample_phase_space(state, repr, count, seed);
  if (repr == Representation::glauber_p) {
    throw Error(ErrorCode::unsupported_representation,
                "Glauber-Sudarshan P trajectories are not supported");
  }
  // Wigner: exact sampling is only possible for Gaussian states, where the
  // Wigner function is the Gaussian with the state's symmetric moments.
  const auto m = quadrature_moments(state);
  const double det = m.var_x * m.var_y - m.cov_xy * m.cov_xy;
  if (!state.is_pure() || std::abs(4.0 * det - 1.0) > 1e-6) {
    throw Error(ErrorCode::unsupported_representation,
                "Wigner sampling needs a pure Gaussian state (4 det V = " +
                    std::to_string(4.0 * det) + ")");
  }
  const double l11 = std::sqrt(m.var_x);
  const double l21 = m.cov_xy / l11;
  const double l22 = std::sqrt(std::max(m.var_y - l21 * l21, 0.0));
  std::vector<cplx> out(count);
  for (int j = 0; j < count; ++j) {
    const CounterStream s{seed, static_cast<std::uint64_t>(j), StreamPurpose::initial_state};
    const auto z = normals4(s.block(0));
    const double x = m.mean_x + l11 * z[0];
    const double y = m.mean_y + l21 * z[0] + l22 * z[1];
    out[j] = cplx(x, y) / std::numbers::sqrt2;
  }
  return out;
}

EnsembleResult run_ensemble(const QuantumState& state, const OscillatorParams& params,
                            const SimConfig& sim) {
  params.validate();
  sim.validate(params);
  diffusion_coeffs(params, sim.repr);
  const auto initial = sample_initial_points(state, sim.repr, sim.n_traj, sim.seed);
  return run_ensemble(initial, params, sim);
}

EnsembleResult run_ensemble(std::span<const cplx> initial, const OscillatorParams& params,
                            const SimConfig& sim) {
  params.validate();
  sim.validate(params);
  if (static_cast<int>(initial.size()) != sim.n_traj) {
    throw Error(ErrorCode::invalid_argument, "need exactly n_traj initial points");
  }
  const auto model = detail::StepModel::from(params, sim, false);
  std::optional<AttractorPair> attractors;
  if (params.kind == Nonlinearity::jpo && params.nonlinear) attractors = find_attractors(params);

  EnsembleResult result;
  result.params = params;
  result.sim = sim;
  result.initial.assign(initial.begin(), initial.end());
  result.final_alpha.assign(sim.n_traj, cplx(0));
  result.outcomes.assign(sim.n_traj, Outcome::unresolved);
  std::vector<double> peaks(sim.n_traj, 0.0);

  const int n_batches = (sim.n_traj + detail::kLanes - 1) / detail::kLanes;
  auto work = [&](int worker, int n_workers) {
    detail::LaneBatch batch;
    for (int bi = worker; bi < n_batches; bi += n_workers) {
      const int first = bi * detail::kLanes;
      for (int l = 0; l < detail::kLanes; ++l) {
        const int i = first + l;
        const cplx a0 = i < sim.n_traj ? initial[i] : cplx(0);
        batch.re[l] = a0.real();
        batch.im[l] = a0.imag();
        batch.max_norm2[l] = 0.0;
        batch.index[l] = static_cast<std::uint64_t>(i);
      }
      detail::integrate(batch, model, nullptr, 0);
      for (int l = 0; l < detail::kLanes && first + l < sim.n_traj; ++l) {
        result.final_alpha[first + l] = cplx(batch.re[l], batch.im[l]);
        peaks[first + l] = batch.max_norm2[l];
      }
    }
  };
  const int n_workers = std::min(resolve_threads(sim.threads), n_batches);
  if (n_workers <= 1) {
    work(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work, w, n_workers);
  }

  const double limit = blowup_limit(params);
  double abs_sum = 0;
  for (int i = 0; i < sim.n_traj; ++i) {
    const cplx a = result.final_alpha[i];
    if (!(peaks[i] <= limit * limit) || !std::isfinite(std::norm(a))) {
      throw Error(ErrorCode::numerical_blowup,
                  "trajectory " + std::to_string(i) + " exceeded |alpha| = " + std::to_string(limit));
    }
    const Outcome o = classify_final(a, params, attractors ? &*attractors : nullptr);
    result.outcomes[i] = o;
    if (o == Outcome::phase_zero) ++result.n1;
    else if (o == Outcome::phase_pi) ++result.n0;
    else ++result.n_unresolved;
    abs_sum += std::abs(a);
  }
  result.mean_final_abs = abs_sum / sim.n_traj;
  const long resolved = result.n1 + result.n0;
  if (resolved > 0) {
    result.p = static_cast<double>(result.n1) / static_cast<double>(resolved);
    result.se = std::sqrt(result.p * (1.0 - result.p) / static_cast<double>(resolved));
  }
  result.unresolved_warning =
      resolved == 0 || static_cast<double>(result.n_unresolved) > kUnresolvedWarning * sim.n_traj;
  return result;
}

nlohmann::json to_json(const OscillatorParams& params) {
  return {{"lambda", params.lambda}, {"g", params.g}, {"b", params.b},
          {"kind", nonlinearity_name(params.kind)}, {"nonlinear", params.nonlinear}};
}

nlohmann::json to_json(const SimConfig& sim) {
  return {{"dt", sim.dt}, {"t_max", sim.t_max}, {"xi", xi_of(sim.repr)},
          {"seed", sim.seed}, {"n_traj", sim.n_traj}};
}

nlohmann::json to_json(const EnsembleResult& result) {
  return {{"n1", result.n1},
          {"n0", result.n0},
          {"n_unresolved", result.n_unresolved},
          {"p", result.p},
          {"se", result.se},
          {"unresolved_warning", result.unresolved_warning},
          {"mean_final_abs", result.mean_final_abs},
          {"params", to_json(result.params)},
          {"sim", to_json(result.sim)}};
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj,
                          const std::vector<std::string>& header_lines) {
  std::vector<std::vector<double>> rows;
  rows.reserve(traj.t.size());
  for (std::size_t i = 0; i < traj.t.size(); ++i) rows.push_back({traj.t[i], traj.x[i], traj.y[i]});
  csv::write(out, header_lines, {"t", "X", "Y"}, rows);
}

}  // namespace bistab
