#include "bistab/experiments.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>

#include "bistab/csv.hpp"
#include "bistab/error.hpp"
#include "bistab/state_dsl.hpp"

namespace bistab {

namespace {

[[noreturn]] void bad_spec(const std::string& what) { throw Error(ErrorCode::invalid_spec, what); }

template <class T>
T field(const nlohmann::json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    bad_spec(std::string("field '") + key + "' has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& where) {
  if (!obj.is_object()) bad_spec(where + " must be a JSON object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) bad_spec("unknown field '" + key + "' in " + where);
  }
}

// One ensemble per bias; `visit` sees each successful ensemble.
BiasSweep mc_sweep(const ExperimentSpec& spec,
                   const std::function<void(std::size_t, const EnsembleResult&)>& visit = {}) {
  spec.validate();
  const auto state = state_from_expr(spec.state, spec.cutoff);
  const auto sim = spec.sim_config();
  diffusion_coeffs(spec.params(), sim.repr);
  const auto initial = sample_initial_points(state, sim.repr, sim.n_traj, sim.seed);
  BiasSweep sweep;
  sweep.provenance = Provenance::monte_carlo;
  const auto bs = spec.b_grid.values();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    SweepPoint pt;
    pt.b = bs[i];
    try {
      const auto r = run_ensemble(initial, spec.params(bs[i]), sim);
      pt.p = r.p;
      pt.se = r.se;
      pt.n1 = r.n1;
      pt.n0 = r.n0;
      pt.n_unresolved = r.n_unresolved;
      if (r.n1 + r.n0 == 0) pt.error = "no resolved trajectories";
      if (visit) visit(i, r);
    } catch (const Error& e) {
      pt.error = std::string(error_name(e.code())) + ": " + e.what();
    }
    sweep.points.push_back(std::move(pt));
  }
  return sweep;
}

double circular_mean(const std::vector<double>& angles) {
  double s = 0, c = 0;
  for (double a : angles) {
    s += std::sin(a);
    c += std::cos(a);
  }
  return std::atan2(s, c);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

nlohmann::json sweep_summary(const BiasSweep& sweep, double lambda) {
  int failed = 0;
  long unresolved = 0;
  for (const auto& pt : sweep.points) {
    failed += !pt.ok();
    unresolved += pt.n_unresolved;
  }
  return {{"provenance", provenance_name(sweep.provenance)},
          {"points", sweep.points.size()},
          {"failed_points", failed},
          {"unresolved_trajectories", unresolved},
          {"max_slope", failed ? nlohmann::json(nullptr) : nlohmann::json(max_slope(sweep, lambda))}};
}

// Writes sweep.csv and, when possible, reconstruction.csv; returns notes for the report.
nlohmann::json write_sweep_outputs(const ExperimentSpec& spec, const BiasSweep& sweep, const std::string& name) {
  std::ostringstream s;
  write_sweep_csv(s, sweep, spec_metadata(spec));
  write_file(spec.out_dir / (name + ".csv"), s.str());
  nlohmann::json notes = sweep_summary(sweep, spec.lambda);
  try {
    auto meta = spec_metadata(spec);
    meta.push_back("sigma2 " + csv::format_double(filter_sigma2(spec.lambda, spec.xi)));
    std::ostringstream r;
    write_reconstruction_csv(r, sweep, spec.lambda, meta);
    write_file(spec.out_dir / "reconstruction.csv", r.str());
    notes["reconstruction"] = "reconstruction.csv";
  } catch (const Error& e) {
    notes["reconstruction"] = nullptr;
    notes["reconstruction_error"] = std::string(error_name(e.code())) + ": " + e.what();
  }
  return notes;
}

}  // namespace

std::vector<std::string> spec_metadata(const ExperimentSpec& spec) {
  const auto sim = spec.sim_config();
  return {"state " + spec.state,
          "cutoff " + std::to_string(spec.cutoff),
          "lambda " + csv::format_double(spec.lambda),
          "g " + csv::format_double(spec.g),
          "kind " + std::string(nonlinearity_name(spec.kind)),
          "xi " + std::to_string(spec.xi),
          "dt " + csv::format_double(sim.dt),
          "t_max " + csv::format_double(sim.t_max),
          "n_traj " + std::to_string(sim.n_traj),
          "seed " + std::to_string(sim.seed)};
}

std::vector<double> BiasGrid::values() const { return linspace(min, max, n); }

OscillatorParams ExperimentSpec::params(double b) const {
  OscillatorParams p;
  p.lambda = lambda;
  p.g = g;
  p.b = b;
  p.kind = kind;
  return p;
}

SimConfig ExperimentSpec::sim_config() const {
  SimConfig s = sim;
  s.repr = representation_from_xi(xi);
  return s;
}

void ExperimentSpec::validate() const {
  try {
    parse_state_expr(state);
    if (cutoff < 2) bad_spec("cutoff must be >= 2");
    if (xi != 0 && xi != 1) bad_spec("xi must be 0 or 1");
    if (b_grid.n < 2 || !(b_grid.max > b_grid.min)) bad_spec("b_grid needs n >= 2 and max > min");
    params().validate();
    sim_config().validate(params());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::invalid_spec) throw;
    bad_spec(std::string(error_name(e.code())) + ": " + e.what());
  }
}

ExperimentSpec spec_from_json(const nlohmann::json& doc) {
  reject_unknown(doc, {"state", "cutoff", "lambda", "g", "kind", "xi", "b_grid", "sim", "out_dir"}, "spec");
  ExperimentSpec spec;
  spec.state = field<std::string>(doc, "state", spec.state);
  spec.cutoff = field<int>(doc, "cutoff", spec.cutoff);
  spec.lambda = field<double>(doc, "lambda", spec.lambda);
  spec.g = field<double>(doc, "g", spec.g);
  spec.xi = field<int>(doc, "xi", spec.xi);
  try {
    spec.kind = nonlinearity_from_name(field<std::string>(doc, "kind", "opo"));
  } catch (const Error& e) {
    bad_spec(e.what());
  }
  if (doc.contains("b_grid")) {
    const auto& grid = doc.at("b_grid");
    reject_unknown(grid, {"min", "max", "n"}, "b_grid");
    spec.b_grid.min = field<double>(grid, "min", spec.b_grid.min);
    spec.b_grid.max = field<double>(grid, "max", spec.b_grid.max);
    spec.b_grid.n = field<int>(grid, "n", spec.b_grid.n);
  }
  spec.sim = spec.lambda > 1 ? SimConfig::defaults_for(spec.lambda) : SimConfig{};
  if (doc.contains("sim")) {
    const auto& sim = doc.at("sim");
    reject_unknown(sim, {"dt", "t_max", "n_traj", "seed"}, "sim");
    spec.sim.dt = field<double>(sim, "dt", spec.sim.dt);
    spec.sim.t_max = field<double>(sim, "t_max", spec.sim.t_max);
    spec.sim.n_traj = field<int>(sim, "n_traj", spec.sim.n_traj);
    spec.sim.seed = field<std::uint64_t>(sim, "seed", spec.sim.seed);
  }
  spec.out_dir = field<std::string>(doc, "out_dir", spec.out_dir.string());
  spec.validate();
  return spec;
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
  return {{"state", spec.state},
          {"cutoff", spec.cutoff},
          {"lambda", spec.lambda},
          {"g", spec.g},
          {"kind", nonlinearity_name(spec.kind)},
          {"xi", spec.xi},
          {"b_grid", {{"min", spec.b_grid.min}, {"max", spec.b_grid.max}, {"n", spec.b_grid.n}}},
          {"sim", {{"dt", spec.sim.dt}, {"t_max", spec.sim.t_max}, {"n_traj", spec.sim.n_traj}, {"seed", spec.sim.seed}}},
          {"out_dir", spec.out_dir.string()}};
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open spec file " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    bad_spec(path.string() + ": " + e.what());
  }
  return spec_from_json(doc);
}

BiasSweep bias_sweep(const ExperimentSpec& spec, SweepMethod method) {
  if (method == SweepMethod::monte_carlo) return mc_sweep(spec);
  spec.validate();
  const auto state = state_from_expr(spec.state, spec.cutoff);
  const auto marginal = x_marginal(state, representation_from_xi(spec.xi));
  return analytic_sweep(marginal, spec.lambda, spec.xi, spec.b_grid.values());
}

ComparisonReport compare_sweeps(const BiasSweep& mc, const BiasSweep& analytic) {
  if (mc.points.size() != analytic.points.size()) {
    throw Error(ErrorCode::invalid_sweep, "sweeps have different lengths");
  }
  ComparisonReport report;
  for (std::size_t i = 0; i < mc.points.size(); ++i) {
    const auto& m = mc.points[i];
    const auto& a = analytic.points[i];
    if (m.b != a.b) throw Error(ErrorCode::invalid_sweep, "sweeps use different bias values");
    if (!m.ok() || !a.ok()) {
      ++report.failed_points;
      continue;
    }
    ComparisonPoint c;
    c.b = m.b;
    c.p_mc = m.p;
    c.se_mc = m.se;
    c.p_analytic = a.p;
    // A sample with p = 0 or 1 has zero estimated se; fall back on the
    // binomial se implied by the analytic value.
    const double n = static_cast<double>(std::max<long>(m.n1 + m.n0, 1));
    c.se_used = std::max(m.se, std::sqrt(a.p * (1.0 - a.p) / n));
    const double diff = std::abs(m.p - a.p);
    c.z = c.se_used > 0 ? diff / c.se_used : (diff == 0 ? 0.0 : INFINITY);
    report.max_z = std::max(report.max_z, c.z);
    report.max_abs_diff = std::max(report.max_abs_diff, diff);
    report.points.push_back(c);
  }
  report.pass = report.failed_points == 0 && report.max_z <= 4.0;
  return report;
}

ComparisonReport compare_mc_analytic(const ExperimentSpec& spec, std::optional<int> analytic_xi) {
  const auto mc = bias_sweep(spec, SweepMethod::monte_carlo);
  if (!analytic_xi) return compare_sweeps(mc, bias_sweep(spec, SweepMethod::analytic));
  // Keep the marginal of the simulated representation and change only the
  // filter width. Switching both together gives the same prediction.
  filter_sigma2(spec.lambda, *analytic_xi);
  const auto marginal = x_marginal(state_from_expr(spec.state, spec.cutoff), representation_from_xi(spec.xi));
  return compare_sweeps(mc, analytic_sweep(marginal, spec.lambda, *analytic_xi, spec.b_grid.values()));
}

double phase_cluster_separation(const EnsembleResult& result) {
  std::vector<double> zero, pi;
  for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
    if (result.outcomes[i] == Outcome::phase_zero) zero.push_back(std::arg(result.final_alpha[i]));
    if (result.outcomes[i] == Outcome::phase_pi) pi.push_back(std::arg(result.final_alpha[i]));
  }
  if (zero.empty() || pi.empty()) return std::nan("");
  const double d = std::remainder(circular_mean(zero) - circular_mean(pi), 2 * std::numbers::pi);
  return std::abs(d);
}

JpoReport jpo_sweep(const ExperimentSpec& spec) {
  ExperimentSpec jpo = spec;
  jpo.kind = Nonlinearity::jpo;
  JpoReport report;
  report.lambda = jpo.lambda;
  report.fixed_points = find_attractors(jpo.params(0.0));
  report.rotation_angle = std::arg(report.fixed_points.phase_zero);
  report.phase_separation.assign(jpo.b_grid.n, std::nan(""));
  report.sweep = mc_sweep(jpo, [&](std::size_t i, const EnsembleResult& r) {
    report.phase_separation[i] = phase_cluster_separation(r);
  });
  for (double s : report.phase_separation) {
    if (std::isfinite(s)) report.max_separation_error = std::max(report.max_separation_error, std::abs(s - std::numbers::pi));
  }
  return report;
}

double steady_state_amplitude(const OscillatorParams& params) {
  params.validate();
  if (params.kind == Nonlinearity::opo && params.b == 0.0 && params.nonlinear) return params.opo_amplitude();
  return std::abs(find_attractors(params).phase_zero);
}

double max_slope(const BiasSweep& sweep, double lambda) {
  const auto b = sweep.b();
  const auto p = sweep.p();
  const double scale = (lambda - 1) / std::numbers::sqrt2;  // db/dx
  double best = 0;
  for (std::size_t i = 1; i + 1 < b.size(); ++i) best = std::max(best, (p[i + 1] - p[i - 1]) / (b[i + 1] - b[i - 1]));
  return best * scale;
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& c : report.points) {
    pts.push_back({{"b", c.b}, {"p_mc", c.p_mc}, {"se_mc", c.se_mc}, {"p_analytic", c.p_analytic},
                   {"se_used", c.se_used}, {"z", c.z}});
  }
  return {{"points", pts},
          {"max_z", report.max_z},
          {"max_abs_diff", report.max_abs_diff},
          {"failed_points", report.failed_points},
          {"pass", report.pass}};
}

nlohmann::json to_json(const JpoReport& report) {
  auto cplx_json = [](cplx z) { return nlohmann::json{{"re", z.real()}, {"im", z.imag()}, {"abs", std::abs(z)}, {"arg", std::arg(z)}}; };
  nlohmann::json sep = nlohmann::json::array();
  for (double s : report.phase_separation) sep.push_back(std::isfinite(s) ? nlohmann::json(s) : nlohmann::json(nullptr));
  return {{"fixed_points", {{"phase_zero", cplx_json(report.fixed_points.phase_zero)},
                            {"phase_pi", cplx_json(report.fixed_points.phase_pi)}}},
          {"rotation_angle", report.rotation_angle},
          {"phase_separation", sep},
          {"max_separation_error", report.max_separation_error},
          {"sweep", sweep_summary(report.sweep, report.lambda)}};
}

nlohmann::json run_experiment(const ExperimentSpec& spec, RunMode mode) {
  spec.validate();
  std::error_code ec;
  std::filesystem::create_directories(spec.out_dir, ec);
  if (ec) throw Error(ErrorCode::io_error, "cannot create " + spec.out_dir.string() + ": " + ec.message());

  nlohmann::json report{{"spec", spec_to_json(spec)}};
  switch (mode) {
    case RunMode::analytic: {
      report["mode"] = "analytic";
      report["sigma2"] = filter_sigma2(spec.lambda, spec.xi);
      report["sweep"] = write_sweep_outputs(spec, bias_sweep(spec, SweepMethod::analytic), "sweep");
      break;
    }
    case RunMode::monte_carlo: {
      report["mode"] = "mc";
      report["sweep"] = write_sweep_outputs(spec, bias_sweep(spec, SweepMethod::monte_carlo), "sweep");
      report["steady_state_amplitude"] = steady_state_amplitude(spec.params());
      break;
    }
    case RunMode::compare: {
      report["mode"] = "compare";
      const auto mc = bias_sweep(spec, SweepMethod::monte_carlo);
      const auto analytic = bias_sweep(spec, SweepMethod::analytic);
      report["sweep"] = write_sweep_outputs(spec, mc, "sweep");
      std::ostringstream a;
      write_sweep_csv(a, analytic, spec_metadata(spec));
      write_file(spec.out_dir / "analytic_sweep.csv", a.str());
      report["comparison"] = to_json(compare_sweeps(mc, analytic));
      break;
    }
    case RunMode::jpo: {
      report["mode"] = "jpo";
      ExperimentSpec as_jpo = spec;
      as_jpo.kind = Nonlinearity::jpo;
      report["spec"] = spec_to_json(as_jpo);
      const auto jpo = jpo_sweep(as_jpo);
      report["sweep"] = write_sweep_outputs(as_jpo, jpo.sweep, "sweep");
      report["jpo"] = to_json(jpo);
      break;
    }
  }
  write_file(spec.out_dir / "report.json", report.dump(2) + "\n");
  return report;
}

}  // namespace bistab
