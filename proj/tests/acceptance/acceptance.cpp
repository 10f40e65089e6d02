// Acceptance run: one PASS/FAIL line per criterion, detail lines indented.
//
//   acceptance            all criteria
//   acceptance --only 6   a single criterion
//
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bistab/analytics.hpp"
#include "bistab/dynamics.hpp"
#include "bistab/error.hpp"
#include "bistab/experiments.hpp"
#include "bistab/state_dsl.hpp"
#include "bistab/states.hpp"
#include "dsl_gen.hpp"
#include "oracle_checks.hpp"

using namespace bistab;

namespace {

constexpr double kZ = 4.0;  // MC agreement in standard errors
const char* const kCat = "coh(1) + coh(-1)";
const char* const kTwoLobe = "sq(0, 0.5i) + sq(2+0.5i, 1)";

struct Verdict {
  bool pass = true;
  std::string summary;
};

void detail(const char* fmt, auto... args) {
  std::printf("    ");
  std::printf(fmt, args...);
  std::printf("\n");
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Bias grid covering normalized bias x = sqrt(2) b/(lambda-1) in [-half_width, half_width].
BiasGrid x_window(double lambda, double half_width, int n) {
  const double b = half_width * (lambda - 1) / std::numbers::sqrt2;
  return {-b, b, n};
}

OscillatorParams opo(double lambda, double g, double b = 0) {
  OscillatorParams p;
  p.lambda = lambda;
  p.g = g;
  p.b = b;
  return p;
}

SimConfig sim_for(double lambda, int n_traj, std::uint64_t seed) {
  auto sim = SimConfig::defaults_for(lambda);
  sim.n_traj = n_traj;
  sim.seed = seed;
  return sim;
}

ExperimentSpec spec_for(const char* state, double lambda, double g, BiasGrid grid, int n_traj) {
  ExperimentSpec spec;
  spec.state = state;
  spec.cutoff = std::string(state) == kTwoLobe ? 64 : 32;
  spec.lambda = lambda;
  spec.g = g;
  spec.xi = 1;
  spec.b_grid = grid;
  spec.sim = sim_for(lambda, n_traj, 1);
  return spec;
}

int count_maxima(const std::vector<double>& v) {
  int n = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) n += v[i] > v[i - 1] && v[i] >= v[i + 1];
  return n;
}

Verdict unbiased_symmetry() {
  Verdict v;
  double worst_z = 0;
  for (double lambda : {1.2, 1.5, 2.0}) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_ensemble(make_fock(0), opo(lambda, 0.05), sim_for(lambda, 10000, 1));
    const double secs = seconds_since(t0);
    const double z = std::abs(r.p - 0.5) / r.se;
    worst_z = std::max(worst_z, z);
    const bool ok = z <= kZ && secs <= 60;
    v.pass &= ok;
    detail("lambda %.1f: p = %.4f, se = %.4f, z = %.2f, %.1f s%s", lambda, r.p, r.se, z, secs, ok ? "" : "  <-- fail");
  }
  v.summary = fmt("max z %.2f (<= 4), runtime <= 60 s per lambda", worst_z);
  return v;
}

Verdict noiseless_closed_form() {
  Verdict v;
  const double exact = phi(std::numbers::sqrt2 * 0.5);
  const double p = analytic_probability(x_marginal(make_fock(0), Representation::husimi_q), 2, 1, 0.5);
  const bool analytic_ok = std::abs(p - 0.760) <= 5e-4;
  detail("analytic p = %.6f, Phi(sqrt2 * 0.5) = %.6f, target 0.760", p, exact);
  const auto r = run_ensemble(make_fock(0), opo(2, 0.05, 0.5), sim_for(2, 10000, 2));
  const double z = std::abs(r.p - p) / r.se;
  detail("MC p = %.4f +- %.4f, z = %.2f", r.p, r.se, z);
  v.pass = analytic_ok && z <= kZ;
  v.summary = fmt("analytic %.4f, MC z %.2f", p, z);
  return v;
}

Verdict error_function_law() {
  Verdict v;
  double worst = 0;
  for (const char* expr : {"fock(0)", "sq(0, 0.5)"}) {
    const auto state = state_from_expr(expr, 32);
    const auto mom = quadrature_moments(state);
    const double var = mom.var_x + 0.5;  // Q marginal variance
    const auto m = x_marginal(state, Representation::husimi_q);
    for (double lambda : {1.2, 1.5, 2.0}) {
      const double s2 = filter_sigma2(lambda, 1);
      double dev = 0;
      for (double b : BiasGrid{}.values()) {
        const double fit = phi((std::numbers::sqrt2 * b / (lambda - 1) + mom.mean_x) / std::sqrt(var + s2));
        dev = std::max(dev, std::abs(analytic_probability(m, lambda, 1, b) - fit));
      }
      worst = std::max(worst, dev);
      detail("%-10s lambda %.1f: max |p - Phi| = %.2e", expr, lambda, dev);
    }
  }
  v.pass = worst <= 1e-4;
  v.summary = fmt("max deviation %.2e (<= 1e-4)", worst);
  return v;
}

Verdict mc_vs_closed_form() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  double worst_z = 0, worst_diff = 0;
  for (const char* expr : {"fock(0)", "fock(1)", "fock(5)", kCat, kTwoLobe}) {
    for (double lambda : {1.2, 1.5, 2.0}) {
      const auto spec = spec_for(expr, lambda, 0.05, x_window(lambda, 8, 21), 10000);
      const auto report = compare_sweeps(bias_sweep(spec, SweepMethod::monte_carlo),
                                         bias_sweep(spec, SweepMethod::analytic));
      worst_z = std::max(worst_z, report.max_z);
      worst_diff = std::max(worst_diff, report.max_abs_diff);
      v.pass &= report.pass;
      detail("%-28s lambda %.1f: max |dp| = %.4f, max z = %.2f, failed points %d%s", expr, lambda,
             report.max_abs_diff, report.max_z, report.failed_points, report.pass ? "" : "  <-- fail");
    }
  }
  const double secs = seconds_since(t0);
  detail("runtime %.0f s", secs);
  v.pass &= secs <= 1800;
  v.summary = fmt("max z %.2f (<= 4), max |dp| %.4f, %.0f s (<= 1800)", worst_z, worst_diff, secs);
  return v;
}

Verdict g_independence() {
  Verdict v;
  const auto state = make_fock(5);
  std::vector<EnsembleResult> runs;
  std::uint64_t seed = 11;
  for (double g : {0.02, 0.05, 0.1}) {
    runs.push_back(run_ensemble(state, opo(2, g, 0.5), sim_for(2, 10000, seed++)));
    detail("g = %.2f: p = %.4f +- %.4f", g, runs.back().p, runs.back().se);
  }
  double worst_z = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      const double se = std::hypot(runs[i].se, runs[j].se);
      worst_z = std::max(worst_z, std::abs(runs[i].p - runs[j].p) / se);
    }
  }
  v.pass = worst_z <= kZ;
  v.summary = fmt("max pairwise z %.2f (<= 4, independent seeds)", worst_z);
  return v;
}

Verdict cat_reconstruction() {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  const auto m = x_marginal(state_from_expr(kCat, 32), Representation::husimi_q);
  double worst_analytic = 0, worst_mc = 0;
  for (double lambda : {1.2, 1.5, 2.0}) {
    const auto grid = x_window(lambda, 8, 41);
    const auto target = smooth_marginal(m, filter_sigma2(lambda, 1));
    const auto rec = reconstruct_marginal(analytic_sweep(m, lambda, 1, grid.values()), lambda);
    const double l1 = l1_distance(rec, target);
    worst_analytic = std::max(worst_analytic, l1);
    v.pass &= l1 <= 0.05;
    detail("lambda %.1f analytic: L1 to the smoothed marginal %.4f (<= 0.05)", lambda, l1);
    if (lambda == 2.0) {
      const double raw = l1_distance(rec, m);
      const int peaks = count_maxima(rec.density());
      v.pass &= raw <= 0.05 && peaks == 2;
      detail("lambda 2.0 analytic: L1 to the raw Q marginal %.4f, %d maxima", raw, peaks);
    }
    const auto spec = spec_for(kCat, lambda, 0.05, grid, 100000);
    const auto mc = bias_sweep(spec, SweepMethod::monte_carlo);
    const double l1_mc = l1_distance(reconstruct_marginal(mc, lambda), target);
    worst_mc = std::max(worst_mc, l1_mc);
    v.pass &= l1_mc <= 0.15;
    detail("lambda %.1f MC (1e5 per point): L1 %.4f (<= 0.15), %.0f s so far", lambda, l1_mc, seconds_since(t0));
  }
  const double secs = seconds_since(t0);
  v.pass &= secs <= 3600;
  v.summary = fmt("analytic L1 %.4f, MC L1 %.4f, %.0f s (<= 3600)", worst_analytic, worst_mc, secs);
  return v;
}

Verdict washout() {
  Verdict v;
  const auto m = x_marginal(state_from_expr(kCat, 32), Representation::husimi_q);
  double prev = INFINITY;
  std::string chain;
  for (double lambda : {2.0, 1.5, 1.2}) {
    const auto sweep = analytic_sweep(m, lambda, 1, x_window(lambda, 8, 321).values());
    const double slope = max_slope(sweep, lambda);
    const double raw = slope * std::numbers::sqrt2 / (lambda - 1);
    detail("lambda %.1f: max dp/dx = %.5f (dp/db = %.5f)", lambda, slope, raw);
    v.pass &= slope < prev;
    prev = slope;
    chain += (chain.empty() ? "" : " > ") + fmt("%.4f", slope);
  }
  v.summary = "max dp/dx " + chain + " (strictly decreasing)";
  return v;
}

Verdict steady_amplitude() {
  Verdict v;
  const auto r = run_ensemble(make_fock(0), opo(2, 0.1), sim_for(2, 10000, 3));
  const double rel = std::abs(r.mean_final_abs - 10.0) / 10.0;
  detail("mean final |alpha| = %.4f over %llu trajectories", r.mean_final_abs, (unsigned long long)r.n_traj());
  v.pass = rel <= 0.02;
  v.summary = fmt("mean |alpha| %.4f, relative error %.2e (<= 0.02)", r.mean_final_abs, rel);
  return v;
}

Verdict jpo_checks() {
  Verdict v;
  auto spec = spec_for("fock(1)", 1.5, 0.01, x_window(1.5, 6, 21), 10000);
  spec.kind = Nonlinearity::jpo;
  const auto jpo = jpo_sweep(spec);
  const auto report = compare_sweeps(jpo.sweep, bias_sweep(spec, SweepMethod::analytic));
  v.pass &= report.pass;
  detail("g = 0.01 fock(1) JPO MC vs OPO analytic: max z = %.2f, max |dp| = %.4f", report.max_z,
         report.max_abs_diff);
  double worst_sep = jpo.max_separation_error;

  double worst_z = 0;
  for (const char* expr : {"fock(1)", "fock(5)"}) {
    for (double g : {0.01, 0.05, 0.1}) {
      auto params = opo(1.5, g);
      params.kind = Nonlinearity::jpo;
      const auto r = run_ensemble(state_from_expr(expr, 32), params, sim_for(1.5, 10000, 5));
      const double z = std::abs(r.p - 0.5) / r.se;
      worst_z = std::max(worst_z, z);
      v.pass &= z <= kZ;
      detail("%s g = %.2f b = 0: p = %.4f +- %.4f, z = %.2f", expr, g, r.p, r.se, z);
    }
  }

  auto f5 = spec_for("fock(5)", 1.5, 0.1, {-0.2, 0.2, 5}, 10000);
  f5.kind = Nonlinearity::jpo;
  const auto clusters = jpo_sweep(f5);
  worst_sep = std::max(worst_sep, clusters.max_separation_error);
  detail("fock(5) g = 0.1: rotation %.4f rad, max |phase gap - pi| = %.4f", clusters.rotation_angle,
         clusters.max_separation_error);
  v.pass &= worst_sep <= 0.05;
  v.summary = fmt("continuity z %.2f, symmetry z %.2f, max |gap - pi| %.4f (<= 0.05)", report.max_z, worst_z, worst_sep);
  return v;
}

Verdict oracle_suite() {
  Verdict v;
  const auto results = oracle::check_references(oracle::load_references(BISTAB_ORACLE_JSON));
  int bad = 0;
  for (const auto& r : results) {
    if (!r.ok) {
      ++bad;
      detail("%s: library %.10g, reference %.10g", r.name.c_str(), r.library, r.reference);
    }
  }
  v.pass = bad == 0;
  v.summary = fmt("%zu reference values, %d outside 1e-3 relative", results.size(), bad);
  return v;
}

Verdict parser_fuzz() {
  Verdict v;
  fuzz::SourceGenerator gen(20240611);
  std::mt19937_64 rng(99);
  int round_trip_failures = 0, crashes = 0, rejected = 0;
  std::vector<std::string> seeds;
  for (int i = 0; i < 10000; ++i) {
    const std::string text = gen.expr();
    try {
      const auto first = parse_state_expr(text);
      const std::string printed = print_state_expr(*first);
      const auto second = parse_state_expr(printed);
      if (!(*first == *second) || print_state_expr(*second) != printed) throw std::logic_error("mismatch");
    } catch (const std::exception& e) {
      if (++round_trip_failures <= 5) detail("round trip failed on '%s': %s", text.c_str(), e.what());
    }
    if (i < 1000) seeds.push_back(text);
  }
  for (const auto& text : seeds) {
    const std::string broken = fuzz::mutate(text, rng);
    try {
      parse_state_expr(broken);
    } catch (const ParseError& e) {
      ++rejected;
      if (e.offset() > broken.size()) ++crashes;
    } catch (...) {
      if (++crashes <= 5) detail("unexpected failure on '%s'", broken.c_str());
    }
  }
  detail("10000 generated, 1000 mutated (%d rejected with a parse error)", rejected);
  v.pass = round_trip_failures == 0 && crashes == 0;
  v.summary = fmt("%d round-trip failures, %d crashes", round_trip_failures, crashes);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"unbiased symmetry", unbiased_symmetry},
      {"noiseless closed form", noiseless_closed_form},
      {"error-function law", error_function_law},
      {"Monte Carlo vs closed form", mc_vs_closed_form},
      {"g independence", g_independence},
      {"cat reconstruction", cat_reconstruction},
      {"washout monotonicity", washout},
      {"steady-state amplitude", steady_amplitude},
      {"JPO continuity and symmetry", jpo_checks},
      {"oracle suite", oracle_suite},
      {"parser fuzz", parser_fuzz},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    const auto& [title, run] = criteria[i];
    std::printf("[%zu] %s\n", i + 1, title);
    std::fflush(stdout);
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %zu: %s: %s\n", v.pass ? "PASS" : "FAIL", i + 1, title, v.summary.c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
