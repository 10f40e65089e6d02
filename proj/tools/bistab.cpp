// bistab: command-line front end.
//
//   bistab state --expr "coh(1)+coh(-1)" --marginal q --out m.csv
//   bistab simulate --state "fock(1)" --lambda 1.5 --b 0.2
//   bistab sweep --state "fock(5)" --lambda 2 --method analytic --out s.csv
//   bistab reconstruct --in s.csv --out r.csv
//   bistab compare --config exp.json
//   bistab jpo --state "fock(5)" --g 0.01
//
// Exit codes: 0 success, 1 usage/parse/spec errors, 2 numerical or domain errors.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bistab/analytics.hpp"
#include "bistab/csv.hpp"
#include "bistab/dynamics.hpp"
#include "bistab/error.hpp"
#include "bistab/experiments.hpp"
#include "bistab/rng.hpp"
#include "bistab/state_dsl.hpp"
#include "bistab/states.hpp"

using namespace bistab;

namespace {

// Experiment fields settable from flags; unset ones come from --config or the
// experiment defaults.
struct SpecFlags {
  std::string config;
  std::optional<std::string> state;
  std::optional<int> cutoff;
  std::optional<double> lambda;
  std::optional<double> g;
  std::optional<std::string> kind;
  std::optional<int> xi;
  std::optional<double> b_min;
  std::optional<double> b_max;
  std::optional<int> n_b;
  std::optional<double> dt;
  std::optional<double> t_max;
  std::optional<int> n_traj;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  int threads = 0;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "JSON experiment file")->check(CLI::ExistingFile);
    cmd.add_option("--state", state, "state expression, e.g. \"fock(5)\"");
    cmd.add_option("--cutoff", cutoff, "Fock-space cutoff");
    cmd.add_option("--lambda", lambda, "pump fraction above threshold (> 1)");
    cmd.add_option("--g", g, "noise level (> 0)");
    cmd.add_option("--kind", kind, "opo or jpo");
    cmd.add_option("--xi", xi, "1 for the Q function, 0 for the Wigner function");
    cmd.add_option("--b-min", b_min, "first bias");
    cmd.add_option("--b-max", b_max, "last bias");
    cmd.add_option("--n-b", n_b, "number of biases");
    cmd.add_option("--dt", dt, "time step");
    cmd.add_option("--t-max", t_max, "integration time");
    cmd.add_option("--n-traj", n_traj, "trajectories per ensemble");
    cmd.add_option("--seed", seed, "master seed");
    cmd.add_option("--out-dir", out_dir, "output directory");
    cmd.add_option("--threads", threads, "worker cap (default BISTAB_THREADS, then all cores)");
  }

  ExperimentSpec build() const {
    nlohmann::json doc = nlohmann::json::object();
    if (!config.empty()) {
      std::ifstream in(config);
      try {
        doc = nlohmann::json::parse(in);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::invalid_spec, config + ": " + e.what());
      }
      if (!doc.is_object()) throw Error(ErrorCode::invalid_spec, config + ": expected a JSON object");
    }
    // Parse here so a bad expression reports the parser's own error and offset.
    if (state) {
      parse_state_expr(*state);
      doc["state"] = *state;
    }
    if (cutoff) doc["cutoff"] = *cutoff;
    if (lambda) doc["lambda"] = *lambda;
    if (g) doc["g"] = *g;
    if (kind) doc["kind"] = *kind;
    if (xi) doc["xi"] = *xi;
    if (out_dir) doc["out_dir"] = *out_dir;
    auto sub = [&](const char* key) -> nlohmann::json& {
      auto& obj = doc[key];
      if (obj.is_null()) obj = nlohmann::json::object();
      return obj;
    };
    if (b_min) sub("b_grid")["min"] = *b_min;
    if (b_max) sub("b_grid")["max"] = *b_max;
    if (n_b) sub("b_grid")["n"] = *n_b;
    if (dt) sub("sim")["dt"] = *dt;
    if (t_max) sub("sim")["t_max"] = *t_max;
    if (n_traj) sub("sim")["n_traj"] = *n_traj;
    if (seed) sub("sim")["seed"] = *seed;
    auto spec = spec_from_json(doc);
    spec.sim.threads = threads;
    return spec;
  }
};

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Usage-type failures exit 1; everything the numerics reject exits 2.
int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::syntax_error:
    case ErrorCode::semantic_error:
    case ErrorCode::invalid_spec:
    case ErrorCode::io_error:
      return 1;
    default:
      return 2;
  }
}

int cmd_state(const std::string& expr, int cutoff, const std::string& marginal, const std::string& out,
              const std::string& json_out) {
  const auto state = state_from_expr(expr, cutoff);
  const auto repr = marginal == "w" ? Representation::wigner : Representation::husimi_q;
  const auto m = x_marginal(state, repr);
  const auto mom = quadrature_moments(state);
  if (!out.empty()) {
    std::ostringstream s;
    write_marginal_csv(s, m, {"state " + expr, "cutoff " + std::to_string(cutoff),
                              "representation " + std::string(representation_name(repr))});
    write_text(out, s.str());
  }
  if (!json_out.empty()) write_text(json_out, state_to_json(state).dump(2) + "\n");
  if (out != "-") {
    std::printf("state        %s\n", print_state_expr(*parse_state_expr(expr)).c_str());
    std::printf("purity       %.6f\n", state.purity());
    std::printf("<n>          %.6f\n", state.mean_photon_number());
    std::printf("<X>, <Y>     %.6f, %.6f\n", mom.mean_x, mom.mean_y);
    std::printf("var X, var Y %.6f, %.6f (symmetric ordering)\n", mom.var_x, mom.var_y);
    std::printf("marginal     %s, integral %.6f\n", std::string(representation_name(repr)).c_str(), m.integral());
  }
  return 0;
}

int cmd_simulate(const ExperimentSpec& spec, double b, const std::string& out, const std::string& path_out,
                 int thin) {
  const auto params = spec.params(b);
  auto sim = spec.sim_config();
  const auto state = state_from_expr(spec.state, spec.cutoff);
  const auto result = run_ensemble(state, params, sim);
  if (!out.empty()) {
    auto j = to_json(result);
    j["spec"] = spec_to_json(spec);
    write_text(out, j.dump(2) + "\n");
  }
  if (!path_out.empty()) {
    sim.thin = thin;
    const auto traj = evolve_trajectory(result.initial.at(0), params, sim,
                                        CounterStream{sim.seed, 0, StreamPurpose::dynamics});
    std::ostringstream s;
    auto header = spec_metadata(spec);
    header.push_back("b " + csv::format_double(b));
    header.push_back("trajectory 0");
    write_trajectory_csv(s, traj, header);
    write_text(path_out, s.str());
  }
  std::printf("p = %.6f +- %.6f  (n1 %ld, n0 %ld, unresolved %ld)\n", result.p, result.se, result.n1, result.n0,
              result.n_unresolved);
  std::printf("mean final |alpha| = %.4f\n", result.mean_final_abs);
  if (result.unresolved_warning) std::fprintf(stderr, "warning: more than 1%% of trajectories unresolved\n");
  return 0;
}

int cmd_sweep(const ExperimentSpec& spec, const std::string& method, const std::string& out) {
  const bool mc = method == "mc";
  if (out.empty()) {
    const auto report = run_experiment(spec, mc ? RunMode::monte_carlo : RunMode::analytic);
    const auto& sw = report.at("sweep");
    std::printf("%zu points (%s), %d failed -> %s\n", sw.at("points").get<std::size_t>(),
                sw.at("provenance").get<std::string>().c_str(), sw.at("failed_points").get<int>(),
                spec.out_dir.string().c_str());
    if (!sw.at("max_slope").is_null()) std::printf("max slope dp/dx = %.6f\n", sw.at("max_slope").get<double>());
    return 0;
  }
  const auto sweep = bias_sweep(spec, mc ? SweepMethod::monte_carlo : SweepMethod::analytic);
  std::ostringstream s;
  write_sweep_csv(s, sweep, spec_metadata(spec));
  write_text(out, s.str());
  int failed = 0;
  for (const auto& pt : sweep.points) {
    if (!pt.ok()) {
      ++failed;
      std::fprintf(stderr, "b = %g failed: %s\n", pt.b, pt.error.c_str());
    }
  }
  if (out != "-") {
    std::printf("%zu points (%s), %d failed -> %s\n", sweep.points.size(),
                std::string(provenance_name(sweep.provenance)).c_str(), failed, out.c_str());
    if (failed == 0) std::printf("max slope dp/dx = %.6f\n", max_slope(sweep, spec.lambda));
  }
  return 0;
}

int cmd_reconstruct(const std::string& in_path, std::optional<double> lambda, const std::string& out) {
  const std::string text = read_text(in_path);
  std::istringstream t(text);
  const auto table = csv::read(t);
  std::istringstream s(text);
  const auto sweep = read_sweep_csv(s);
  // Carry the settings echo over; the sweep-specific lines are replaced by sigma2.
  std::vector<std::string> header;
  std::optional<double> file_lambda;
  std::optional<int> xi;
  for (const auto& line : table.metadata) {
    if (line.rfind("provenance ", 0) == 0 || line.rfind("failed ", 0) == 0) continue;
    header.push_back(line);
    if (line.rfind("lambda ", 0) == 0) file_lambda = std::stod(line.substr(7));
    if (line.rfind("xi ", 0) == 0) xi = std::stoi(line.substr(3));
  }
  if (!lambda) lambda = file_lambda;
  if (!lambda) throw Error(ErrorCode::invalid_spec, in_path + " has no lambda line; pass --lambda");
  if (xi) header.push_back("sigma2 " + csv::format_double(filter_sigma2(*lambda, *xi)));
  std::ostringstream r;
  write_reconstruction_csv(r, sweep, *lambda, header);
  write_text(out, r.str());
  return 0;
}

int cmd_run(const ExperimentSpec& spec, RunMode mode) {
  const auto report = run_experiment(spec, mode);
  if (report.contains("comparison")) {
    const auto& c = report.at("comparison");
    std::printf("max z = %.3f, max |dp| = %.5f, failed points %d: %s\n", c.at("max_z").get<double>(),
                c.at("max_abs_diff").get<double>(), c.at("failed_points").get<int>(),
                c.at("pass").get<bool>() ? "PASS" : "FAIL");
  }
  if (report.contains("jpo")) {
    const auto& j = report.at("jpo");
    std::printf("rotation angle %.6f rad, max |phase gap - pi| %.4f\n", j.at("rotation_angle").get<double>(),
                j.at("max_separation_error").get<double>());
  }
  std::printf("outputs in %s\n", spec.out_dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bias-controlled bistable oscillators: states, simulations, sweeps and reconstructions"};
  app.require_subcommand(1);

  auto* state = app.add_subcommand("state", "evaluate a state expression and write its X marginal");
  std::string expr, marginal = "q", state_out, state_json;
  int state_cutoff = kDefaultCutoff;
  state->add_option("--expr", expr, "state expression")->required();
  state->add_option("--cutoff", state_cutoff, "Fock-space cutoff");
  state->add_option("--marginal", marginal, "q or w")->check(CLI::IsMember({"q", "w"}));
  state->add_option("--out", state_out, "marginal CSV ('-' for stdout)");
  state->add_option("--json", state_json, "density matrix JSON");

  auto* simulate = app.add_subcommand("simulate", "run one ensemble at a single bias");
  SpecFlags sim_flags;
  sim_flags.attach(*simulate);
  double sim_b = 0.0;
  std::string sim_out, sim_path;
  int sim_thin = 10;
  simulate->add_option("--b", sim_b, "bias amplitude");
  simulate->add_option("--out", sim_out, "ensemble JSON");
  simulate->add_option("--path", sim_path, "CSV path of trajectory 0");
  simulate->add_option("--thin", sim_thin, "steps between path samples")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "p(b) over the bias grid");
  SpecFlags sweep_flags;
  sweep_flags.attach(*sweep);
  std::string method = "analytic", sweep_out;
  sweep->add_option("--method", method, "analytic or mc")->check(CLI::IsMember({"analytic", "mc"}));
  sweep->add_option("--out", sweep_out, "sweep CSV only ('-' for stdout); without it the sweep, reconstruction and report go to --out-dir");

  auto* reconstruct = app.add_subcommand("reconstruct", "smoothed X marginal from a sweep CSV");
  std::string rec_in, rec_out = "-";
  std::optional<double> rec_lambda;
  reconstruct->add_option("--in", rec_in, "sweep CSV")->required();
  reconstruct->add_option("--lambda", rec_lambda, "overrides the lambda recorded in the file");
  reconstruct->add_option("--out", rec_out, "reconstruction CSV ('-' for stdout)");

  auto* compare = app.add_subcommand("compare", "Monte Carlo against the closed form");
  SpecFlags compare_flags;
  compare_flags.attach(*compare);

  auto* jpo = app.add_subcommand("jpo", "JPO sweep with fixed-point geometry");
  SpecFlags jpo_flags;
  jpo_flags.attach(*jpo);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (state->parsed()) return cmd_state(expr, state_cutoff, marginal, state_out, state_json);
    if (simulate->parsed()) return cmd_simulate(sim_flags.build(), sim_b, sim_out, sim_path, sim_thin);
    if (sweep->parsed()) return cmd_sweep(sweep_flags.build(), method, sweep_out);
    if (reconstruct->parsed()) return cmd_reconstruct(rec_in, rec_lambda, rec_out);
    if (compare->parsed()) return cmd_run(compare_flags.build(), RunMode::compare);
    if (jpo->parsed()) return cmd_run(jpo_flags.build(), RunMode::jpo);
  } catch (const Error& e) {
    std::fprintf(stderr, "bistab: %s\n", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bistab: %s\n", e.what());
    return 2;
  }
  return 1;
}
