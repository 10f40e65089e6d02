#pragma once

// Bias sweeps, Monte Carlo vs closed-form cross-checks and JPO studies,
// driven by a single JSON experiment file:
//
//   {"state": "fock(5)", "lambda": 1.5, "g": 0.05, "kind": "opo", "xi": 1,
//    "b_grid": {"min": -3, "max": 3, "n": 41},
//    "sim": {"dt": 0.005, "t_max": 30, "n_traj": 10000, "seed": 1},
//    "cutoff": 32, "out_dir": "out"}
//
// Omitted fields take the defaults below.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bistab/analytics.hpp"
#include "bistab/dynamics.hpp"

namespace bistab {

struct BiasGrid {
  double min = -3.0;
  double max = 3.0;
  int n = 41;

  std::vector<double> values() const;
};

struct ExperimentSpec {
  std::string state = "fock(0)";
  int cutoff = kDefaultCutoff;
  double lambda = 1.5;
  double g = 0.05;
  Nonlinearity kind = Nonlinearity::opo;
  int xi = 1;
  BiasGrid b_grid;
  SimConfig sim;  // dt, t_max, n_traj, seed; repr follows xi
  std::filesystem::path out_dir = "out";

  OscillatorParams params(double b = 0.0) const;
  SimConfig sim_config() const;
  /// Checks every field; throws invalid-spec naming the offending one.
  void validate() const;
};

/// Missing sim fields default to SimConfig::defaults_for(lambda). Throws
/// invalid-spec on unknown keys, wrong types or invalid values.
ExperimentSpec spec_from_json(const nlohmann::json& doc);
nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec load_spec(const std::filesystem::path& path);
/// "key value" header lines echoing the experiment settings, written atop every CSV.
std::vector<std::string> spec_metadata(const ExperimentSpec& spec);

enum class SweepMethod { monte_carlo, analytic };

/// Analytic: closed form on the state's X marginal. Monte Carlo: one ensemble
/// per bias with params.b = b, all sharing the same initial samples and noise
/// streams. A failing bias is recorded in its point and the sweep continues.
BiasSweep bias_sweep(const ExperimentSpec& spec, SweepMethod method);

struct ComparisonPoint {
  double b = 0;
  double p_mc = 0;
  double se_mc = 0;
  double p_analytic = 0;
  double se_used = 0;  // max(se_mc, sqrt(p_analytic (1 - p_analytic) / n_resolved))
  double z = 0;        // |p_mc - p_analytic| / se_used
};

struct ComparisonReport {
  std::vector<ComparisonPoint> points;
  double max_z = 0;
  double max_abs_diff = 0;
  int failed_points = 0;
  bool pass = false;  // max_z <= 4 and no failed points
};

/// Point-by-point comparison of sweeps over the same b values.
ComparisonReport compare_sweeps(const BiasSweep& mc, const BiasSweep& analytic);
/// Runs both sweeps for the experiment. `analytic_xi` replaces the filter width of
/// the analytic side while keeping the simulated marginal, so a mismatch
/// serves as a negative control.
ComparisonReport compare_mc_analytic(const ExperimentSpec& spec, std::optional<int> analytic_xi = std::nullopt);

struct JpoReport {
  double lambda = 0;
  BiasSweep sweep;
  AttractorPair fixed_points;           // at b = 0
  double rotation_angle = 0;            // arg of the phase-0 fixed point, radians
  std::vector<double> phase_separation;  // per bias: circular-mean phase gap of the two clusters
  double max_separation_error = 0;      // max | separation - pi |
};

/// Monte Carlo sweep with kind forced to JPO, plus fixed-point geometry.
JpoReport jpo_sweep(const ExperimentSpec& spec);

/// Modulus of the stable fixed point: sqrt(lambda-1)/g for the unbiased OPO,
/// otherwise found numerically.
double steady_state_amplitude(const OscillatorParams& params);

/// Largest central-difference slope of p against the normalized bias
/// x = sqrt(2) b / (lambda - 1), i.e. the peak of the smoothed marginal
/// recovered from the sweep. In raw b units the slope also carries the gain
/// factor sqrt(2) / (lambda - 1), which grows as lambda drops.
double max_slope(const BiasSweep& sweep, double lambda);

/// Gap between the circular mean phases of the phase-0 and phase-pi
/// outcomes, in [0, pi].
double phase_cluster_separation(const EnsembleResult& result);

nlohmann::json to_json(const ComparisonReport& report);
nlohmann::json to_json(const JpoReport& report);

enum class RunMode { analytic, monte_carlo, compare, jpo };

/// Runs the experiment and writes sweep.csv, reconstruction.csv (when the
/// sweep supports one) and report.json into spec.out_dir. Output bytes depend
/// only on the experiment settings.
nlohmann::json run_experiment(const ExperimentSpec& spec, RunMode mode);

}  // namespace bistab
