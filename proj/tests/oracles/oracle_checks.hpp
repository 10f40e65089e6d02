#pragma once

// Library-side counterparts of the reference values in oracle_values.json,
// shared by the oracle unit test and the acceptance run.

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bistab/analytics.hpp"
#include "bistab/dynamics.hpp"
#include "bistab/error.hpp"
#include "bistab/rng.hpp"
#include "bistab/state_dsl.hpp"
#include "bistab/states.hpp"

namespace bistab::oracle {

inline constexpr double kRel = 1e-3;
inline constexpr double kZero = 1e-10;  // absolute floor for references that vanish

// Field value at a single phase-space point, evaluated on a grid with that point as a node.
inline double field_at(const QuantumState& s, Representation repr, double x, double y) {
  const PhaseGrid grid{{x, x + 2, 3}, {y, y + 2, 3}};
  const auto f = repr == Representation::wigner ? wigner(s, grid) : husimi_q(s, grid);
  return f.values(0, 0);
}

// Fine marginal grid with nodes at multiples of 0.05.
inline Marginal marginal(const char* expr, Representation repr = Representation::husimi_q) {
  return x_marginal(state_from_expr(expr, 40), repr, PhaseGrid{{-15, 15, 601}, {-15, 15, 601}});
}

inline double settle(double x0) {
  OscillatorParams p;
  p.lambda = 2;
  p.g = 0.1;
  SimConfig sim = SimConfig::defaults_for(2);
  CounterStream quiet;
  quiet.zero_noise = true;
  return evolve_trajectory(x0, p, sim, quiet).final_alpha.real();
}

inline AttractorPair jpo_roots(double lambda, double g) {
  OscillatorParams p;
  p.lambda = lambda;
  p.g = g;
  p.kind = Nonlinearity::jpo;
  return find_attractors(p);
}

inline double opo_root(double lambda, double g) {
  OscillatorParams p;
  p.lambda = lambda;
  p.g = g;
  return std::abs(find_attractors(p).phase_zero);
}

inline int count_extrema(const Marginal& m) {
  const auto& v = m.density();
  int n = 0;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    const double a = v[i] - v[i - 1];
    const double b = v[i + 1] - v[i];
    if (a * b < 0 || (a != 0 && b == 0 && i + 2 < v.size() && a * (v[i + 2] - v[i + 1]) < 0)) ++n;
  }
  return n;
}

inline double peak_x(const Marginal& m) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.x()[i] > 0 && m.density()[i] > m.density()[best]) best = i;
  }
  // Parabolic refinement through the neighbouring nodes.
  const double h = m.x()[1] - m.x()[0];
  const double l = m.density()[best - 1], c = m.density()[best], r = m.density()[best + 1];
  return m.x()[best] + 0.5 * h * (l - r) / (l - 2 * c + r);
}

inline double smoothed_cat(double lambda, double x) {
  return smooth_marginal(marginal("coh(1) + coh(-1)"), filter_sigma2(lambda, 1)).value_at(x);
}

/// Library computation for every reference name in oracle_values.json.
inline const std::map<std::string, std::function<double()>>& library_values() {
  static const std::map<std::string, std::function<double()>> values = {
      {"fock1_mean_n", [] { return make_fock(1, 32).mean_photon_number(); }},
      {"sq_0_05i_var_x", [] { return quadrature_moments(state_from_expr("sq(0, 0.5i)", 32)).var_x; }},
      {"sq_0_05i_var_y", [] { return quadrature_moments(state_from_expr("sq(0, 0.5i)", 32)).var_y; }},
      {"sq_0_05i_cov_xy", [] { return quadrature_moments(state_from_expr("sq(0, 0.5i)", 32)).cov_xy; }},
      {"sup_0_minus_1_mean_n", [] { return state_from_expr("fock(0) - fock(1)", 32).mean_photon_number(); }},
      {"displaced_vacuum_mean_x", [] { return quadrature_moments(displace(make_fock(0, 32), 0.5)).mean_x; }},
      {"q_vacuum_origin", [] { return field_at(make_fock(0, 32), Representation::husimi_q, 0, 0); }},
      {"q_fock1_at_1_05", [] { return field_at(make_fock(1, 32), Representation::husimi_q, 1.0, 0.5); }},
      {"w_vacuum_origin", [] { return field_at(make_fock(0, 32), Representation::wigner, 0, 0); }},
      {"w_fock1_origin", [] { return field_at(make_fock(1, 32), Representation::wigner, 0, 0); }},
      {"w_fock2_at_05_03", [] { return field_at(make_fock(2, 32), Representation::wigner, 0.5, 0.3); }},
      {"qm_vacuum_0", [] { return marginal("fock(0)").value_at(0); }},
      {"qm_fock1_0", [] { return marginal("fock(1)").value_at(0); }},
      {"qm_fock1_13", [] { return marginal("fock(1)").value_at(1.3); }},
      {"qm_fock5_0", [] { return marginal("fock(5)").value_at(0); }},
      {"qm_vacuum_variance", [] { return marginal("fock(0)").variance(); }},
      {"qm_fock5_extrema", [] { return double(count_extrema(marginal("fock(5)"))); }},
      {"qm_fock5_peak_x", [] { return peak_x(marginal("fock(5)")); }},
      {"cat1_odd_population",
       [] {
         const auto s = state_from_expr("coh(1) + coh(-1)", 32);
         double odd = 0;
         for (int n = 1; n < s.cutoff(); n += 2) odd += s.rho()(n, n).real();
         return odd;
       }},
      {"opo_root_2_01", [] { return opo_root(2, 0.1); }},
      {"opo_root_15_005", [] { return opo_root(1.5, 0.05); }},
      {"jpo_drift_10_re", [] { return drift(10.0, {2, 0.1, 0, Nonlinearity::jpo}).real(); }},
      {"jpo_drift_10_im", [] { return drift(10.0, {2, 0.1, 0, Nonlinearity::jpo}).imag(); }},
      {"jpo_root_2_01_abs", [] { return std::abs(jpo_roots(2, 0.1).phase_zero); }},
      {"jpo_root_2_01_arg", [] { return std::arg(jpo_roots(2, 0.1).phase_zero); }},
      {"jpo_root_2_01_antipodal",
       [] {
         const auto r = jpo_roots(2, 0.1);
         return std::abs(r.phase_zero + r.phase_pi);
       }},
      {"jpo_root_15_01_abs", [] { return std::abs(jpo_roots(1.5, 0.1).phase_zero); }},
      {"jpo_root_15_01_arg", [] { return std::arg(jpo_roots(1.5, 0.1).phase_zero); }},
      {"jpo_root_15_01_antipodal",
       [] {
         const auto r = jpo_roots(1.5, 0.1);
         return std::abs(r.phase_zero + r.phase_pi);
       }},
      {"ode_settle_plus", [] { return settle(50.0); }},
      {"ode_settle_minus", [] { return settle(-0.1); }},
      {"p_vacuum_q_l2_b05", [] { return analytic_probability(marginal("fock(0)"), 2, 1, 0.5); }},
      {"phi_sqrt2_05", [] { return analytic_probability_gaussian(0, 1, 2, 1, 0.5); }},
      {"p_vacuum_w_l15_b03",
       [] { return analytic_probability(marginal("fock(0)", Representation::wigner), 1.5, 0, 0.3); }},
      {"phi_05", [] { return analytic_probability_gaussian(0.5, 1, 2, 1, 0); }},
      {"p_fock1_l15_b02", [] { return analytic_probability(marginal("fock(1)"), 1.5, 1, 0.2); }},
      {"p_fock1_l12_bm03", [] { return analytic_probability(marginal("fock(1)"), 1.2, 1, -0.3); }},
      {"p_cat1_l15_b01", [] { return analytic_probability(marginal("coh(1) + coh(-1)"), 1.5, 1, 0.1); }},
      {"p_fock5_l2_b04", [] { return analytic_probability(marginal("fock(5)"), 2, 1, 0.4); }},
      {"smoothed_cat1_l15_x0", [] { return smoothed_cat(1.5, 0.0); }},
      {"smoothed_cat1_l15_x15", [] { return smoothed_cat(1.5, 1.5); }},
      {"smoothed_cat1_l12_x0", [] { return smoothed_cat(1.2, 0.0); }},
      {"smoothed_cat1_l12_x15", [] { return smoothed_cat(1.2, 1.5); }},
  };
  return values;
}

struct OracleResult {
  std::string name;
  double reference = 0;
  double library = 0;
  bool ok = false;
};

inline nlohmann::json load_references(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path);
  return nlohmann::json::parse(in);
}

/// Compares every reference with its library value at kRel relative tolerance
/// (kZero absolute for vanishing references). A reference without a library
/// counterpart, or the reverse, is a failed entry.
inline std::vector<OracleResult> check_references(const nlohmann::json& refs) {
  std::vector<OracleResult> out;
  for (const auto& [name, compute] : library_values()) {
    OracleResult r{name};
    if (refs.contains(name)) {
      r.reference = refs.at(name).at("value").get<double>();
      r.library = compute();
      r.ok = std::abs(r.library - r.reference) <= std::max(kRel * std::abs(r.reference), kZero);
    }
    out.push_back(r);
  }
  for (const auto& [name, _] : refs.items()) {
    if (!library_values().count(name)) out.push_back({name});
  }
  return out;
}

}  // namespace bistab::oracle
