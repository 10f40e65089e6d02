#include "bistab/analytics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>

#include "bistab/csv.hpp"
#include "bistab/error.hpp"

namespace bistab {

namespace {

constexpr double kCut = 8.0;  // Gaussian support in units of sigma

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// 8-point Gauss-Legendre on [-1, 1].
constexpr std::array<double, 8> kGlNodes{-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                                         -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                                         0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights{0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                                           0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

// Integral of marginal(y) * weight(y) over [lo, hi], split at grid nodes and
// into pieces no longer than max_piece so the weight is resolved.
template <class Weight>
double integrate_against(const Marginal& m, double lo, double hi, double max_piece, Weight&& weight) {
  lo = std::max(lo, m.x().front());
  hi = std::min(hi, m.x().back());
  if (!(hi > lo)) return 0.0;
  const auto& x = m.x();
  std::vector<double> breaks{lo};
  for (auto it = std::upper_bound(x.begin(), x.end(), lo); it != x.end() && *it < hi; ++it) breaks.push_back(*it);
  breaks.push_back(hi);
  double sum = 0;
  for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
    const double a = breaks[k];
    const double len = breaks[k + 1] - a;
    const int pieces = std::max(1, static_cast<int>(std::ceil(len / max_piece)));
    const double h = len / pieces;
    for (int j = 0; j < pieces; ++j) {
      const double mid = a + (j + 0.5) * h;
      for (int q = 0; q < 8; ++q) {
        const double y = mid + 0.5 * h * kGlNodes[q];
        sum += 0.5 * h * kGlWeights[q] * m.value_at(y) * weight(y);
      }
    }
  }
  return sum;
}

void require_sweep(const BiasSweep& sweep) {
  sweep.validate();
  if (sweep.points.size() < 9) {
    throw Error(ErrorCode::invalid_sweep, "reconstruction needs at least 9 sweep points");
  }
  for (const auto& pt : sweep.points) {
    if (!pt.ok()) {
      throw Error(ErrorCode::invalid_sweep, "sweep point b = " + csv::format_double(pt.b) + " failed: " + pt.error);
    }
  }
}

// Three-point derivative weights at node i of a non-uniform grid (second
// order; one-sided at the ends).
std::array<std::pair<std::size_t, double>, 3> derivative_stencil(const std::vector<double>& b, std::size_t i) {
  const std::size_t n = b.size();
  std::size_t k = i == 0 ? 0 : (i == n - 1 ? n - 3 : i - 1);
  const double x0 = b[k], x1 = b[k + 1], x2 = b[k + 2], x = b[i];
  // Derivatives of the Lagrange basis through (x0, x1, x2) evaluated at x.
  const double w0 = ((x - x1) + (x - x2)) / ((x0 - x1) * (x0 - x2));
  const double w1 = ((x - x0) + (x - x2)) / ((x1 - x0) * (x1 - x2));
  const double w2 = ((x - x0) + (x - x1)) / ((x2 - x0) * (x2 - x1));
  return {{{k, w0}, {k + 1, w1}, {k + 2, w2}}};
}

}  // namespace

std::string_view provenance_name(Provenance p) noexcept {
  return p == Provenance::analytic ? "analytic" : "MC";
}

std::vector<double> BiasSweep::b() const {
  std::vector<double> out;
  for (const auto& pt : points) out.push_back(pt.b);
  return out;
}

std::vector<double> BiasSweep::p() const {
  std::vector<double> out;
  for (const auto& pt : points) out.push_back(pt.p);
  return out;
}

void BiasSweep::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    if (!std::isfinite(pt.b) || (i > 0 && !(pt.b > points[i - 1].b))) {
      throw Error(ErrorCode::invalid_sweep, "bias values must be finite and strictly increasing");
    }
    if (!pt.ok()) continue;
    if (!(pt.p >= 0.0 && pt.p <= 1.0)) throw Error(ErrorCode::invalid_sweep, "probability outside [0, 1]");
    if (!(pt.se >= 0.0) || (provenance == Provenance::analytic && pt.se != 0.0)) {
      throw Error(ErrorCode::invalid_sweep, "bad standard error");
    }
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  if (n < 2 || !(hi > lo)) throw Error(ErrorCode::invalid_argument, "grid needs n >= 2 and max > min");
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = lo + (hi - lo) * i / (n - 1);
  out.back() = hi;
  return out;
}

double filter_sigma2(double lambda, int xi) {
  if (!(lambda > 1.0)) throw Error(ErrorCode::invalid_argument, "lambda must be > 1");
  if (xi < -1 || xi > 1) throw Error(ErrorCode::invalid_argument, "xi must be -1, 0 or +1");
  const double s2 = (1.0 + xi * (1.0 - lambda)) / (2.0 * (lambda - 1.0));
  if (s2 < 0) {
    throw Error(ErrorCode::deconvolution_regime_unsupported,
                "sigma^2 = " + csv::format_double(s2) + " < 0 (xi = +1 needs lambda <= 2)");
  }
  return s2;
}

double decision_boundary(double lambda, double b) { return -std::numbers::sqrt2 * b / (lambda - 1.0); }

Marginal smooth_marginal(const Marginal& marginal, double sigma2) {
  if (sigma2 < 0) throw Error(ErrorCode::deconvolution_regime_unsupported, "negative smoothing variance");
  if (sigma2 == 0) return marginal.normalized();
  const double sigma = std::sqrt(sigma2);
  const auto& x = marginal.x();
  const double h = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  const int pad = static_cast<int>(std::ceil(kCut * sigma / h));
  const int n = static_cast<int>(x.size()) + 2 * pad;
  const double lo = x.front() - pad * h;
  std::vector<double> xs(n), ys(n);
  const double norm = 1.0 / (sigma * std::sqrt(2 * std::numbers::pi));
  for (int i = 0; i < n; ++i) {
    xs[i] = lo + i * h;
    const double xi = xs[i];
    ys[i] = integrate_against(marginal, xi - kCut * sigma, xi + kCut * sigma, 0.25 * sigma, [&](double y) {
      const double z = (xi - y) / sigma;
      return norm * std::exp(-0.5 * z * z);
    });
  }
  return Marginal(std::move(xs), std::move(ys), marginal.repr()).normalized();
}

double analytic_probability(const Marginal& marginal, double lambda, int xi, double b) {
  const double s2 = filter_sigma2(lambda, xi);
  if (marginal.size() < 2) throw Error(ErrorCode::invalid_argument, "marginal needs at least two nodes");
  const double c = decision_boundary(lambda, b);
  const double total = marginal.upper_tail(-INFINITY);
  if (!(total > 0)) throw Error(ErrorCode::invalid_argument, "marginal has no mass");
  double p;
  if (s2 == 0) {
    p = marginal.upper_tail(c) / total;
  } else {
    // p = integral of m(y) Phi((y - c)/sigma) dy: Phi is 1 above c + 8 sigma
    // and negligible below c - 8 sigma.
    const double sigma = std::sqrt(s2);
    const double hi = c + kCut * sigma;
    p = marginal.upper_tail(hi) +
        integrate_against(marginal, c - kCut * sigma, hi, 0.25 * sigma,
                          [&](double y) { return normal_cdf((y - c) / sigma); });
    p /= total;
  }
  return std::clamp(p, 0.0, 1.0);
}

double analytic_probability_gaussian(double mean, double var, double lambda, int xi, double b) {
  if (!(var > 0)) throw Error(ErrorCode::invalid_argument, "variance must be > 0");
  const double s2 = filter_sigma2(lambda, xi);
  return normal_cdf((mean + std::numbers::sqrt2 * b / (lambda - 1.0)) / std::sqrt(var + s2));
}

BiasSweep analytic_sweep(const Marginal& marginal, double lambda, int xi, std::span<const double> bs) {
  BiasSweep sweep;
  sweep.provenance = Provenance::analytic;
  for (double b : bs) {
    SweepPoint pt;
    pt.b = b;
    pt.p = analytic_probability(marginal, lambda, xi, b);
    sweep.points.push_back(std::move(pt));
  }
  sweep.validate();
  return sweep;
}

Marginal reconstruct_marginal(const BiasSweep& sweep, double lambda) {
  if (!(lambda > 1.0)) throw Error(ErrorCode::invalid_argument, "lambda must be > 1");
  require_sweep(sweep);
  const auto b = sweep.b();
  const auto p = sweep.p();
  const std::size_t n = b.size();
  const double jac = (lambda - 1.0) / std::numbers::sqrt2;
  std::vector<double> xs(n), ds(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dp = 0;
    for (const auto& [k, w] : derivative_stencil(b, i)) dp += w * p[k];
    // x decreases with b; store in increasing-x order.
    xs[n - 1 - i] = decision_boundary(lambda, b[i]);
    ds[n - 1 - i] = jac * dp;
  }
  return Marginal(std::move(xs), std::move(ds), Representation::husimi_q).normalized();
}

std::vector<double> reconstruction_se(const BiasSweep& sweep, double lambda) {
  require_sweep(sweep);
  const auto b = sweep.b();
  const std::size_t n = b.size();
  const double jac = (lambda - 1.0) / std::numbers::sqrt2;
  // Same normalization as reconstruct_marginal.
  std::vector<double> raw_x(n), raw_d(n), se(n);
  for (std::size_t i = 0; i < n; ++i) {
    double dp = 0, var = 0;
    for (const auto& [k, w] : derivative_stencil(b, i)) {
      dp += w * sweep.points[k].p;
      var += w * w * sweep.points[k].se * sweep.points[k].se;
    }
    raw_x[n - 1 - i] = decision_boundary(lambda, b[i]);
    raw_d[n - 1 - i] = jac * dp;
    se[n - 1 - i] = jac * std::sqrt(var);
  }
  const double mass = Marginal(raw_x, raw_d, Representation::husimi_q).integral();
  for (double& s : se) s /= mass;
  return se;
}

double l1_distance(const Marginal& approx, const Marginal& reference) {
  const auto& x = approx.x();
  double sum = 0;
  constexpr int kSub = 8;
  for (std::size_t k = 0; k + 1 < x.size(); ++k) {
    const double h = (x[k + 1] - x[k]) / kSub;
    for (int j = 0; j <= kSub; ++j) {
      const double y = x[k] + j * h;
      const double w = (j == 0 || j == kSub) ? 0.5 : 1.0;
      sum += w * h * std::abs(approx.value_at(y) - reference.value_at(y));
    }
  }
  const double ref_total = reference.upper_tail(-INFINITY);
  const double outside = ref_total - (reference.upper_tail(x.front()) - reference.upper_tail(x.back()));
  return sum + std::max(outside, 0.0);
}

void write_sweep_csv(std::ostream& out, const BiasSweep& sweep, const std::vector<std::string>& header_lines) {
  std::vector<std::string> meta = header_lines;
  meta.push_back("provenance " + std::string(provenance_name(sweep.provenance)));
  for (const auto& pt : sweep.points) {
    if (!pt.ok()) meta.push_back("failed b=" + csv::format_double(pt.b) + ": " + pt.error);
  }
  const bool mc = sweep.provenance == Provenance::monte_carlo;
  std::vector<std::string> cols{"b", "p", "se"};
  if (mc) cols.insert(cols.end(), {"n1", "n0", "n_unresolved"});
  std::vector<std::vector<double>> rows;
  for (const auto& pt : sweep.points) {
    std::vector<double> row{pt.b, pt.ok() ? pt.p : std::nan(""), pt.ok() ? pt.se : std::nan("")};
    if (mc) row.insert(row.end(), {double(pt.n1), double(pt.n0), double(pt.n_unresolved)});
    rows.push_back(std::move(row));
  }
  csv::write(out, meta, cols, rows);
}

void write_reconstruction_csv(std::ostream& out, const BiasSweep& sweep, double lambda,
                              const std::vector<std::string>& header_lines) {
  const auto rec = reconstruct_marginal(sweep, lambda);
  const auto se = reconstruction_se(sweep, lambda);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < rec.size(); ++i) rows.push_back({rec.x()[i], rec.density()[i], se[i]});
  csv::write(out, header_lines, {"x", "density", "se"}, rows);
}

BiasSweep read_sweep_csv(std::istream& in) {
  const auto table = csv::read(in);
  BiasSweep sweep;
  sweep.provenance = Provenance::analytic;
  for (const auto& line : table.metadata) {
    if (line == "provenance MC") sweep.provenance = Provenance::monte_carlo;
  }
  const auto b = table.column_values("b");
  const auto p = table.column_values("p");
  const auto se = table.column_values("se");
  const bool counts = std::find(table.columns.begin(), table.columns.end(), "n1") != table.columns.end();
  for (std::size_t i = 0; i < b.size(); ++i) {
    SweepPoint pt;
    pt.b = b[i];
    pt.p = p[i];
    pt.se = se[i];
    if (counts) {
      pt.n1 = std::lround(table.rows[i][table.column("n1")]);
      pt.n0 = std::lround(table.rows[i][table.column("n0")]);
      pt.n_unresolved = std::lround(table.rows[i][table.column("n_unresolved")]);
    }
    if (std::isnan(pt.p)) pt.error = "failed";
    sweep.points.push_back(std::move(pt));
  }
  sweep.validate();
  return sweep;
}

}  // namespace bistab
