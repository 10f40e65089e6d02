#pragma once

// Closed-form steady-state probabilities of the linearized oscillator and
// their inverse. A trajectory starting at X0 settles in the phase-0 state when
// X0 + noise exceeds the decision boundary c = -sqrt(2) b/(lambda - 1); the
// accumulated noise is Gaussian with variance
//   sigma^2 = (1 + xi (1 - lambda)) / (2 (lambda - 1)).
// Hence p(b) = integral over x > c of (marginal * g_sigma)(x), and the
// derivative of p with respect to b recovers the smoothed marginal.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "bistab/states.hpp"

namespace bistab {

enum class Provenance { monte_carlo, analytic };
std::string_view provenance_name(Provenance p) noexcept;

struct SweepPoint {
  double b = 0;
  double p = 0;
  double se = 0;
  long n1 = 0;
  long n0 = 0;
  long n_unresolved = 0;
  std::string error;  // non-empty when this point failed

  bool ok() const noexcept { return error.empty(); }
};

struct BiasSweep {
  Provenance provenance = Provenance::analytic;
  std::vector<SweepPoint> points;

  std::vector<double> b() const;
  std::vector<double> p() const;
  /// Strictly increasing b, p in [0, 1] on successful points, se = 0 for
  /// analytic sweeps. Throws invalid-sweep.
  void validate() const;
};

/// n equally spaced values from lo to hi inclusive (n >= 2).
std::vector<double> linspace(double lo, double hi, int n);

/// Throws deconvolution-regime-unsupported when negative.
double filter_sigma2(double lambda, int xi);
double decision_boundary(double lambda, double b);

/// Marginal convolved with the zero-mean Gaussian of variance sigma2, by
/// direct quadrature on the marginal's grid padded by 8 sigma each side.
Marginal smooth_marginal(const Marginal& marginal, double sigma2);

/// Probability of the phase-0 outcome at bias b.
double analytic_probability(const Marginal& marginal, double lambda, int xi, double b);
/// Same for a Gaussian marginal: Phi((mean + sqrt(2) b/(lambda-1)) / sqrt(var + sigma^2)).
double analytic_probability_gaussian(double mean, double var, double lambda, int xi, double b);

BiasSweep analytic_sweep(const Marginal& marginal, double lambda, int xi, std::span<const double> bs);

/// Central differences of p(b) mapped to x = -sqrt(2) b/(lambda-1), reordered
/// so x increases and renormalized to unit mass. Needs >= 9 successful points
/// with strictly increasing b; throws invalid-sweep otherwise.
Marginal reconstruct_marginal(const BiasSweep& sweep, double lambda);
/// Standard error of each reconstructed density value (same order as
/// reconstruct_marginal), propagated from the sweep's se as if points were
/// independent.
std::vector<double> reconstruction_se(const BiasSweep& sweep, double lambda);

/// L1 distance between `approx` and `reference`: the integral of |approx - reference|
/// over approx's range plus the reference mass outside it.
double l1_distance(const Marginal& approx, const Marginal& reference);

/// Columns b,p,se (+ n1,n0,n_unresolved for Monte Carlo); failed points are
/// written with p = nan and listed in the header.
void write_sweep_csv(std::ostream& out, const BiasSweep& sweep,
                     const std::vector<std::string>& header_lines = {});
BiasSweep read_sweep_csv(std::istream& in);
/// Columns x, density, se of reconstruct_marginal and reconstruction_se.
void write_reconstruction_csv(std::ostream& out, const BiasSweep& sweep, double lambda,
                              const std::vector<std::string>& header_lines = {});

}  // namespace bistab
