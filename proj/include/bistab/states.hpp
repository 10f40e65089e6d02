#pragma once

// Quantum initial states in a truncated Fock basis and their phase-space
// representations.
//
// Conventions: quadratures X, Y with alpha = (X + iY)/sqrt(2). Vacuum has
// Var(X) = 1/2 in the Wigner function and Var(X) = 1 in the Husimi Q
// function. Phase-space fields are stored as densities per unit X*Y, i.e. the
// Jacobian 1/2 of the alpha-plane is folded in, so a field integrates to 1
// over dX dY.

#include <complex>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "bistab/rng.hpp"

namespace bistab {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr int kDefaultCutoff = 32;
inline constexpr int kDefaultGridPoints = 401;

/// Quasiprobability representation, tagged by the xi of the quadrature SDEs.
enum class Representation : int { husimi_q = 1, wigner = 0, glauber_p = -1 };

inline int xi_of(Representation r) noexcept { return static_cast<int>(r); }
/// Accepts xi in {+1, 0, -1}; anything else is invalid-argument.
Representation representation_from_xi(int xi);
std::string_view representation_name(Representation r) noexcept;

/// Density matrix in a truncated Fock basis. Immutable; every instance
/// satisfies trace = 1, Hermiticity, PSD and the cutoff-tail bound.
class QuantumState {
 public:
  /// Validates the invariants; throws invalid-argument or cutoff-too-small.
  static QuantumState from_density(CMatrix rho);
  /// Normalizes psi, then validates; the ket is retained so superpositions
  /// keep their relative phases.
  static QuantumState from_ket(CVector psi);

  int cutoff() const noexcept { return static_cast<int>(rho_.rows()); }
  const CMatrix& rho() const noexcept { return rho_; }
  const std::optional<CVector>& ket() const noexcept { return ket_; }

  /// Largest eigenvalue >= 1 - tol.
  bool is_pure(double tol = 1e-8) const;
  /// The stored ket, or the principal eigenvector with its largest component
  /// made real-positive. Throws not-pure for mixed states.
  CVector pure_ket() const;

  cplx expect(const CMatrix& op) const;
  double mean_photon_number() const;
  double purity() const;

 private:
  QuantumState(CMatrix rho, std::optional<CVector> ket) : rho_(std::move(rho)), ket_(std::move(ket)) {}

  CMatrix rho_;
  std::optional<CVector> ket_;
};

/// Truncated ladder operators of dimension n.
CMatrix annihilation(int n);
CMatrix creation(int n);

/// Symmetrically ordered (Wigner) first and second quadrature moments.
struct QuadratureMoments {
  double mean_x = 0, mean_y = 0;
  double var_x = 0, var_y = 0, cov_xy = 0;
};
QuadratureMoments quadrature_moments(const QuantumState& state);

/// Population of the top 10% of Fock levels (at least one level).
double tail_population(const CMatrix& rho);

QuantumState make_fock(int n, int cutoff = kDefaultCutoff);
QuantumState make_coherent(cplx amp, int cutoff = kDefaultCutoff);
/// D(amp) S(squeeze) |0>, with S(z) = exp((z* a^2 - z a^dag^2)/2).
QuantumState make_squeezed_coherent(cplx amp, cplx squeeze, int cutoff = kDefaultCutoff);
/// Normalized weighted sum of the states' kets. All inputs must be pure and
/// share one cutoff.
QuantumState superpose(std::span<const QuantumState> states, std::span<const cplx> weights);
/// D(beta) rho D(beta)^dag for real beta: shifts X by sqrt(2)*beta.
QuantumState displace(const QuantumState& state, double beta);

/// Uniform grid of n points from lo to hi inclusive.
struct Grid1D {
  double lo = -1;
  double hi = 1;
  int n = 2;

  double step() const noexcept { return (hi - lo) / (n - 1); }
  double at(int i) const noexcept { return lo + step() * i; }
  std::vector<double> points() const;
  void validate() const;
};

struct PhaseGrid {
  Grid1D x;
  Grid1D y;

  /// 401 x 401 points over +-(2 sqrt(2N) + 2).
  static PhaseGrid default_for(int cutoff);
};

struct PhaseSpaceField {
  Grid1D x;
  Grid1D y;
  Representation repr = Representation::husimi_q;
  Eigen::MatrixXd values;  // values(iy, ix)

  /// Trapezoidal integral over the grid.
  double integral() const;
};

/// Tabulated 1-D density over the X quadrature. The x grid is strictly
/// increasing; it is uniform for marginals computed from fields.
class Marginal {
 public:
  Marginal() = default;
  Marginal(std::vector<double> x, std::vector<double> density, Representation repr);

  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& density() const noexcept { return density_; }
  Representation repr() const noexcept { return repr_; }
  std::size_t size() const noexcept { return x_.size(); }

  double integral() const;
  double mean() const;
  double variance() const;
  /// Piecewise-cubic Hermite interpolant (central-difference slopes); zero
  /// outside the grid.
  double value_at(double x) const;
  /// Exact integral of the interpolant from `from` to +infinity.
  double upper_tail(double from) const;
  /// Copy rescaled to unit trapezoidal mass.
  Marginal normalized() const;
  /// Cumulative trapezoidal mass at each grid node.
  std::vector<double> cdf_nodes() const;

 private:
  double slope(std::size_t i) const;

  std::vector<double> x_;
  std::vector<double> density_;
  Representation repr_ = Representation::husimi_q;
};

PhaseSpaceField husimi_q(const QuantumState& state);
PhaseSpaceField husimi_q(const QuantumState& state, const PhaseGrid& grid);
PhaseSpaceField wigner(const QuantumState& state);
PhaseSpaceField wigner(const QuantumState& state, const PhaseGrid& grid);

/// Integrates the field along Y and renormalizes. xi = -1 is rejected with
/// unsupported-representation.
Marginal x_marginal(const QuantumState& state, Representation repr);
Marginal x_marginal(const QuantumState& state, Representation repr, const PhaseGrid& grid);
Marginal x_marginal(const PhaseSpaceField& field);

/// Draws phase-space points from a tabulated Q field: inverse CDF on the X
/// marginal, then inverse CDF on Y in the column nearest the drawn X.
class PhaseSpaceSampler {
 public:
  explicit PhaseSpaceSampler(const PhaseSpaceField& q_field);

  /// Consumes block 0 of the stream.
  cplx sample(const CounterStream& stream) const;
  double x_cdf(double x) const;

 private:
  static double invert(const std::vector<double>& cdf, double lo, double step, double u);

  Grid1D x_;
  Grid1D y_;
  std::vector<double> x_cdf_;                 // normalized, size nx
  std::vector<std::vector<double>> y_cdfs_;  // per x column, normalized
};

/// `count` samples of alpha from the Q function. Sample j uses the stream
/// (seed, j, initial_state), so the same seed always yields the same list.
std::vector<cplx> sample_phase_space(const QuantumState& state, Representation repr, int count,
                                     std::uint64_t seed);

// Serialization.
nlohmann::json state_to_json(const QuantumState& state);
QuantumState state_from_json(const nlohmann::json& doc);
void write_marginal_csv(std::ostream& out, const Marginal& marginal,
                        const std::vector<std::string>& header_lines = {});
Marginal read_marginal_csv(std::istream& in, Representation repr = Representation::husimi_q);

}  // namespace bistab
