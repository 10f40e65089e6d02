#include "bistab/states.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "bistab/csv.hpp"
#include "bistab/error.hpp"

namespace bistab {

namespace {

constexpr double kTraceTol = 1e-10;
constexpr double kHermitianTol = 1e-10;
constexpr double kEigenFloor = -1e-9;
constexpr double kTailBound = 1e-6;
constexpr double kMaxSqueeze = 1.5;

// Extra Fock levels used when building D and S by matrix exponentials; the
// result is projected back to the requested cutoff.
int working_dim(int cutoff) { return 2 * cutoff + 16; }

void require_cutoff(int cutoff) {
  if (cutoff < 2) throw Error(ErrorCode::invalid_argument, "cutoff must be >= 2");
}

void require_tail(const CMatrix& rho, const char* what) {
  const double tail = tail_population(rho);
  if (tail > kTailBound) {
    throw Error(ErrorCode::cutoff_too_small,
                std::string(what) + ": population " + std::to_string(tail) +
                    " in the top 10% of Fock levels exceeds 1e-6; raise the cutoff");
  }
}

CMatrix embed(const CMatrix& m, int dim) {
  CMatrix out = CMatrix::Zero(dim, dim);
  out.topLeftCorner(m.rows(), m.cols()) = m;
  return out;
}

CMatrix displacement(cplx beta, int dim) {
  const CMatrix a = annihilation(dim);
  const CMatrix gen = beta * a.adjoint() - std::conj(beta) * a;
  return gen.exp();
}

CMatrix squeezing(cplx z, int dim) {
  const CMatrix a = annihilation(dim);
  const CMatrix a2 = a * a;
  const CMatrix gen = 0.5 * (std::conj(z) * a2 - z * a2.adjoint());
  return gen.exp();
}

// Projects a working-space ket onto the first `cutoff` levels.
CVector project_ket(const CVector& psi, int cutoff, const char* what) {
  const double lost = psi.tail(psi.size() - cutoff).squaredNorm() / psi.squaredNorm();
  if (lost > kTailBound) {
    throw Error(ErrorCode::cutoff_too_small,
                std::string(what) + ": " + std::to_string(lost) +
                    " of the norm lies above the cutoff");
  }
  return psi.head(cutoff);
}

// Coherent-state overlaps <n|alpha> for n < dim.
void coherent_amplitudes(cplx alpha, Eigen::Ref<CVector> out) {
  out(0) = std::exp(-0.5 * std::norm(alpha));
  for (Eigen::Index n = 1; n < out.size(); ++n) {
    out(n) = out(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  }
}

double trapezoid_weight(int i, int n) { return (i == 0 || i == n - 1) ? 0.5 : 1.0; }

}  // namespace

Representation representation_from_xi(int xi) {
  switch (xi) {
    case 1: return Representation::husimi_q;
    case 0: return Representation::wigner;
    case -1: return Representation::glauber_p;
    default:
      throw Error(ErrorCode::invalid_argument,
                  "representation xi must be +1, 0 or -1, got " + std::to_string(xi));
  }
}

std::string_view representation_name(Representation r) noexcept {
  switch (r) {
    case Representation::husimi_q: return "husimi-q";
    case Representation::wigner: return "wigner";
    case Representation::glauber_p: return "glauber-p";
  }
  return "unknown";
}

CMatrix annihilation(int n) {
  CMatrix a = CMatrix::Zero(n, n);
  for (int k = 1; k < n; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
  return a;
}

CMatrix creation(int n) { return annihilation(n).adjoint(); }

double tail_population(const CMatrix& rho) {
  const auto n = static_cast<int>(rho.rows());
  const int top = std::max(1, (n + 9) / 10);
  double pop = 0;
  for (int k = n - top; k < n; ++k) pop += rho(k, k).real();
  return pop;
}

// ---------------------------------------------------------------------------
// QuantumState

QuantumState QuantumState::from_density(CMatrix rho) {
  if (rho.rows() != rho.cols()) throw Error(ErrorCode::invalid_argument, "rho must be square");
  require_cutoff(static_cast<int>(rho.rows()));
  if (!rho.allFinite()) throw Error(ErrorCode::invalid_argument, "rho has non-finite entries");
  const cplx tr = rho.trace();
  if (std::abs(tr - 1.0) > kTraceTol) {
    throw Error(ErrorCode::invalid_argument,
                "trace(rho) = " + std::to_string(tr.real()) + " is not 1");
  }
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kHermitianTol) {
    throw Error(ErrorCode::invalid_argument, "rho is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < kEigenFloor) {
    throw Error(ErrorCode::invalid_argument, "rho has a negative eigenvalue");
  }
  require_tail(rho, "density matrix");
  return QuantumState(std::move(rho), std::nullopt);
}

QuantumState QuantumState::from_ket(CVector psi) {
  require_cutoff(static_cast<int>(psi.size()));
  if (!psi.allFinite()) throw Error(ErrorCode::invalid_argument, "ket has non-finite entries");
  const double norm = psi.norm();
  if (norm < 1e-12) throw Error(ErrorCode::degenerate_superposition, "ket has zero norm");
  psi /= norm;
  CMatrix rho = psi * psi.adjoint();
  require_tail(rho, "state");
  return QuantumState(std::move(rho), std::move(psi));
}

bool QuantumState::is_pure(double tol) const {
  if (ket_) return true;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho_, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff() >= 1.0 - tol;
}

CVector QuantumState::pure_ket() const {
  if (ket_) return *ket_;
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(rho_);
  const auto& vals = eig.eigenvalues();
  if (vals(vals.size() - 1) < 1.0 - 1e-8) {
    throw Error(ErrorCode::not_pure, "state is mixed (largest eigenvalue " +
                                         std::to_string(vals(vals.size() - 1)) + ")");
  }
  CVector v = eig.eigenvectors().col(vals.size() - 1);
  Eigen::Index big = 0;
  v.cwiseAbs().maxCoeff(&big);
  v *= std::conj(v(big)) / std::abs(v(big));
  return v;
}

cplx QuantumState::expect(const CMatrix& op) const { return (rho_ * op).trace(); }

double QuantumState::mean_photon_number() const {
  double n = 0;
  for (int k = 0; k < cutoff(); ++k) n += k * rho_(k, k).real();
  return n;
}

double QuantumState::purity() const { return (rho_ * rho_).trace().real(); }

QuadratureMoments quadrature_moments(const QuantumState& state) {
  // Two spare levels make X^2, XY exact on the truncated support.
  const int dim = state.cutoff() + 2;
  const CMatrix rho = embed(state.rho(), dim);
  const CMatrix a = annihilation(dim);
  const CMatrix x = (a + a.adjoint()) / std::numbers::sqrt2;
  const CMatrix y = (a - a.adjoint()) / cplx(0, std::numbers::sqrt2);
  auto ev = [&](const CMatrix& op) { return (rho * op).trace().real(); };
  QuadratureMoments m;
  m.mean_x = ev(x);
  m.mean_y = ev(y);
  m.var_x = ev(x * x) - m.mean_x * m.mean_x;
  m.var_y = ev(y * y) - m.mean_y * m.mean_y;
  m.cov_xy = 0.5 * ev(x * y + y * x) - m.mean_x * m.mean_y;
  return m;
}

// ---------------------------------------------------------------------------
// Constructors

QuantumState make_fock(int n, int cutoff) {
  require_cutoff(cutoff);
  if (n < 0 || n >= cutoff) {
    throw Error(ErrorCode::invalid_argument, "Fock index " + std::to_string(n) +
                                                 " outside basis of dimension " +
                                                 std::to_string(cutoff));
  }
  CVector psi = CVector::Zero(cutoff);
  psi(n) = 1.0;
  return QuantumState::from_ket(std::move(psi));
}

QuantumState make_coherent(cplx amp, int cutoff) {
  require_cutoff(cutoff);
  if (std::norm(amp) > cutoff / 4.0) {
    throw Error(ErrorCode::cutoff_too_small, "|amp|^2 = " + std::to_string(std::norm(amp)) +
                                                 " exceeds cutoff/4 = " +
                                                 std::to_string(cutoff / 4.0));
  }
  CVector psi(cutoff);
  coherent_amplitudes(amp, psi);
  return QuantumState::from_ket(std::move(psi));
}

QuantumState make_squeezed_coherent(cplx amp, cplx squeeze, int cutoff) {
  require_cutoff(cutoff);
  if (std::abs(squeeze) > kMaxSqueeze) {
    throw Error(ErrorCode::invalid_argument, "|squeeze| must be <= 1.5");
  }
  if (std::norm(amp) > cutoff / 4.0) {
    throw Error(ErrorCode::cutoff_too_small, "|amp|^2 = " + std::to_string(std::norm(amp)) +
                                                 " exceeds cutoff/4 = " +
                                                 std::to_string(cutoff / 4.0));
  }
  const int dim = working_dim(cutoff);
  CVector vac = CVector::Zero(dim);
  vac(0) = 1.0;
  CVector psi = squeezing(squeeze, dim) * vac;
  if (amp != cplx(0)) psi = displacement(amp, dim) * psi;
  return QuantumState::from_ket(project_ket(psi, cutoff, "squeezed coherent state"));
}

QuantumState superpose(std::span<const QuantumState> states, std::span<const cplx> weights) {
  if (states.empty()) throw Error(ErrorCode::invalid_argument, "no states to superpose");
  if (states.size() != weights.size()) {
    throw Error(ErrorCode::invalid_argument, "states and weights differ in length");
  }
  const int cutoff = states.front().cutoff();
  CVector sum = CVector::Zero(cutoff);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].cutoff() != cutoff) {
      throw Error(ErrorCode::invalid_argument, "states have different cutoffs");
    }
    if (!states[i].is_pure()) {
      throw Error(ErrorCode::not_pure, "superposition input " + std::to_string(i) + " is mixed");
    }
    sum += weights[i] * states[i].pure_ket();
  }
  if (sum.norm() < 1e-12) {
    throw Error(ErrorCode::degenerate_superposition, "weighted sum of kets vanishes");
  }
  return QuantumState::from_ket(std::move(sum));
}

QuantumState displace(const QuantumState& state, double beta) {
  if (beta == 0.0) return state;
  const int cutoff = state.cutoff();
  const int dim = working_dim(cutoff);
  const CMatrix d = displacement(beta, dim);
  if (state.ket()) {
    CVector psi = CVector::Zero(dim);
    psi.head(cutoff) = *state.ket();
    return QuantumState::from_ket(project_ket(d * psi, cutoff, "displaced state"));
  }
  const CMatrix full = d * embed(state.rho(), dim) * d.adjoint();
  const double kept = full.topLeftCorner(cutoff, cutoff).trace().real();
  if (1.0 - kept > kTailBound) {
    throw Error(ErrorCode::cutoff_too_small, "displacement pushes population above the cutoff");
  }
  CMatrix rho = full.topLeftCorner(cutoff, cutoff) / kept;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  return QuantumState::from_density(std::move(rho));
}

// ---------------------------------------------------------------------------
// Grids and fields

std::vector<double> Grid1D::points() const {
  std::vector<double> out(n);
  for (int i = 0; i < n; ++i) out[i] = at(i);
  return out;
}

void Grid1D::validate() const {
  if (n < 3 || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error(ErrorCode::invalid_argument, "grid needs n >= 3 points and finite lo < hi");
  }
}

PhaseGrid PhaseGrid::default_for(int cutoff) {
  const double extent = 2.0 * std::sqrt(2.0 * cutoff) + 2.0;
  const Grid1D g{-extent, extent, kDefaultGridPoints};
  return {g, g};
}

double PhaseSpaceField::integral() const {
  double sum = 0;
  for (int iy = 0; iy < y.n; ++iy) {
    for (int ix = 0; ix < x.n; ++ix) {
      sum += trapezoid_weight(ix, x.n) * trapezoid_weight(iy, y.n) * values(iy, ix);
    }
  }
  return sum * x.step() * y.step();
}

PhaseSpaceField husimi_q(const QuantumState& state) {
  return husimi_q(state, PhaseGrid::default_for(state.cutoff()));
}

PhaseSpaceField husimi_q(const QuantumState& state, const PhaseGrid& grid) {
  grid.x.validate();
  grid.y.validate();
  const int n = state.cutoff();
  PhaseSpaceField field{grid.x, grid.y, Representation::husimi_q,
                        Eigen::MatrixXd(grid.y.n, grid.x.n)};
  CMatrix overlaps(n, grid.x.n);  // column j: <k|alpha_j>
  const double norm = 1.0 / (2.0 * std::numbers::pi);
  for (int iy = 0; iy < grid.y.n; ++iy) {
    const double y = grid.y.at(iy);
    for (int ix = 0; ix < grid.x.n; ++ix) {
      coherent_amplitudes(cplx(grid.x.at(ix), y) / std::numbers::sqrt2, overlaps.col(ix));
    }
    if (state.ket()) {
      // <alpha|psi> = sum_k conj(<k|alpha>) psi_k
      const CVector amps = overlaps.adjoint() * *state.ket();
      field.values.row(iy) = amps.cwiseAbs2().transpose() * norm;
    } else {
      const CMatrix rho_c = state.rho() * overlaps;
      for (int ix = 0; ix < grid.x.n; ++ix) {
        const double q = overlaps.col(ix).dot(rho_c.col(ix)).real();
        field.values(iy, ix) = std::max(q, 0.0) * norm;
      }
    }
  }
  return field;
}

PhaseSpaceField wigner(const QuantumState& state) {
  return wigner(state, PhaseGrid::default_for(state.cutoff()));
}

PhaseSpaceField wigner(const QuantumState& state, const PhaseGrid& grid) {
  grid.x.validate();
  grid.y.validate();
  const int n = state.cutoff();
  const CMatrix& rho = state.rho();
  PhaseSpaceField field{grid.x, grid.y, Representation::wigner,
                        Eigen::MatrixXd(grid.y.n, grid.x.n)};
  // Laguerre recurrence for the Wigner functions of |m><k| evaluated along one
  // grid row at a time; w[k] holds the current W_{m,k}.
  std::vector<Eigen::ArrayXcd> w(n, Eigen::ArrayXcd(grid.x.n));
  Eigen::ArrayXcd a(grid.x.n);
  Eigen::ArrayXd total(grid.x.n);
  for (int iy = 0; iy < grid.y.n; ++iy) {
    const double y = grid.y.at(iy);
    for (int ix = 0; ix < grid.x.n; ++ix) a(ix) = cplx(grid.x.at(ix), y) / std::numbers::sqrt2;
    const Eigen::ArrayXcd a2 = 2.0 * a;
    const Eigen::ArrayXcd a2c = a2.conjugate();
    w[0] = (-2.0 * a.abs2()).exp() / std::numbers::pi;
    total = rho(0, 0).real() * w[0].real();
    for (int k = 1; k < n; ++k) {
      w[k] = a2 * w[k - 1] / std::sqrt(static_cast<double>(k));
      total += 2.0 * (rho(0, k) * w[k]).real();
    }
    for (int m = 1; m < n; ++m) {
      const double sm = std::sqrt(static_cast<double>(m));
      Eigen::ArrayXcd prev_row = w[m];
      w[m] = (a2c * prev_row - sm * w[m - 1]) / sm;
      total += rho(m, m).real() * w[m].real();
      for (int k = m + 1; k < n; ++k) {
        Eigen::ArrayXcd next = (a2 * w[k - 1] - sm * prev_row) / std::sqrt(static_cast<double>(k));
        prev_row = w[k];
        w[k] = std::move(next);
        total += 2.0 * (rho(m, k) * w[k]).real();
      }
    }
    field.values.row(iy) = total.matrix().transpose();
  }
  return field;
}

// ---------------------------------------------------------------------------
// Marginals

Marginal::Marginal(std::vector<double> x, std::vector<double> density, Representation repr)
    : x_(std::move(x)), density_(std::move(density)), repr_(repr) {
  if (x_.size() != density_.size() || x_.size() < 2) {
    throw Error(ErrorCode::invalid_argument, "marginal needs >= 2 matching x/density values");
  }
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) {
      throw Error(ErrorCode::invalid_argument, "marginal grid must be strictly increasing");
    }
  }
  for (double d : density_) {
    if (!std::isfinite(d)) throw Error(ErrorCode::invalid_argument, "marginal is not finite");
  }
}

double Marginal::integral() const {
  double sum = 0;
  for (std::size_t i = 1; i < x_.size(); ++i) {
    sum += 0.5 * (density_[i] + density_[i - 1]) * (x_[i] - x_[i - 1]);
  }
  return sum;
}

double Marginal::mean() const {
  double sum = 0;
  for (std::size_t i = 1; i < x_.size(); ++i) {
    sum += 0.5 * (density_[i] * x_[i] + density_[i - 1] * x_[i - 1]) * (x_[i] - x_[i - 1]);
  }
  return sum / integral();
}

double Marginal::variance() const {
  const double mu = mean();
  double sum = 0;
  for (std::size_t i = 1; i < x_.size(); ++i) {
    const double a = x_[i - 1] - mu;
    const double b = x_[i] - mu;
    sum += 0.5 * (density_[i] * b * b + density_[i - 1] * a * a) * (x_[i] - x_[i - 1]);
  }
  return sum / integral();
}

double Marginal::slope(std::size_t i) const {
  const std::size_t last = x_.size() - 1;
  if (i == 0) return (density_[1] - density_[0]) / (x_[1] - x_[0]);
  if (i == last) return (density_[last] - density_[last - 1]) / (x_[last] - x_[last - 1]);
  return (density_[i + 1] - density_[i - 1]) / (x_[i + 1] - x_[i - 1]);
}

double Marginal::value_at(double x) const {
  if (x < x_.front() || x > x_.back()) return 0.0;
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - x_.begin(), 1), x_.size() - 1) - 1;
  const double h = x_[k + 1] - x_[k];
  const double t = (x - x_[k]) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * density_[k] + (t3 - 2 * t2 + t) * h * slope(k) +
         (-2 * t3 + 3 * t2) * density_[k + 1] + (t3 - t2) * h * slope(k + 1);
}

double Marginal::upper_tail(double from) const {
  const std::size_t last = x_.size() - 1;
  if (from >= x_.back()) return 0.0;
  double sum = 0;
  std::size_t first_full = 0;
  if (from > x_.front()) {
    auto it = std::upper_bound(x_.begin(), x_.end(), from);
    const std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (from - x_[k]) / h;
    // Antiderivatives of the Hermite basis, evaluated at 1 minus at t.
    auto span = [t](auto&& f) { return f(1.0) - f(t); };
    const double i00 = span([](double s) { return s * s * s * s / 2 - s * s * s + s; });
    const double i10 = span([](double s) { return s * s * s * s / 4 - 2 * s * s * s / 3 + s * s / 2; });
    const double i01 = span([](double s) { return -s * s * s * s / 2 + s * s * s; });
    const double i11 = span([](double s) { return s * s * s * s / 4 - s * s * s / 3; });
    sum += h * (i00 * density_[k] + i10 * h * slope(k) + i01 * density_[k + 1] +
                i11 * h * slope(k + 1));
    first_full = k + 1;
  }
  for (std::size_t k = first_full; k < last; ++k) {
    const double h = x_[k + 1] - x_[k];
    sum += 0.5 * h * (density_[k] + density_[k + 1]) + h * h * (slope(k) - slope(k + 1)) / 12.0;
  }
  return sum;
}

Marginal Marginal::normalized() const {
  const double mass = integral();
  if (!(mass > 0)) throw Error(ErrorCode::invalid_argument, "marginal has no positive mass");
  std::vector<double> d(density_);
  for (double& v : d) v /= mass;
  return Marginal(x_, std::move(d), repr_);
}

std::vector<double> Marginal::cdf_nodes() const {
  std::vector<double> cdf(x_.size(), 0.0);
  for (std::size_t i = 1; i < x_.size(); ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (density_[i] + density_[i - 1]) * (x_[i] - x_[i - 1]);
  }
  return cdf;
}

Marginal x_marginal(const PhaseSpaceField& field) {
  if (field.repr == Representation::glauber_p) {
    throw Error(ErrorCode::unsupported_representation,
                "Glauber-Sudarshan P marginals are not supported");
  }
  std::vector<double> density(field.x.n, 0.0);
  for (int ix = 0; ix < field.x.n; ++ix) {
    double s = 0;
    for (int iy = 0; iy < field.y.n; ++iy) s += trapezoid_weight(iy, field.y.n) * field.values(iy, ix);
    density[ix] = s * field.y.step();
  }
  if (field.repr == Representation::husimi_q) {
    for (double& d : density) d = std::max(d, 0.0);
  }
  return Marginal(field.x.points(), std::move(density), field.repr).normalized();
}

Marginal x_marginal(const QuantumState& state, Representation repr) {
  return x_marginal(state, repr, PhaseGrid::default_for(state.cutoff()));
}

Marginal x_marginal(const QuantumState& state, Representation repr, const PhaseGrid& grid) {
  switch (repr) {
    case Representation::husimi_q: return x_marginal(husimi_q(state, grid));
    case Representation::wigner: return x_marginal(wigner(state, grid));
    case Representation::glauber_p: break;
  }
  throw Error(ErrorCode::unsupported_representation,
              "Glauber-Sudarshan P is singular for non-classical states");
}

// ---------------------------------------------------------------------------
// Sampling

PhaseSpaceSampler::PhaseSpaceSampler(const PhaseSpaceField& q_field)
    : x_(q_field.x), y_(q_field.y) {
  if (q_field.repr != Representation::husimi_q) {
    throw Error(ErrorCode::unsupported_representation,
                "phase-space sampling needs the non-negative Q function");
  }
  const int nx = x_.n;
  const int ny = y_.n;
  std::vector<double> column_mass(nx, 0.0);
  y_cdfs_.assign(nx, std::vector<double>(ny, 0.0));
  for (int ix = 0; ix < nx; ++ix) {
    auto& cdf = y_cdfs_[ix];
    for (int iy = 1; iy < ny; ++iy) {
      cdf[iy] = cdf[iy - 1] + 0.5 * (q_field.values(iy, ix) + q_field.values(iy - 1, ix)) * y_.step();
    }
    column_mass[ix] = cdf.back();
    if (cdf.back() > 0) {
      for (double& c : cdf) c /= column_mass[ix];
    }
  }
  x_cdf_.assign(nx, 0.0);
  for (int ix = 1; ix < nx; ++ix) {
    x_cdf_[ix] = x_cdf_[ix - 1] + 0.5 * (column_mass[ix] + column_mass[ix - 1]) * x_.step();
  }
  const double total = x_cdf_.back();
  if (!(total > 0)) throw Error(ErrorCode::invalid_argument, "Q field has no mass");
  for (double& c : x_cdf_) c /= total;
}

double PhaseSpaceSampler::invert(const std::vector<double>& cdf, double lo, double step, double u) {
  // First node with cdf > u; the cell below it has positive mass.
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.begin()) return lo;
  if (it == cdf.end()) {
    // u at or above the last node value: step back to the last cell with mass.
    it = std::lower_bound(cdf.begin(), cdf.end(), cdf.back());
    return lo + step * static_cast<double>(it - cdf.begin());
  }
  const auto k = static_cast<std::size_t>(it - cdf.begin()) - 1;
  const double frac = (u - cdf[k]) / (cdf[k + 1] - cdf[k]);
  return lo + step * (static_cast<double>(k) + frac);
}

cplx PhaseSpaceSampler::sample(const CounterStream& stream) const {
  const auto u = uniforms53(stream.block(0));
  const double x = invert(x_cdf_, x_.lo, x_.step(), u[0]);
  const double pos = (x - x_.lo) / x_.step();
  auto col = static_cast<int>(std::lround(pos));
  col = std::clamp(col, 0, x_.n - 1);
  if (y_cdfs_[col].back() <= 0) {
    // Nearest column carried no mass; use the other end of the cell.
    const int alt = pos > col ? col + 1 : col - 1;
    col = std::clamp(alt, 0, x_.n - 1);
  }
  const double y = invert(y_cdfs_[col], y_.lo, y_.step(), u[1]);
  return cplx(x, y) / std::numbers::sqrt2;
}

double PhaseSpaceSampler::x_cdf(double x) const {
  if (x <= x_.lo) return 0.0;
  if (x >= x_.hi) return 1.0;
  const double pos = (x - x_.lo) / x_.step();
  const auto k = std::min(static_cast<int>(pos), x_.n - 2);
  const double frac = pos - k;
  return x_cdf_[k] + frac * (x_cdf_[k + 1] - x_cdf_[k]);
}

std::vector<cplx> sample_phase_space(const QuantumState& state, Representation repr, int count,
                                     std::uint64_t seed) {
  if (repr != Representation::husimi_q) {
    throw Error(ErrorCode::unsupported_representation,
                "only the Q function can be sampled (xi = +1)");
  }
  if (count < 1) throw Error(ErrorCode::invalid_argument, "sample count must be >= 1");
  const PhaseSpaceSampler sampler(husimi_q(state));
  std::vector<cplx> out(count);
  for (int j = 0; j < count; ++j) {
    out[j] = sampler.sample({seed, static_cast<std::uint64_t>(j), StreamPurpose::initial_state});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json state_to_json(const QuantumState& state) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < state.cutoff(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < state.cutoff(); ++j) {
      row.push_back({state.rho()(i, j).real(), state.rho()(i, j).imag()});
    }
    rows.push_back(std::move(row));
  }
  return {{"format", "bistab.quantum_state"}, {"version", 1}, {"cutoff", state.cutoff()},
          {"rho", std::move(rows)}};
}

QuantumState state_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format") != "bistab.quantum_state") {
      throw Error(ErrorCode::io_error, "not a quantum state document");
    }
    if (doc.at("version").get<int>() != 1) {
      throw Error(ErrorCode::io_error, "unsupported quantum state document version");
    }
    const int n = doc.at("cutoff").get<int>();
    require_cutoff(n);
    const auto& rows = doc.at("rho");
    if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
      throw Error(ErrorCode::io_error, "rho must have `cutoff` rows");
    }
    CMatrix rho(n, n);
    for (int i = 0; i < n; ++i) {
      if (static_cast<int>(rows[i].size()) != n) {
        throw Error(ErrorCode::io_error, "rho row " + std::to_string(i) + " has wrong length");
      }
      for (int j = 0; j < n; ++j) {
        const auto& e = rows[i][j];
        rho(i, j) = cplx(e.at(0).get<double>(), e.at(1).get<double>());
      }
    }
    return QuantumState::from_density(std::move(rho));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::io_error, std::string("malformed quantum state document: ") + e.what());
  }
}

void write_marginal_csv(std::ostream& out, const Marginal& marginal,
                        const std::vector<std::string>& header_lines) {
  std::vector<std::vector<double>> rows;
  rows.reserve(marginal.size());
  for (std::size_t i = 0; i < marginal.size(); ++i) {
    rows.push_back({marginal.x()[i], marginal.density()[i]});
  }
  csv::write(out, header_lines, {"x", "density"}, rows);
}

Marginal read_marginal_csv(std::istream& in, Representation repr) {
  const auto table = csv::read(in);
  return Marginal(table.column_values("x"), table.column_values("density"), repr);
}

}  // namespace bistab
