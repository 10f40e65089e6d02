#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bistab/dynamics.hpp"
#include "bistab/error.hpp"

using namespace bistab;

namespace {

OscillatorParams opo(double lambda, double g, double b = 0) {
  OscillatorParams p;
  p.lambda = lambda;
  p.g = g;
  p.b = b;
  return p;
}

SimConfig sim_for(double lambda, int n, std::uint64_t seed = 1) {
  auto s = SimConfig::defaults_for(lambda);
  s.n_traj = n;
  s.seed = seed;
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

}  // namespace

TEST_CASE("drift") {
  CHECK(drift(0, opo(1.5, 0.05)) == cplx(0));
  CHECK(std::abs(drift(10, opo(2, 0.1))) < 1e-12);
  auto jpo = opo(2, 0.1);
  jpo.kind = Nonlinearity::jpo;
  // The Kerr term is a rotation, so nothing cancels the linear gain on the real axis.
  const cplx d = drift(10, jpo);
  CHECK(d.real() == doctest::Approx(10.0));
  CHECK(d.imag() == doctest::Approx(10.0));
}

TEST_CASE("diffusion coefficients") {
  const auto q = diffusion_coeffs(opo(2, 0.1), Representation::husimi_q);
  CHECK(q.dx == 0.0);
  CHECK(q.dy == doctest::Approx(2.0));
  const auto w = diffusion_coeffs(opo(1.5, 0.1), Representation::wigner);
  CHECK(w.dx == 1.0);
  CHECK(w.dy == 1.0);
  CHECK(code_of([] { diffusion_coeffs(opo(3, 0.1), Representation::husimi_q); }) ==
        ErrorCode::unsupported_representation_regime);
  CHECK(code_of([] { diffusion_coeffs(opo(1.5, 0.1), Representation::glauber_p); }) ==
        ErrorCode::unsupported_representation_regime);
}

TEST_CASE("parameter validation") {
  CHECK(code_of([] { opo(1.0, 0.1).validate(); }) == ErrorCode::invalid_argument);
  CHECK(code_of([] { opo(1.5, 0).validate(); }) == ErrorCode::invalid_argument);
  auto s = sim_for(1.5, 100);
  s.dt = 0.02;
  CHECK(code_of([&] { s.validate(opo(1.5, 0.1)); }) == ErrorCode::invalid_argument);
  s = sim_for(1.5, 99);
  CHECK(code_of([&] { s.validate(opo(1.5, 0.1)); }) == ErrorCode::invalid_argument);
  s = sim_for(1.5, 100);
  s.t_max = 19.9;
  CHECK(code_of([&] { s.validate(opo(1.5, 0.1)); }) == ErrorCode::invalid_argument);
  CHECK(SimConfig::defaults_for(1.5).t_max == doctest::Approx(30.0));
  CHECK(SimConfig::defaults_for(3.0).t_max == doctest::Approx(10.0));
}

TEST_CASE("noiseless trajectories settle on the fixed points") {
  const auto p = opo(2, 0.1);
  const auto sim = sim_for(2, 100);
  const CounterStream quiet{1, 0, StreamPurpose::dynamics, true};
  CHECK(std::abs(evolve_trajectory(5 / 0.1, p, sim, quiet).final_alpha - cplx(10)) < 1e-3);
  CHECK(std::abs(evolve_trajectory(-0.1, p, sim, quiet).final_alpha - cplx(-10)) < 1e-3);
}

TEST_CASE("trajectories are deterministic and recorded") {
  const auto p = opo(1.5, 0.05, 0.2);
  auto sim = sim_for(1.5, 100);
  sim.thin = 100;
  const CounterStream s{42, 7, StreamPurpose::dynamics};
  const auto a = evolve_trajectory(cplx(0.3, -0.2), p, sim, s);
  const auto b = evolve_trajectory(cplx(0.3, -0.2), p, sim, s);
  CHECK(a.x == b.x);
  CHECK(a.y == b.y);
  CHECK(a.final_alpha == b.final_alpha);
  CHECK(a.t.front() == 0.0);
  CHECK(a.t.back() == doctest::Approx(sim.t_max));
  CHECK(a.x.size() == static_cast<std::size_t>(sim.steps() / 100 + 1));
  CHECK(a.x.back() == doctest::Approx(std::sqrt(2.0) * a.final_alpha.real()));

  const CounterStream other{42, 8, StreamPurpose::dynamics};
  CHECK(evolve_trajectory(cplx(0.3, -0.2), p, sim, other).final_alpha != a.final_alpha);
}

TEST_CASE("blowup is reported") {
  auto p = opo(1.5, 0.05);
  auto sim = sim_for(1.5, 100);
  const CounterStream quiet{1, 0, StreamPurpose::dynamics, true};
  CHECK(code_of([&] { evolve_trajectory(1e6, p, sim, quiet); }) == ErrorCode::numerical_blowup);
}

TEST_CASE("classification gate") {
  const auto p = opo(2, 0.1);
  const double s2 = std::numbers::sqrt2;
  CHECK(classify_final(cplx(9.8 / s2, 0), p) == Outcome::phase_zero);
  CHECK(classify_final(cplx(-9.9 / s2, 0), p) == Outcome::phase_pi);
  CHECK(classify_final(cplx(0.3 / s2, 0), p) == Outcome::unresolved);
}

TEST_CASE("JPO attractors") {
  auto p = opo(2, 0.1);
  p.kind = Nonlinearity::jpo;
  const auto pair = find_attractors(p);
  CHECK(std::abs(drift(pair.phase_zero, p)) < 1e-9);
  CHECK(std::abs(drift(pair.phase_pi, p)) < 1e-9);
  CHECK(std::abs(pair.phase_zero + pair.phase_pi) < 1e-9);
  CHECK(is_stable_fixed_point(pair.phase_zero, p));
  CHECK(!is_stable_fixed_point(0, p));
  CHECK(pair.phase_zero.real() > 0);
  CHECK(std::abs(pair.phase_zero) == doctest::Approx(std::pow(3.0, 0.25) / 0.1).epsilon(1e-9));
  CHECK(std::arg(pair.phase_zero) == doctest::Approx(std::acos(0.5) / 2).epsilon(1e-9));

  // A bias moves the attractors but keeps two stable roots.
  p.b = 0.5;
  const auto biased = find_attractors(p);
  CHECK(std::abs(drift(biased.phase_zero, p)) < 1e-9);
  CHECK(std::abs(drift(biased.phase_pi, p)) < 1e-9);
  CHECK(std::abs(biased.phase_zero - biased.phase_pi) > 10);
  CHECK(classify_final(biased.phase_pi * 0.9, p, &biased) == Outcome::phase_pi);
}

TEST_CASE("ensemble bookkeeping and determinism across worker counts") {
  const auto state = make_fock(1, 32);
  const auto p = opo(1.5, 0.05, 0.1);
  auto sim = sim_for(1.5, 1000, 9);
  sim.threads = 1;
  const auto a = run_ensemble(state, p, sim);
  sim.threads = 3;
  const auto b = run_ensemble(state, p, sim);
  CHECK(a.n1 == b.n1);
  CHECK(a.n0 == b.n0);
  CHECK(a.final_alpha == b.final_alpha);
  CHECK(a.n1 + a.n0 + a.n_unresolved == 1000);
  const double resolved = double(a.n1 + a.n0);
  CHECK(a.p == doctest::Approx(a.n1 / resolved));
  CHECK(a.se == doctest::Approx(std::sqrt(a.p * (1 - a.p) / resolved)));
  const auto j = to_json(a);
  CHECK(j.at("n1") == a.n1);
  CHECK(j.at("params").at("kind") == "opo");
}

TEST_CASE("unbiased symmetric states split evenly") {
  for (const auto& state : {make_fock(0, 32), make_fock(5, 32)}) {
    const auto r = run_ensemble(state, opo(1.5, 0.05), sim_for(1.5, 10000, 3));
    CHECK(std::abs(r.p - 0.5) <= 4 * r.se);
    CHECK(!r.unresolved_warning);
  }
}

TEST_CASE("a positive bias favours the phase-0 state") {
  const auto r = run_ensemble(make_fock(5, 32), opo(1.5, 0.05, 0.5), sim_for(1.5, 10000, 4));
  CHECK(r.p > 0.5 + 4 * r.se);
}

TEST_CASE("linearized noiseless-X limit follows the initial X exactly") {
  auto p = opo(2.0, 0.05, 0.3);
  p.nonlinear = false;
  const auto state = make_fock(3, 32);
  const auto sim = sim_for(2.0, 4000, 12);
  const auto initial = sample_initial_points(state, sim.repr, sim.n_traj, sim.seed);
  const double threshold = -std::numbers::sqrt2 * p.b / (p.lambda - 1);
  long above = 0;
  for (const auto& a : initial) above += std::numbers::sqrt2 * a.real() > threshold;
  const auto r = run_ensemble(initial, p, sim);
  CHECK(r.n_unresolved == 0);
  CHECK(r.n1 == above);
}

TEST_CASE("wigner ensembles need Gaussian pure states") {
  auto sim = sim_for(1.5, 1000, 2);
  sim.repr = Representation::wigner;
  const auto r = run_ensemble(make_squeezed_coherent(0, 0.3, 32), opo(1.5, 0.05), sim);
  CHECK(r.n1 + r.n0 + r.n_unresolved == 1000);
  CHECK(code_of([&] { run_ensemble(make_fock(1, 32), opo(1.5, 0.05), sim); }) ==
        ErrorCode::unsupported_representation);
}

TEST_CASE("halving dt moves the estimate by at most two standard errors") {
  const auto state = make_fock(2, 32);
  const auto p = opo(1.5, 0.05, 0.2);
  auto sim = sim_for(1.5, 10000, 21);
  const auto coarse = run_ensemble(state, p, sim);
  sim.dt /= 2;
  const auto fine = run_ensemble(state, p, sim);
  CHECK(std::abs(coarse.p - fine.p) <= 2 * coarse.se);
}
