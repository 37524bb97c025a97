#include <gtest/gtest.h>

#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>

#include "support.hpp"

using namespace decolab;
using namespace testing_support;

namespace {

const Real s = 1.0 / std::sqrt(2.0);

Hamiltonian sigma_z() {
  Matrix h(2, 2);
  h << 1, 0, 0, -1;
  return {TensorSpace("q", 2), h};
}

}  // namespace

TEST(Schrodinger, ZeroTimeIsIdentity) {
  std::mt19937_64 gen(1);
  TensorSpace sp("q", 5);
  Hamiltonian h(sp, random_hermitian(gen, 5));
  auto psi = random_state(gen, sp);
  EXPECT_LT(max_abs(schrodinger_evolve(h, psi, 0.0).amplitudes() - psi.amplitudes()), 1e-15);
}

TEST(Schrodinger, TwoLevelPrecession) {
  StateVector plus(TensorSpace("q", 2), {s, s});
  Matrix sx(2, 2);
  sx << 0, 1, 1, 0;
  Observable x(plus.space(), sx);
  for (Real t : {0.0, 0.3, std::numbers::pi / 4, 1.7})
    EXPECT_NEAR(expectation(x, schrodinger_evolve(sigma_z(), plus, t)), std::cos(2 * t), 1e-12);
  EXPECT_NEAR(expectation(x, schrodinger_evolve(sigma_z(), plus, std::numbers::pi / 4)), 0.0, 1e-12);
}

TEST(Schrodinger, ManySmallStepsKeepNorm) {
  std::mt19937_64 gen(2);
  TensorSpace sp("q", 4);
  Hamiltonian h(sp, random_hermitian(gen, 4));
  Matrix u = h.propagator(1e-3);
  auto psi = random_state(gen, sp);
  Vector v = psi.amplitudes();
  for (int i = 0; i < 10000; ++i) v = u * v;
  EXPECT_NEAR(v.norm(), 1.0, 1e-10);
}

TEST(Schrodinger, InnerProductsAndEnergyConserved) {
  std::mt19937_64 gen(3);
  TensorSpace sp("q", 6);
  Hamiltonian h(sp, random_hermitian(gen, 6));
  Observable energy(sp, h.matrix());
  for (int trial = 0; trial < 10; ++trial) {
    auto a = random_state(gen, sp), b = random_state(gen, sp);
    Real t = std::uniform_real_distribution<Real>(-5, 5)(gen);
    auto at = schrodinger_evolve(h, a, t), bt = schrodinger_evolve(h, b, t);
    EXPECT_LT(std::abs(at.inner(bt) - a.inner(b)), 1e-10);
    EXPECT_NEAR(expectation(energy, at), expectation(energy, a), 1e-10);
  }
}

TEST(Schrodinger, CrankNicolsonConvergesToExact) {
  std::mt19937_64 gen(4);
  TensorSpace sp("q", 4);
  Hamiltonian h(sp, random_hermitian(gen, 4));
  auto psi = random_state(gen, sp);
  auto exact = schrodinger_evolve(h, psi, 1.0);
  Real e1 = (crank_nicolson_evolve(h, psi, 1.0, 200).amplitudes() - exact.amplitudes()).norm();
  Real e2 = (crank_nicolson_evolve(h, psi, 1.0, 400).amplitudes() - exact.amplitudes()).norm();
  EXPECT_LT(e1, 1e-3);
  EXPECT_NEAR(e1 / e2, 4.0, 0.2);  // second order globally
  EXPECT_NEAR(crank_nicolson_evolve(h, psi, 1.0, 7).norm(), 1.0, 1e-12);
}

TEST(Hamiltonian, RejectsNonHermitianAndBadTime) {
  Matrix m(2, 2);
  m << 0, 1, 0, 0;
  EXPECT_THROW(Hamiltonian(TensorSpace("q", 2), m), Error);
  EXPECT_THROW(sigma_z().propagator(std::numeric_limits<Real>::infinity()), Error);
}

TEST(VonNeumann, StationaryWhenCommuting) {
  Matrix d(2, 2);
  d << 0.3, 0, 0, 0.7;
  DensityOperator rho(TensorSpace("q", 2), d);
  EXPECT_LT(max_abs(von_neumann_evolve(sigma_z(), rho, 2.3).matrix() - d), 1e-15);
}

TEST(VonNeumann, PureStateCrossOracle) {
  std::mt19937_64 gen(5);
  TensorSpace sp("q", 5);
  Hamiltonian h(sp, random_hermitian(gen, 5));
  auto psi = random_state(gen, sp);
  auto rho_t = von_neumann_evolve(h, DensityOperator::pure(psi), 0.9);
  auto psi_t = schrodinger_evolve(h, psi, 0.9);
  EXPECT_LT(max_abs(rho_t.matrix() - psi_t.amplitudes() * psi_t.amplitudes().adjoint()), 1e-12);
}

TEST(VonNeumann, PurityInvariant) {
  std::mt19937_64 gen(6);
  TensorSpace sp("q", 6);
  Hamiltonian h(sp, random_hermitian(gen, 6));
  for (int trial = 0; trial < 5; ++trial) {
    auto rho = random_density(gen, sp, 3);
    EXPECT_NEAR(von_neumann_evolve(h, rho, 3.1).purity(), rho.purity(), 1e-12);
  }
}

TEST(Collapse, EigenstateAlwaysGivesItsOutcome) {
  TensorSpace sp("q", 3);
  auto basis = computational_basis(sp);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto r = collapse(StateVector::basis(sp, 1), basis, seed);
    EXPECT_EQ(r.outcome_index, 1u);
    EXPECT_DOUBLE_EQ(r.outcome_probability, 1.0);
  }
}

TEST(Collapse, SameSeedSameRecord) {
  TensorSpace sp("q", 2);
  StateVector psi(sp, {s, s});
  auto a = collapse(psi, computational_basis(sp), 99), b = collapse(psi, computational_basis(sp), 99);
  EXPECT_EQ(a.outcome_index, b.outcome_index);
  EXPECT_EQ(a.post_state, b.post_state);
  EXPECT_EQ(a.rng_seed, 99u);
}

TEST(Collapse, FrequenciesMatchBornWithinBinomialBand) {
  TensorSpace sp("q", 2);
  auto basis = computational_basis(sp);
  StateVector even(sp, {s, s}), skew(sp, {std::sqrt(0.1), std::sqrt(0.9)});
  std::size_t even_hits = 0, skew_hits = 0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    even_hits += collapse(even, basis, seed).outcome_index == 0;
    skew_hits += collapse(skew, basis, seed).outcome_index == 1;
  }
  EXPECT_NEAR(even_hits / 1e4, 0.5, 0.02);
  EXPECT_NEAR(skew_hits / 1e4, 0.9, 0.012);
}

TEST(Collapse, ChiSquareOnFourOutcomes) {
  TensorSpace sp("q", 4);
  StateVector psi(sp, {0.1, Complex(0, 0.3), -0.5, std::sqrt(1 - 0.01 - 0.09 - 0.25)});
  auto basis = computational_basis(sp);
  std::vector<Real> counts(4, 0.0);
  for (std::uint64_t seed = 1000; seed < 11000; ++seed) counts[collapse(psi, basis, seed).outcome_index] += 1;
  Real chi2 = 0.0;
  for (std::size_t k = 0; k < 4; ++k) {
    Real e = born_probability(basis[k], psi) * 1e4;
    chi2 += (counts[k] - e) * (counts[k] - e) / e;
  }
  EXPECT_GT(boost::math::cdf(boost::math::complement(boost::math::chi_squared(3), chi2)), 0.01);
}

TEST(Collapse, RecordProbabilityMatchesBornAndRepeats) {
  std::mt19937_64 gen(7);
  TensorSpace sp("q", 5);
  Matrix u = random_unitary(gen, 5);
  std::vector<StateVector> basis;
  for (Eigen::Index k = 0; k < 5; ++k) basis.emplace_back(sp, Vector(u.col(k)));
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto psi = random_state(gen, sp);
    auto r = collapse(psi, basis, seed);
    EXPECT_NEAR(r.outcome_probability, born_probability(basis[r.outcome_index], psi), 1e-12);
    EXPECT_EQ(collapse(r.post_state, basis, seed + 7).outcome_index, r.outcome_index);
  }
}

TEST(Collapse, NegligibleOutcomesAreNeverSampled) {
  TensorSpace sp("q", 3);
  StateVector psi(sp, {s, 1e-9, s});
  auto basis = computational_basis(sp);
  for (std::uint64_t seed = 0; seed < 2000; ++seed) EXPECT_NE(collapse(psi, basis, seed).outcome_index, 1u);
}

TEST(Collapse, Errors) {
  TensorSpace sp("q", 3);
  std::vector<StateVector> partial{StateVector::basis(sp, 0), StateVector::basis(sp, 1)};
  EXPECT_THROW(collapse(StateVector::basis(sp, 0), partial, 0), Error);
  EXPECT_THROW(collapse(StateVector(sp, {0, 0, 0}), computational_basis(sp), 0), Error);
}

TEST(Luders, IdentityLeavesStateAlone) {
  std::mt19937_64 gen(8);
  TensorSpace sp("q", 3);
  auto psi = random_state(gen, sp);
  auto r = luders_project(psi, Matrix::Identity(3, 3));
  EXPECT_NEAR(r.probability, 1.0, 1e-14);
  EXPECT_LT(max_abs(r.state.amplitudes() - psi.amplitudes()), 1e-14);
}

TEST(Luders, SubspaceProjection) {
  TensorSpace sp("q", 3);
  Real t = 1.0 / std::sqrt(3.0);
  StateVector psi(sp, {t, t, t});
  Matrix p = Matrix::Zero(3, 3);
  p(0, 0) = p(1, 1) = 1;
  auto r = luders_project(psi, p);
  EXPECT_NEAR(r.probability, 2.0 / 3.0, 1e-14);
  EXPECT_TRUE(ray_equal(r.state, StateVector(sp, {s, s, 0})));
  auto d = luders_project(DensityOperator::pure(psi), p);
  EXPECT_NEAR(d.probability, 2.0 / 3.0, 1e-14);
  EXPECT_LT(max_abs(d.state.matrix() - r.state.amplitudes() * r.state.amplitudes().adjoint()), 1e-14);
}

TEST(Luders, Idempotent) {
  std::mt19937_64 gen(9);
  TensorSpace sp("q", 4);
  Vector v = random_vector(gen, 4);
  Matrix p = Matrix::Identity(4, 4) - v * v.adjoint();
  auto rho = random_density(gen, sp, 4);
  auto once = luders_project(rho, p);
  auto twice = luders_project(once.state, p);
  EXPECT_LT(max_abs(once.state.matrix() - twice.state.matrix()), 1e-13);
  EXPECT_NEAR(twice.probability, 1.0, 1e-13);
}

TEST(Luders, ZeroProbabilitySignals) {
  TensorSpace sp("q", 2);
  Matrix p = Matrix::Zero(2, 2);
  p(1, 1) = 1;
  try {
    luders_project(StateVector::basis(sp, 0), p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::zero_probability);
  }
  Matrix notproj = Matrix::Identity(2, 2) * 2.0;
  EXPECT_THROW(luders_project(StateVector::basis(sp, 0), notproj), Error);
}
