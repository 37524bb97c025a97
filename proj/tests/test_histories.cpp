#include <gtest/gtest.h>

#include <numbers>

#include <boost/math/distributions/binomial.hpp>

#include "support.hpp"

using namespace decolab;
using namespace testing_support;

namespace {

const Real s = 1.0 / std::sqrt(2.0);
const TensorSpace q2("q", 2);

Matrix sigma_x() {
  Matrix m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

HistorySpec qubit_spec(std::vector<Real> times, const Matrix& h, const DensityOperator& rho) {
  auto z = ProjectorSet::from_basis(computational_basis(q2));
  std::vector<ProjectorSet> sets(times.size(), z);
  return {std::move(times), std::move(sets), Hamiltonian(q2, h), rho, 0.0};
}

/// Evolve, project, renormalize, slice by slice in the Schrodinger picture.
Real sequential_oracle(const HistorySpec& spec, const std::vector<std::size_t>& history) {
  Matrix rho = spec.initial.matrix();
  Real t = spec.t0, prob = 1.0;
  for (std::size_t k = 0; k < history.size(); ++k) {
    Matrix u = spec.hamiltonian.propagator(spec.times[k] - t);
    rho = u * rho * u.adjoint();
    t = spec.times[k];
    const Matrix& p = spec.sets[k][history[k]];
    Matrix next = p * rho * p;
    Real w = next.trace().real();
    prob *= w;
    if (w <= 0.0) return 0.0;
    rho = next / w;
  }
  return prob;
}

/// P(|k/N - p| >= eps) from the Boost binomial distribution.
Real binomial_tail(Real p, std::size_t n, Real eps) {
  boost::math::binomial_distribution<Real> dist(static_cast<Real>(n), p);
  Real total = 0.0;
  for (std::size_t k = 0; k <= n; ++k)
    if (std::abs(static_cast<Real>(k) / static_cast<Real>(n) - p) >= eps - 1e-12) total += boost::math::pdf(dist, static_cast<Real>(k));
  return total;
}

}  // namespace

TEST(ProjectorSet, Validation) {
  Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
  p0(0, 0) = 1;
  p1(1, 1) = 1;
  EXPECT_NO_THROW(ProjectorSet(q2, {p0, p1}));
  EXPECT_THROW(ProjectorSet(q2, {p0}), Error);
  EXPECT_THROW(ProjectorSet(q2, {p0, p0}), Error);
  EXPECT_THROW(ProjectorSet(q2, {p0 * 2.0, p1}), Error);
  EXPECT_THROW(ProjectorSet(q2, {}), Error);
}

TEST(Decohere, Examples) {
  auto z = ProjectorSet::from_basis(computational_basis(q2));
  Matrix diag(2, 2);
  diag << 0.3, 0, 0, 0.7;
  DensityOperator d(q2, diag);
  EXPECT_LT(max_abs(decohere_projectors(d, z).matrix() - diag), 1e-15);
  auto sup = decohere_projectors(DensityOperator::pure(StateVector(q2, {0.6, 0.8})), z);
  EXPECT_NEAR(sup.matrix()(0, 0).real(), 0.36, 1e-15);
  EXPECT_NEAR(std::abs(sup.matrix()(0, 1)), 0.0, 1e-15);
}

TEST(Decohere, IdempotentAndEntropyRaising) {
  std::mt19937_64 gen(1);
  TensorSpace sp({{"a", 2}, {"b", 3}});
  auto local = ProjectorSet::from_basis(computational_basis(TensorSpace("a", 2)));
  auto set = ProjectorSet::lifted(local, sp);
  for (int trial = 0; trial < 10; ++trial) {
    auto rho = random_density(gen, sp, 1 + trial % 4);
    auto once = decohere_projectors(rho, set);
    EXPECT_LT(max_abs(decohere_projectors(once, set).matrix() - once.matrix()), 1e-12);
    EXPECT_LE(once.purity(), rho.purity() + 1e-12);
    EXPECT_GE(ensemble_entropy(once), ensemble_entropy(rho) - 1e-10);
    EXPECT_NEAR(once.matrix().trace().real(), 1.0, 1e-12);
  }
}

TEST(Master, ZeroRatesAreStatic) {
  RealVector p(3);
  p << 0.2, 0.3, 0.5;
  EXPECT_LT((pauli_master_evolve(p, RateMatrix(RealMatrix::Zero(3, 3)), 4.0) - p).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Master, TwoStateAnalytic) {
  const Real gamma = 0.8;
  auto a = RateMatrix::symmetric(2, gamma);
  RealVector p0(2);
  p0 << 1.0, 0.0;
  EXPECT_NEAR(pauli_master_evolve(p0, a, std::log(2.0) / (2 * gamma))(0), 0.75, 1e-12);
  for (int i = 0; i < 20; ++i) {
    Real t = 0.15 * i;
    EXPECT_NEAR(pauli_master_evolve(p0, a, t)(0), 0.5 + 0.5 * std::exp(-2 * gamma * t), 1e-10);
  }
}

TEST(Master, UniformFixedPoint) {
  const Real gamma = 0.4;
  RealVector p0 = RealVector::Zero(5);
  p0(2) = 1.0;
  RealVector p = pauli_master_evolve(p0, RateMatrix::symmetric(5, gamma), 50.0 / gamma);
  EXPECT_LT((p.array() - 0.2).abs().maxCoeff(), 1e-8);
}

TEST(Master, SimplexAndSemigroupOnRandomBalancedRates) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<Real> u(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    // Symmetric rates plus a circulation keep row and column sums equal.
    RealMatrix a(4, 4);
    for (Eigen::Index i = 0; i < 4; ++i)
      for (Eigen::Index j = i; j < 4; ++j) a(i, j) = a(j, i) = i == j ? 0.0 : u(gen);
    Real c = u(gen) * 0.3;
    for (Eigen::Index i = 0; i < 4; ++i) a(i, (i + 1) % 4) += c;
    RateMatrix rates(a);
    RealVector p0 = RealVector::NullaryExpr(4, [&](Eigen::Index) { return u(gen); });
    p0 /= p0.sum();
    Real t1 = u(gen), t2 = u(gen);
    RealVector direct = pauli_master_evolve(p0, rates, t1 + t2);
    RealVector composed = pauli_master_evolve(pauli_master_evolve(p0, rates, t1), rates, t2);
    EXPECT_LT((direct - composed).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_NEAR(direct.sum(), 1.0, 1e-12);
    EXPECT_GE(direct.minCoeff(), -1e-12);
  }
}

TEST(Master, Errors) {
  RealVector p0(2);
  p0 << 1.0, 0.0;
  auto a = RateMatrix::symmetric(2, 1.0);
  EXPECT_THROW(pauli_master_evolve(p0, a, -0.1), Error);
  RealMatrix neg(2, 2);
  neg << 0, -1, -1, 0;
  try {
    RateMatrix r(neg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("negative rate"), std::string::npos);
  }
  RealMatrix unbalanced(2, 2);
  unbalanced << 0, 1, 2, 0;
  EXPECT_THROW(RateMatrix r(unbalanced), Error);
  RealVector bad(2);
  bad << 0.7, 0.7;
  EXPECT_THROW(pauli_master_evolve(bad, a, 1.0), Error);
}

TEST(Histories, SingleSliceHalves) {
  auto spec = qubit_spec({0.5}, Matrix::Zero(2, 2), DensityOperator::pure(StateVector(q2, {s, s})));
  EXPECT_NEAR(history_probability(spec, {0}), 0.5, 1e-14);
  EXPECT_NEAR(history_probability(spec, {1}), 0.5, 1e-14);
  EXPECT_NEAR(consistency_defect(spec), 0.0, 1e-12);
}

TEST(Histories, RepeatabilityWithTrivialDynamics) {
  auto spec = qubit_spec({0.5, 1.0}, Matrix::Zero(2, 2), DensityOperator::pure(StateVector(q2, {0.6, 0.8})));
  EXPECT_NEAR(history_probability(spec, {0, 0}), 0.36, 1e-14);
  EXPECT_NEAR(history_probability(spec, {1, 1}), 0.64, 1e-14);
  EXPECT_NEAR(history_probability(spec, {0, 1}), 0.0, 1e-14);
  EXPECT_NEAR(history_probability(spec, {1, 0}), 0.0, 1e-14);
}

TEST(Histories, MatchSequentialOracle) {
  std::mt19937_64 gen(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto spec = qubit_spec({0.4, 1.1, 1.9}, random_hermitian(gen, 2), random_density(gen, q2, 2));
    Real total = 0.0;
    for (const auto& h : all_history_probabilities(spec)) {
      EXPECT_NEAR(h.probability, sequential_oracle(spec, h.history), 1e-12);
      total += h.probability;
    }
    EXPECT_NEAR(total, 1.0, 1e-10);
  }
}

TEST(Histories, SumToOneOnLargerSpaces) {
  std::mt19937_64 gen(4);
  TensorSpace sp("q", 3);
  Matrix u = random_unitary(gen, 3);
  std::vector<StateVector> rotated;
  for (Eigen::Index k = 0; k < 3; ++k) rotated.emplace_back(sp, Vector(u.col(k)));
  Matrix p01 = Matrix::Zero(3, 3), p2 = Matrix::Zero(3, 3);
  p01(0, 0) = p01(1, 1) = 1;
  p2(2, 2) = 1;
  HistorySpec spec{{0.3, 0.8, 1.5},
                   {ProjectorSet::from_basis(rotated), ProjectorSet(sp, {p01, p2}), ProjectorSet::from_basis(computational_basis(sp))},
                   Hamiltonian(sp, random_hermitian(gen, 3)),
                   random_density(gen, sp, 3),
                   0.0};
  Real total = 0.0;
  for (const auto& h : all_history_probabilities(spec)) total += h.probability;
  EXPECT_NEAR(total, 1.0, 1e-10);
}

TEST(Histories, InterferenceShowsUpAsInconsistency) {
  // Pauli-x precession between z measurements: the middle slice interferes.
  auto spec = qubit_spec({std::numbers::pi / 8, std::numbers::pi / 4}, sigma_x(), DensityOperator::pure(StateVector::basis(q2, 0)));
  EXPECT_GT(consistency_defect(spec), 0.1);
  // Decohered initial state under diagonal dynamics is consistent.
  Matrix z(2, 2);
  z << 1, 0, 0, -1;
  Matrix mixed(2, 2);
  mixed << 0.3, 0, 0, 0.7;
  EXPECT_NEAR(consistency_defect(qubit_spec({0.2, 0.9, 1.4}, z, DensityOperator(q2, mixed))), 0.0, 1e-12);
}

TEST(Histories, SingleSidedAgreesWhenConsistent) {
  Matrix z(2, 2);
  z << 1, 0, 0, -1;
  auto spec = qubit_spec({0.2, 0.9}, z, DensityOperator::pure(StateVector(q2, {s, s})));
  for (const auto& h : all_history_probabilities(spec)) EXPECT_NEAR(std::abs(h.single_sided - h.probability), 0.0, 1e-12);
}

TEST(Histories, Errors) {
  auto spec = qubit_spec({0.5, 1.0}, Matrix::Zero(2, 2), DensityOperator::maximally_mixed(q2));
  EXPECT_THROW(history_probability(spec, {0}), Error);
  EXPECT_THROW(history_probability(spec, {0, 2}), Error);
  spec.times = {1.0, 0.5};
  EXPECT_THROW(history_probability(spec, {0, 0}), Error);
}

TEST(Graham, ExactSmallCase) {
  std::vector<Real> p{0.5, 0.5};
  EXPECT_EQ(graham_deviant_norm(p, 4, 0.3), 0.125);
  EXPECT_EQ(graham_deviant_norm(p, 4, 1.5), 0.0);
}

TEST(Graham, MatchesBinomialTails) {
  for (Real p : {0.5, 0.3, 0.9}) {
    std::vector<Real> born{p, 1.0 - p};
    for (std::size_t n : {1u, 7u, 25u, 100u, 333u, 1000u})
      for (Real eps : {0.05, 0.2}) EXPECT_NEAR(graham_deviant_norm(born, n, eps), binomial_tail(p, n, eps), 1e-12) << p << " " << n << " " << eps;
  }
}

TEST(Graham, LogDomainAgreesBeyondDirectLimit) {
  std::vector<Real> born{0.5, 0.5};
  EXPECT_NEAR(graham_deviant_norm(born, 1600, 0.02), binomial_tail(0.5, 1600, 0.02), 1e-12);
}

TEST(Graham, MonotoneInTrialsAndEpsilon) {
  std::vector<Real> born{0.5, 0.5};
  Real prev = 2.0;
  for (std::size_t n = 25; n <= 6400; n *= 4) {
    Real v = graham_deviant_norm(born, n, 0.2);
    EXPECT_LT(v, prev);
    prev = v;
  }
  Real last = 2.0;
  for (Real eps : {0.01, 0.05, 0.1, 0.2, 0.4}) {
    Real v = graham_deviant_norm(born, 200, eps);
    EXPECT_LE(v, last);
    last = v;
  }
}

TEST(Graham, ThreeOutcomesAgainstBruteForce) {
  std::vector<Real> born{0.2, 0.3, 0.5};
  const std::size_t n = 6;
  Real brute = 0.0;
  for (std::size_t code = 0; code < 729; ++code) {
    std::size_t c = code, k[3] = {0, 0, 0};
    Real w = 1.0;
    for (std::size_t i = 0; i < n; ++i, c /= 3) {
      ++k[c % 3];
      w *= born[c % 3];
    }
    bool deviant = false;
    for (int i = 0; i < 3; ++i) deviant |= std::abs(static_cast<Real>(k[i]) / n - born[static_cast<std::size_t>(i)]) >= 0.15 - 1e-12;
    if (deviant) brute += w;
  }
  EXPECT_NEAR(graham_deviant_norm(born, n, 0.15), brute, 1e-14);
}

TEST(Graham, Errors) {
  std::vector<Real> one{1.0}, two{0.5, 0.5}, bad{0.6, 0.6};
  EXPECT_THROW(graham_deviant_norm(one, 4, 0.1), Error);
  EXPECT_THROW(graham_deviant_norm(two, 0, 0.1), Error);
  EXPECT_THROW(graham_deviant_norm(two, 4, 0.0), Error);
  EXPECT_THROW(graham_deviant_norm(bad, 4, 0.1), Error);
}
