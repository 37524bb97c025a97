#pragma once

// Unitary propagation of states and density operators, Born-rule collapse,
// and Lüders projection. hbar = 1.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/types.hpp"

namespace decolab {

inline Real unitarity_defect(const Matrix& u) {
  return (u.adjoint() * u - Matrix::Identity(u.cols(), u.cols())).cwiseAbs().maxCoeff();
}

inline void require_unitary(const Matrix& u, const std::string& what, Real tol = kValidityTol) {
  if (u.rows() != u.cols()) throw Error(Errc::not_unitary, what + " is not square");
  Real defect = unitarity_defect(u);
  if (defect > tol) throw Error(Errc::not_unitary, what + " (defect " + std::to_string(defect) + ")");
}

/// Hermitian generator of time evolution. The spectral decomposition is
/// computed once, at construction.
class Hamiltonian {
 public:
  Hamiltonian(TensorSpace space, Matrix matrix) : space_(std::move(space)), matrix_(std::move(matrix)) {
    detail::require_square(matrix_, space_.total_dim(), "hamiltonian");
    if (detail::hermiticity_defect(matrix_) > kValidityTol) throw Error(Errc::not_hermitian, "hamiltonian");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (matrix_ + matrix_.adjoint()));
    energies_ = es.eigenvalues();
    eigenvectors_ = es.eigenvectors();
  }

  static Hamiltonian zero(TensorSpace space) {
    auto d = static_cast<Eigen::Index>(space.total_dim());
    return {std::move(space), Matrix::Zero(d, d)};
  }

  const TensorSpace& space() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  const RealVector& energies() const { return energies_; }

  /// exp(-i H t)
  Matrix propagator(Real t) const {
    if (!std::isfinite(t)) throw Error(Errc::invalid_argument, "evolution time must be finite");
    Vector phases(energies_.size());
    for (Eigen::Index k = 0; k < energies_.size(); ++k) phases(k) = std::exp(-kI * energies_(k) * t);
    return eigenvectors_ * phases.asDiagonal() * eigenvectors_.adjoint();
  }

 private:
  TensorSpace space_;
  Matrix matrix_;
  RealVector energies_;
  Matrix eigenvectors_;
};

inline StateVector schrodinger_evolve(const Hamiltonian& h, const StateVector& psi, Real t) {
  if (h.space() != psi.space()) throw Error(Errc::dimension_mismatch, "hamiltonian and state");
  return {psi.space(), h.propagator(t) * psi.amplitudes()};
}

/// Fixed-step Cayley (Crank–Nicolson) propagation. Each step is exactly
/// unitary; the local phase error is O(dt^3).
inline StateVector crank_nicolson_evolve(const Hamiltonian& h, const StateVector& psi, Real t, std::size_t steps) {
  if (h.space() != psi.space()) throw Error(Errc::dimension_mismatch, "hamiltonian and state");
  if (steps == 0) throw Error(Errc::invalid_argument, "crank_nicolson_evolve needs at least one step");
  if (!std::isfinite(t)) throw Error(Errc::invalid_argument, "evolution time must be finite");
  const Real dt = t / static_cast<Real>(steps);
  auto d = h.matrix().rows();
  Matrix half = (0.5 * dt) * kI * h.matrix();
  Matrix plus = Matrix::Identity(d, d) + half;
  Matrix minus = Matrix::Identity(d, d) - half;
  Eigen::PartialPivLU<Matrix> lu(plus);
  Vector v = psi.amplitudes();
  for (std::size_t s = 0; s < steps; ++s) v = lu.solve(minus * v);
  return {psi.space(), std::move(v)};
}

/// U rho U^dagger with U = exp(-i H t); the solution of i d(rho)/dt = [H, rho].
inline DensityOperator von_neumann_evolve(const Hamiltonian& h, const DensityOperator& rho, Real t) {
  if (h.space() != rho.space()) throw Error(Errc::dimension_mismatch, "hamiltonian and density operator");
  Matrix u = h.propagator(t);
  Matrix out = u * rho.matrix() * u.adjoint();
  return {rho.space(), Matrix(0.5 * (out + out.adjoint()))};
}

struct CollapseRecord {
  std::size_t outcome_index = 0;
  Real outcome_probability = 0.0;
  StateVector pre_state;
  StateVector post_state;
  std::uint64_t rng_seed = 0;
};

/// Uniform double in [0, 1) from the top 53 bits, independent of the
/// standard library's distribution implementation.
inline Real uniform01(std::mt19937_64& gen) { return static_cast<Real>(gen() >> 11) * 0x1.0p-53; }

/// Outcomes whose Born weight falls below this are never sampled.
inline constexpr Real kNegligibleOutcome = 1e-14;

inline CollapseRecord collapse(const StateVector& psi, const std::vector<StateVector>& basis, std::uint64_t seed) {
  require_complete_basis(basis);
  if (basis.front().space() != psi.space()) throw Error(Errc::dimension_mismatch, "basis and state");
  if (!(psi.norm() > 0.0)) throw Error(Errc::invalid_argument, "cannot collapse a zero-norm state");
  StateVector pre = psi.normalized();

  std::vector<Real> weights(basis.size());
  Real total = 0.0;
  for (std::size_t n = 0; n < basis.size(); ++n) {
    Real p = born_probability(basis[n], pre);
    weights[n] = p < kNegligibleOutcome ? 0.0 : p;
    total += weights[n];
  }

  std::mt19937_64 gen(seed);
  Real u = uniform01(gen) * total;
  std::size_t chosen = basis.size();
  Real acc = 0.0;
  for (std::size_t n = 0; n < basis.size(); ++n) {
    if (weights[n] == 0.0) continue;
    acc += weights[n];
    chosen = n;
    if (u < acc) break;
  }
  return CollapseRecord{chosen, born_probability(basis[chosen], pre), pre, basis[chosen], seed};
}

inline void require_projector(const Matrix& p, std::size_t dim) {
  detail::require_square(p, dim, "projector");
  if (detail::hermiticity_defect(p) > kValidityTol) throw Error(Errc::invalid_projectors, "projector is not hermitian");
  if ((p * p - p).cwiseAbs().maxCoeff() > kValidityTol) throw Error(Errc::invalid_projectors, "projector is not idempotent");
}

template <class State>
struct Projected {
  State state;
  Real probability;
};

/// (P psi / |P psi|, |P psi|^2)
inline Projected<StateVector> luders_project(const StateVector& psi, const Matrix& p) {
  require_projector(p, psi.dim());
  Vector v = p * psi.amplitudes();
  Real prob = v.squaredNorm() / psi.amplitudes().squaredNorm();
  if (prob <= kNegligibleOutcome) throw Error(Errc::zero_probability, "projection annihilates the state");
  return {StateVector(psi.space(), v / v.norm()), prob};
}

/// (P rho P / tr(P rho P), tr(P rho P))
inline Projected<DensityOperator> luders_project(const DensityOperator& rho, const Matrix& p) {
  require_projector(p, rho.dim());
  Matrix m = p * rho.matrix() * p;
  Real prob = m.trace().real();
  if (prob <= kNegligibleOutcome) throw Error(Errc::zero_probability, "projection annihilates the state");
  m /= prob;
  return {DensityOperator(rho.space(), Matrix(0.5 * (m + m.adjoint()))), prob};
}

}  // namespace decolab
