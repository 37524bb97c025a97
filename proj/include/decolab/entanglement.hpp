#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/types.hpp"

namespace decolab {

/// Schmidt coefficients below this are treated as numerical noise.
inline constexpr Real kSchmidtCutoff = 1e-12;

struct SchmidtDecomposition {
  TensorSpace space;  // of the decomposed state
  TensorSpace system_space;
  TensorSpace environment_space;
  std::vector<Real> coefficients;  // sqrt(p_k), descending
  std::vector<StateVector> system_vectors;
  std::vector<StateVector> environment_vectors;
  // Set when two retained coefficients coincide; the vectors inside such a
  // block are then only defined up to a unitary mixing.
  bool degenerate = false;

  std::vector<Real> weights() const {
    std::vector<Real> p;
    for (Real c : coefficients) p.push_back(c * c);
    return p;
  }

  std::size_t rank() const { return coefficients.size(); }

  StateVector reconstruct() const {
    std::vector<std::string> sys_labels = system_space.labels();
    auto sp = detail::split(space, sys_labels);
    Vector v = Vector::Zero(static_cast<Eigen::Index>(space.total_dim()));
    for (std::size_t k = 0; k < coefficients.size(); ++k)
      for (std::size_t s = 0; s < sp.selected_dim; ++s)
        for (std::size_t e = 0; e < sp.rest_dim; ++e)
          v(static_cast<Eigen::Index>(sp.global[s * sp.rest_dim + e])) += coefficients[k] *
              system_vectors[k].amplitudes()(static_cast<Eigen::Index>(s)) *
              environment_vectors[k].amplitudes()(static_cast<Eigen::Index>(e));
    return {space, std::move(v)};
  }
};

/// psi = sum_k sqrt(p_k) |sys_k>|env_k>, from the SVD of the amplitude
/// matrix reshaped along the (system, environment) cut.
inline SchmidtDecomposition schmidt_decompose(const StateVector& psi, std::span<const std::string> system_labels) {
  auto kept = detail::checked_keep(psi.space(), system_labels);
  if (!psi.is_normalized()) throw Error(Errc::invalid_argument, "schmidt_decompose needs a normalized state");
  auto sp = detail::split(psi.space(), kept);
  Matrix m = detail::bipartite_matrix(psi, sp);
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);

  std::vector<std::string> env_labels;
  for (const auto& s : psi.space().subsystems())
    if (std::find(kept.begin(), kept.end(), s.label) == kept.end()) env_labels.push_back(s.label);

  SchmidtDecomposition out{psi.space(), psi.space().restrict_to(kept), psi.space().restrict_to(env_labels), {}, {}, {}, false};
  const auto& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) < kSchmidtCutoff) continue;
    out.coefficients.push_back(sv(k));
    out.system_vectors.emplace_back(out.system_space, Vector(svd.matrixU().col(k)));
    out.environment_vectors.emplace_back(out.environment_space, Vector(svd.matrixV().col(k).conjugate()));
  }
  for (std::size_t k = 1; k < out.coefficients.size(); ++k)
    if (std::abs(out.coefficients[k] - out.coefficients[k - 1]) < kValidityTol) out.degenerate = true;
  return out;
}

inline SchmidtDecomposition schmidt_decompose(const StateVector& psi, std::initializer_list<std::string> system_labels) {
  std::vector<std::string> l(system_labels);
  return schmidt_decompose(psi, std::span<const std::string>(l));
}

/// 1 - tr(rho^2)
inline Real linear_entropy(const DensityOperator& rho) { return 1.0 - rho.purity(); }

/// -sum p ln p with 0 ln 0 = 0; nonpositive entries contribute nothing.
inline Real shannon_entropy(std::span<const Real> p) {
  Real s = 0.0;
  for (Real x : p)
    if (x > 0.0) s -= x * std::log(x);
  return s;
}

/// -tr(rho ln rho), in nats.
inline Real ensemble_entropy(const DensityOperator& rho) {
  // Rounding can push eigenvalues of pure states marginally past 1.
  RealVector ev = rho.eigenvalues().cwiseMax(0.0).cwiseMin(1.0);
  return shannon_entropy(std::span<const Real>(ev.data(), static_cast<std::size_t>(ev.size())));
}

inline Real ensemble_entropy_bits(const DensityOperator& rho) { return nats_to_bits(ensemble_entropy(rho)); }

struct DecoherenceFactor {
  RealVector populations;  // <n|rho|n>
  RealMatrix off_diagonal;  // |<m|rho|n>| for m != n, zero on the diagonal

  Real max_off_diagonal() const { return off_diagonal.size() == 0 ? 0.0 : off_diagonal.maxCoeff(); }
};

inline DecoherenceFactor decoherence_factor(const DensityOperator& rho, const std::vector<StateVector>& basis) {
  require_complete_basis(basis);
  if (basis.front().space().total_dim() != rho.dim()) throw Error(Errc::dimension_mismatch, "basis and density operator");
  auto n = static_cast<Eigen::Index>(basis.size());
  Matrix cols(rho.matrix().rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) cols.col(i) = basis[static_cast<std::size_t>(i)].amplitudes();
  Matrix in_basis = cols.adjoint() * rho.matrix() * cols;
  DecoherenceFactor out{in_basis.diagonal().real(), in_basis.cwiseAbs()};
  out.off_diagonal.diagonal().setZero();
  return out;
}

}  // namespace decolab
