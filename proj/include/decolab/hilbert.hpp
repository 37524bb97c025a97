#pragma once

// State vectors, density operators and observables on labeled tensor-product
// spaces. Flattening is row-major with the first-listed subsystem varying
// slowest, so |a>|b> on dims (da, db) sits at index a * db + b.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "decolab/error.hpp"
#include "decolab/types.hpp"

namespace decolab {

struct Subsystem {
  std::string label;
  std::size_t dim = 1;

  bool operator==(const Subsystem&) const = default;
};

class TensorSpace {
 public:
  explicit TensorSpace(std::vector<Subsystem> subsystems) : subsystems_(std::move(subsystems)) {
    if (subsystems_.empty()) throw Error(Errc::invalid_argument, "tensor space needs at least one subsystem");
    for (std::size_t i = 0; i < subsystems_.size(); ++i) {
      if (subsystems_[i].dim < 1)
        throw Error(Errc::invalid_argument, "subsystem '" + subsystems_[i].label + "' has zero dimension");
      for (std::size_t j = 0; j < i; ++j)
        if (subsystems_[j].label == subsystems_[i].label)
          throw Error(Errc::label_collision, "duplicate label '" + subsystems_[i].label + "'");
      total_dim_ *= subsystems_[i].dim;
    }
  }

  TensorSpace(std::string label, std::size_t dim) : TensorSpace(std::vector<Subsystem>{{std::move(label), dim}}) {}

  const std::vector<Subsystem>& subsystems() const { return subsystems_; }
  std::size_t rank() const { return subsystems_.size(); }
  std::size_t total_dim() const { return total_dim_; }

  bool contains(std::string_view label) const {
    return std::any_of(subsystems_.begin(), subsystems_.end(), [&](const Subsystem& s) { return s.label == label; });
  }

  std::size_t position(std::string_view label) const {
    for (std::size_t i = 0; i < subsystems_.size(); ++i)
      if (subsystems_[i].label == label) return i;
    throw Error(Errc::unknown_label, "no subsystem labeled '" + std::string(label) + "'");
  }

  std::size_t dim(std::string_view label) const { return subsystems_[position(label)].dim; }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const auto& s : subsystems_) out.push_back(s.label);
    return out;
  }

  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(subsystems_.size());
    for (std::size_t i = subsystems_.size(); i-- > 0;) {
      idx[i] = flat % subsystems_[i].dim;
      flat /= subsystems_[i].dim;
    }
    return idx;
  }

  std::size_t flat_index(std::span<const std::size_t> multi) const {
    if (multi.size() != subsystems_.size()) throw Error(Errc::dimension_mismatch, "multi-index rank");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < multi.size(); ++i) {
      if (multi[i] >= subsystems_[i].dim) throw Error(Errc::invalid_argument, "multi-index out of range");
      flat = flat * subsystems_[i].dim + multi[i];
    }
    return flat;
  }

  TensorSpace concat(const TensorSpace& other) const {
    auto all = subsystems_;
    for (const auto& s : other.subsystems_) {
      if (contains(s.label)) throw Error(Errc::label_collision, "label '" + s.label + "' present in both factors");
      all.push_back(s);
    }
    return TensorSpace(std::move(all));
  }

  /// Subspace made of the named subsystems, in this space's order.
  TensorSpace restrict_to(std::span<const std::string> labels) const {
    std::vector<Subsystem> kept;
    for (const auto& s : subsystems_)
      if (std::find(labels.begin(), labels.end(), s.label) != labels.end()) kept.push_back(s);
    for (const auto& l : labels) position(l);
    return TensorSpace(std::move(kept));
  }

  bool operator==(const TensorSpace&) const = default;

 private:
  std::vector<Subsystem> subsystems_;
  std::size_t total_dim_ = 1;
};

namespace detail {

/// Index table splitting a space into (selected, rest) factors. The selected
/// factor follows the order of `labels`; the rest keeps the space order.
struct Split {
  std::size_t selected_dim = 1;
  std::size_t rest_dim = 1;
  std::vector<std::size_t> global;  // global[s * rest_dim + r]
};

inline Split split(const TensorSpace& space, std::span<const std::string> labels) {
  std::vector<std::size_t> sel_pos;
  for (const auto& l : labels) {
    auto p = space.position(l);
    if (std::find(sel_pos.begin(), sel_pos.end(), p) != sel_pos.end())
      throw Error(Errc::label_collision, "label '" + l + "' selected twice");
    sel_pos.push_back(p);
  }
  std::vector<std::size_t> rest_pos;
  for (std::size_t i = 0; i < space.rank(); ++i)
    if (std::find(sel_pos.begin(), sel_pos.end(), i) == sel_pos.end()) rest_pos.push_back(i);

  const auto& subs = space.subsystems();
  Split out;
  for (auto p : sel_pos) out.selected_dim *= subs[p].dim;
  for (auto p : rest_pos) out.rest_dim *= subs[p].dim;
  out.global.resize(space.total_dim());

  // Global strides, row-major.
  std::vector<std::size_t> stride(space.rank(), 1);
  for (std::size_t i = space.rank(); i-- > 1;) stride[i - 1] = stride[i] * subs[i].dim;

  auto offsets = [&](const std::vector<std::size_t>& pos, std::size_t count) {
    std::vector<std::size_t> off(count, 0);
    for (std::size_t f = 0; f < count; ++f) {
      std::size_t rem = f, acc = 0;
      for (std::size_t k = pos.size(); k-- > 0;) {
        acc += (rem % subs[pos[k]].dim) * stride[pos[k]];
        rem /= subs[pos[k]].dim;
      }
      off[f] = acc;
    }
    return off;
  };
  auto sel_off = offsets(sel_pos, out.selected_dim);
  auto rest_off = offsets(rest_pos, out.rest_dim);
  for (std::size_t s = 0; s < out.selected_dim; ++s)
    for (std::size_t r = 0; r < out.rest_dim; ++r) out.global[s * out.rest_dim + r] = sel_off[s] + rest_off[r];
  return out;
}

inline Real hermiticity_defect(const Matrix& m) { return (m - m.adjoint()).cwiseAbs().maxCoeff(); }

inline void require_square(const Matrix& m, std::size_t dim, const char* what) {
  if (static_cast<std::size_t>(m.rows()) != dim || static_cast<std::size_t>(m.cols()) != dim)
    throw Error(Errc::dimension_mismatch, std::string(what) + " has wrong shape");
}

}  // namespace detail

class StateVector {
 public:
  StateVector(TensorSpace space, Vector amplitudes) : space_(std::move(space)), amplitudes_(std::move(amplitudes)) {
    if (static_cast<std::size_t>(amplitudes_.size()) != space_.total_dim())
      throw Error(Errc::dimension_mismatch, "amplitude count does not match space dimension");
  }

  StateVector(TensorSpace space, std::initializer_list<Complex> amplitudes)
      : StateVector(std::move(space), Eigen::Map<const Vector>(amplitudes.begin(), static_cast<Eigen::Index>(amplitudes.size()))) {}

  static StateVector basis(TensorSpace space, std::size_t index) {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(space.total_dim()));
    if (index >= space.total_dim()) throw Error(Errc::invalid_argument, "basis index out of range");
    v(static_cast<Eigen::Index>(index)) = 1.0;
    return {std::move(space), std::move(v)};
  }

  const TensorSpace& space() const { return space_; }
  const Vector& amplitudes() const { return amplitudes_; }
  std::size_t dim() const { return space_.total_dim(); }

  Real norm() const { return amplitudes_.norm(); }

  StateVector normalized() const {
    Real n = norm();
    if (!(n > 0.0)) throw Error(Errc::invalid_argument, "cannot normalize a zero vector");
    return {space_, amplitudes_ / n};
  }

  bool is_normalized(Real tol = kValidityTol) const { return std::abs(norm() - 1.0) <= tol; }

  /// <this|other>
  Complex inner(const StateVector& other) const {
    if (space_ != other.space_) throw Error(Errc::dimension_mismatch, "inner product across different spaces");
    return amplitudes_.dot(other.amplitudes_);
  }

  bool operator==(const StateVector& other) const {
    return space_ == other.space_ && amplitudes_ == other.amplitudes_;
  }

 private:
  TensorSpace space_;
  Vector amplitudes_;
};

/// True when the vectors agree up to one global phase factor.
inline bool ray_equal(const StateVector& a, const StateVector& b, Real tol = kValidityTol) {
  if (a.space() != b.space()) return false;
  Real na = a.norm(), nb = b.norm();
  if (na == 0.0 || nb == 0.0) return na == nb;
  return std::abs(std::abs(a.inner(b)) - na * nb) <= tol * na * nb;
}

inline StateVector tensor(const StateVector& a, const StateVector& b) {
  TensorSpace space = a.space().concat(b.space());
  Vector v(static_cast<Eigen::Index>(space.total_dim()));
  const auto nb = b.amplitudes().size();
  for (Eigen::Index i = 0; i < a.amplitudes().size(); ++i) v.segment(i * nb, nb) = a.amplitudes()(i) * b.amplitudes();
  return {std::move(space), std::move(v)};
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

class DensityOperator {
 public:
  /// Validates Hermiticity, unit trace and positivity at `tol`.
  DensityOperator(TensorSpace space, Matrix matrix, Real tol = kValidityTol)
      : space_(std::move(space)), matrix_(std::move(matrix)) {
    detail::require_square(matrix_, space_.total_dim(), "density matrix");
    if (detail::hermiticity_defect(matrix_) > tol) throw Error(Errc::not_hermitian, "density matrix");
    Complex tr = matrix_.trace();
    if (std::abs(tr - 1.0) > tol) throw Error(Errc::invariant_violation, "density matrix trace " + std::to_string(tr.real()));
    Real min_eig = eigenvalues().minCoeff();
    if (min_eig < -tol) throw Error(Errc::invariant_violation, "density matrix has eigenvalue " + std::to_string(min_eig));
  }

  static DensityOperator pure(const StateVector& psi) {
    const Vector& a = psi.amplitudes();
    return {psi.space(), Matrix(a * a.adjoint())};
  }

  static DensityOperator maximally_mixed(TensorSpace space) {
    auto d = static_cast<Eigen::Index>(space.total_dim());
    return {std::move(space), Matrix(Matrix::Identity(d, d) / static_cast<Real>(d))};
  }

  const TensorSpace& space() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  std::size_t dim() const { return space_.total_dim(); }

  Real purity() const { return (matrix_ * matrix_).trace().real(); }

  /// Ascending eigenvalues of the Hermitian part.
  RealVector eigenvalues() const {
    Matrix h = 0.5 * (matrix_ + matrix_.adjoint());
    return Eigen::SelfAdjointEigenSolver<Matrix>(h, Eigen::EigenvaluesOnly).eigenvalues();
  }

 private:
  TensorSpace space_;
  Matrix matrix_;
};

class Observable {
 public:
  struct Eigensystem {
    std::vector<StateVector> basis;
    std::vector<Real> scale;
  };

  Observable(TensorSpace space, Matrix matrix) : space_(std::move(space)), matrix_(std::move(matrix)) {
    detail::require_square(matrix_, space_.total_dim(), "observable");
    if (detail::hermiticity_defect(matrix_) > kValidityTol) throw Error(Errc::not_hermitian, "observable");
  }

  static Observable identity(TensorSpace space) {
    auto d = static_cast<Eigen::Index>(space.total_dim());
    return {std::move(space), Matrix::Identity(d, d)};
  }

  const TensorSpace& space() const { return space_; }
  const Matrix& matrix() const { return matrix_; }
  const std::optional<Eigensystem>& eigensystem() const { return eigensystem_; }

 private:
  friend Observable build_observable(const std::vector<StateVector>&, std::span<const Real>);

  TensorSpace space_;
  Matrix matrix_;
  std::optional<Eigensystem> eigensystem_;
};

/// Largest deviation of the basis Gram matrix from the identity and of the
/// projector sum from the identity.
inline Real basis_defect(const std::vector<StateVector>& basis) {
  if (basis.empty()) throw Error(Errc::invalid_basis, "empty basis");
  const auto& space = basis.front().space();
  auto d = static_cast<Eigen::Index>(space.total_dim());
  Matrix cols(d, static_cast<Eigen::Index>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i].space() != space) throw Error(Errc::dimension_mismatch, "basis vectors live on different spaces");
    cols.col(static_cast<Eigen::Index>(i)) = basis[i].amplitudes();
  }
  auto n = static_cast<Eigen::Index>(basis.size());
  Real gram = (cols.adjoint() * cols - Matrix::Identity(n, n)).cwiseAbs().maxCoeff();
  Real completeness = (cols * cols.adjoint() - Matrix::Identity(d, d)).cwiseAbs().maxCoeff();
  return std::max(gram, completeness);
}

inline void require_complete_basis(const std::vector<StateVector>& basis) {
  Real defect = basis_defect(basis);
  if (defect > kValidityTol)
    throw Error(Errc::invalid_basis, "basis is not orthonormal and complete (defect " + std::to_string(defect) + ")");
}

inline std::vector<StateVector> computational_basis(const TensorSpace& space) {
  std::vector<StateVector> out;
  for (std::size_t i = 0; i < space.total_dim(); ++i) out.push_back(StateVector::basis(space, i));
  return out;
}

/// |<n|alpha>|^2
inline Real born_probability(const StateVector& n, const StateVector& alpha) {
  if (n.space() != alpha.space()) throw Error(Errc::dimension_mismatch, "born_probability operands");
  return std::norm(n.inner(alpha));
}

/// A = sum_n |n> a_n <n| over an orthonormal complete basis.
inline Observable build_observable(const std::vector<StateVector>& basis, std::span<const Real> scale) {
  if (basis.size() != scale.size()) throw Error(Errc::dimension_mismatch, "basis and scale lengths differ");
  require_complete_basis(basis);
  const auto& space = basis.front().space();
  auto d = static_cast<Eigen::Index>(space.total_dim());
  Matrix a = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Vector& v = basis[i].amplitudes();
    a += scale[i] * (v * v.adjoint());
  }
  Observable obs(space, 0.5 * (a + a.adjoint()));
  obs.eigensystem_ = Observable::Eigensystem{basis, std::vector<Real>(scale.begin(), scale.end())};
  return obs;
}

inline Real expectation(const Observable& a, const StateVector& psi) {
  if (a.space() != psi.space()) throw Error(Errc::dimension_mismatch, "expectation operands");
  return psi.amplitudes().dot(a.matrix() * psi.amplitudes()).real() / psi.amplitudes().squaredNorm();
}

/// tr(A rho) / tr(rho)
inline Real expectation(const Observable& a, const DensityOperator& rho) {
  if (a.space() != rho.space()) throw Error(Errc::dimension_mismatch, "expectation operands");
  return (a.matrix() * rho.matrix()).trace().real() / rho.matrix().trace().real();
}

/// Embeds an operator on the named subsystems (in `local`'s order) into the
/// full space as op (x) 1.
inline Matrix lift(const Matrix& op, const TensorSpace& local, const TensorSpace& full) {
  detail::require_square(op, local.total_dim(), "local operator");
  auto labels = local.labels();
  for (const auto& s : local.subsystems())
    if (full.dim(s.label) != s.dim) throw Error(Errc::dimension_mismatch, "subsystem '" + s.label + "' dimension");
  auto sp = detail::split(full, labels);
  auto d = static_cast<Eigen::Index>(full.total_dim());
  Matrix out = Matrix::Zero(d, d);
  for (std::size_t i = 0; i < sp.selected_dim; ++i)
    for (std::size_t j = 0; j < sp.selected_dim; ++j) {
      Complex v = op(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (v == Complex{}) continue;
      for (std::size_t r = 0; r < sp.rest_dim; ++r)
        out(static_cast<Eigen::Index>(sp.global[i * sp.rest_dim + r]), static_cast<Eigen::Index>(sp.global[j * sp.rest_dim + r])) = v;
    }
  return out;
}

/// Applies `op` to the named subsystems of psi without forming the full matrix.
inline StateVector apply_local(const StateVector& psi, std::span<const std::string> labels, const Matrix& op) {
  auto sp = detail::split(psi.space(), labels);
  detail::require_square(op, sp.selected_dim, "local operator");
  auto ds = static_cast<Eigen::Index>(sp.selected_dim), dr = static_cast<Eigen::Index>(sp.rest_dim);
  Matrix m(ds, dr);
  for (Eigen::Index s = 0; s < ds; ++s)
    for (Eigen::Index r = 0; r < dr; ++r) m(s, r) = psi.amplitudes()(static_cast<Eigen::Index>(sp.global[s * dr + r]));
  Matrix out = op * m;
  Vector v(psi.amplitudes().size());
  for (Eigen::Index s = 0; s < ds; ++s)
    for (Eigen::Index r = 0; r < dr; ++r) v(static_cast<Eigen::Index>(sp.global[s * dr + r])) = out(s, r);
  return {psi.space(), std::move(v)};
}

namespace detail {

inline std::vector<std::string> checked_keep(const TensorSpace& space, std::span<const std::string> keep) {
  if (keep.empty()) throw Error(Errc::invalid_argument, "partial trace must keep at least one subsystem");
  std::vector<std::string> ordered;
  for (const auto& s : space.subsystems())
    if (std::find(keep.begin(), keep.end(), s.label) != keep.end()) ordered.push_back(s.label);
  for (const auto& l : keep) space.position(l);
  if (ordered.size() != keep.size()) throw Error(Errc::label_collision, "label repeated in keep set");
  if (ordered.size() == space.rank()) throw Error(Errc::invalid_argument, "keep set must be a proper subset of the labels");
  return ordered;
}

/// Amplitudes arranged as a (kept x traced) matrix.
inline Matrix bipartite_matrix(const StateVector& psi, const Split& sp) {
  Matrix m(static_cast<Eigen::Index>(sp.selected_dim), static_cast<Eigen::Index>(sp.rest_dim));
  for (std::size_t s = 0; s < sp.selected_dim; ++s)
    for (std::size_t r = 0; r < sp.rest_dim; ++r)
      m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(r)) = psi.amplitudes()(static_cast<Eigen::Index>(sp.global[s * sp.rest_dim + r]));
  return m;
}

}  // namespace detail

/// Reduced density operator on `keep` (kept subsystems stay in space order).
inline DensityOperator partial_trace(const StateVector& psi, std::span<const std::string> keep) {
  auto kept = detail::checked_keep(psi.space(), keep);
  auto sp = detail::split(psi.space(), kept);
  Matrix m = detail::bipartite_matrix(psi, sp);
  Matrix rho = m * m.adjoint();
  return {psi.space().restrict_to(kept), Matrix(0.5 * (rho + rho.adjoint()))};
}

inline DensityOperator partial_trace(const DensityOperator& rho, std::span<const std::string> keep) {
  auto kept = detail::checked_keep(rho.space(), keep);
  auto sp = detail::split(rho.space(), kept);
  auto dk = static_cast<Eigen::Index>(sp.selected_dim);
  Matrix out = Matrix::Zero(dk, dk);
  for (std::size_t i = 0; i < sp.selected_dim; ++i)
    for (std::size_t j = 0; j < sp.selected_dim; ++j) {
      Complex acc{};
      for (std::size_t e = 0; e < sp.rest_dim; ++e)
        acc += rho.matrix()(static_cast<Eigen::Index>(sp.global[i * sp.rest_dim + e]), static_cast<Eigen::Index>(sp.global[j * sp.rest_dim + e]));
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc;
    }
  return {rho.space().restrict_to(kept), Matrix(0.5 * (out + out.adjoint()))};
}

inline DensityOperator partial_trace(const StateVector& psi, std::initializer_list<std::string> keep) {
  std::vector<std::string> k(keep);
  return partial_trace(psi, std::span<const std::string>(k));
}

inline DensityOperator partial_trace(const DensityOperator& rho, std::initializer_list<std::string> keep) {
  std::vector<std::string> k(keep);
  return partial_trace(rho, std::span<const std::string>(k));
}

}  // namespace decolab
