#pragma once

// Dynamical measurement models: von Neumann pre-measurement, observational
// chains of intermediary systems, and the three-step branching/recoherence
// evolution. Every step here is a global unitary.

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "decolab/dynamics.hpp"
#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/types.hpp"

namespace decolab {

/// Orthonormal basis of C^d (as columns) whose first column is `first`,
/// completed by Gram–Schmidt over the standard basis in index order.
inline Matrix complete_basis(const Vector& first) {
  const auto d = first.size();
  if (std::abs(first.norm() - 1.0) > kValidityTol) throw Error(Errc::invalid_argument, "complete_basis needs a unit vector");
  Matrix q(d, d);
  q.col(0) = first;
  Eigen::Index filled = 1;
  for (Eigen::Index e = 0; e < d && filled < d; ++e) {
    Vector v = Vector::Unit(d, e);
    // Two passes keep the result orthogonal to working precision.
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < filled; ++j) v -= q.col(j).dot(v) * q.col(j);
    Real n = v.norm();
    if (n < 1e-8) continue;
    q.col(filled++) = v / n;
  }
  return q;
}

/// sum_n |target_n><control_n| (x) V_n on (control, target). With targets
/// equal to the control basis this is the usual controlled unitary.
inline Matrix controlled_unitary(const std::vector<Vector>& control_in, const std::vector<Vector>& control_out,
                                 const std::vector<Matrix>& ops) {
  if (control_in.size() != ops.size() || control_out.size() != ops.size())
    throw Error(Errc::dimension_mismatch, "controlled_unitary arity");
  const auto dc = control_in.front().size();
  const auto dt = ops.front().rows();
  Matrix u = Matrix::Zero(dc * dt, dc * dt);
  for (std::size_t n = 0; n < ops.size(); ++n) u += kron(control_out[n] * control_in[n].adjoint(), ops[n]);
  return u;
}

/// A single-subsystem apparatus with a ready state |Phi_0> and one pointer
/// state |Phi_n> per measured outcome.
class ApparatusModel {
 public:
  ApparatusModel(StateVector ready, std::vector<StateVector> pointers)
      : ready_(std::move(ready)), pointers_(std::move(pointers)) {
    if (ready_.space().rank() != 1) throw Error(Errc::invalid_argument, "apparatus must be a single subsystem");
    if (pointers_.empty()) throw Error(Errc::invalid_argument, "apparatus needs at least one pointer state");
    if (!ready_.is_normalized()) throw Error(Errc::invalid_argument, "apparatus ready state is not normalized");
    auto n = static_cast<Eigen::Index>(pointers_.size());
    overlaps_ = Matrix(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& p = pointers_[static_cast<std::size_t>(i)];
      if (p.space() != ready_.space()) throw Error(Errc::dimension_mismatch, "pointer state space");
      if (!p.is_normalized()) throw Error(Errc::invalid_argument, "pointer state is not normalized");
      for (Eigen::Index j = 0; j < n; ++j) overlaps_(i, j) = p.inner(pointers_[static_cast<std::size_t>(j)]);
    }
  }

  /// Ready state |0> of a (n + 1)-dimensional apparatus and n pointer states
  /// in span{|1>..|n>} with pairwise overlap <Phi_m|Phi_n> = g.
  static ApparatusModel with_overlap(const std::string& label, std::size_t outcomes, Real g) {
    if (outcomes == 0) throw Error(Errc::invalid_argument, "apparatus needs at least one outcome");
    auto n = static_cast<Eigen::Index>(outcomes);
    if (outcomes > 1 && (g > 1.0 || g < -1.0 / static_cast<Real>(outcomes - 1)))
      throw Error(Errc::invalid_argument, "pointer overlap " + std::to_string(g) + " admits no pointer states");
    RealMatrix gram = RealMatrix::Constant(n, n, g);
    gram.diagonal().setOnes();
    Eigen::SelfAdjointEigenSolver<RealMatrix> es(gram);
    RealVector roots = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    RealMatrix sqrt_gram = es.eigenvectors() * roots.asDiagonal() * es.eigenvectors().transpose();

    TensorSpace space(label, outcomes + 1);
    std::vector<StateVector> pointers;
    for (Eigen::Index k = 0; k < n; ++k) {
      Vector v = Vector::Zero(n + 1);
      v.tail(n) = sqrt_gram.col(k).cast<Complex>();
      pointers.emplace_back(space, v / v.norm());
    }
    return {StateVector::basis(space, 0), std::move(pointers)};
  }

  const TensorSpace& space() const { return ready_.space(); }
  const std::string& label() const { return ready_.space().subsystems().front().label; }
  const StateVector& ready() const { return ready_; }
  const std::vector<StateVector>& pointers() const { return pointers_; }
  const Matrix& overlaps() const { return overlaps_; }
  std::size_t outcomes() const { return pointers_.size(); }

  /// Unitary V_n with V_n |Phi_0> = |Phi_n>.
  Matrix shift(std::size_t n) const {
    return complete_basis(pointers_.at(n).amplitudes()) * complete_basis(ready_.amplitudes()).adjoint();
  }

  Real ready_fidelity(const DensityOperator& reduced) const {
    return ready_.amplitudes().dot(reduced.matrix() * ready_.amplitudes()).real();
  }

 private:
  StateVector ready_;
  std::vector<StateVector> pointers_;
  Matrix overlaps_;
};

/// U = sum_n |m_n><n| (x) V_n on (system, apparatus), where |m_n> = |n> for an
/// ideal measurement or an orthonormal set of post-measurement states.
inline Matrix von_neumann_unitary(const std::vector<StateVector>& basis, const ApparatusModel& app,
                                  const std::vector<StateVector>* post_states = nullptr) {
  require_complete_basis(basis);
  if (basis.size() != app.outcomes())
    throw Error(Errc::dimension_mismatch, "apparatus has " + std::to_string(app.outcomes()) + " pointer states for " +
                                              std::to_string(basis.size()) + " outcomes");
  std::vector<Vector> in, out;
  std::vector<Matrix> ops;
  for (std::size_t n = 0; n < basis.size(); ++n) {
    in.push_back(basis[n].amplitudes());
    ops.push_back(app.shift(n));
  }
  if (post_states) {
    if (post_states->size() != basis.size()) throw Error(Errc::dimension_mismatch, "post-measurement state count");
    require_complete_basis(*post_states);
    for (const auto& m : *post_states) out.push_back(m.amplitudes());
  } else {
    out = in;
  }
  return controlled_unitary(in, out, ops);
}

namespace detail {

inline std::vector<std::string> with_label(std::vector<std::string> labels, const std::string& extra) {
  labels.push_back(extra);
  return labels;
}

inline void require_ready(const StateVector& joint, const ApparatusModel& app) {
  std::vector<std::string> keep{app.label()};
  if (app.ready_fidelity(partial_trace(joint, keep)) < 1.0 - kValidityTol)
    throw Error(Errc::invalid_argument, "apparatus '" + app.label() + "' is not in its ready state");
}

}  // namespace detail

/// Applies the von Neumann interaction to a joint state whose apparatus
/// factor is ready: sum_n c_n |n>|Phi_0> -> sum_n c_n |n>|Phi_n>.
inline StateVector premeasure_joint(const StateVector& joint, const std::vector<StateVector>& basis, const ApparatusModel& app,
                                    const std::vector<StateVector>* post_states = nullptr) {
  detail::require_ready(joint, app);
  Matrix u = von_neumann_unitary(basis, app, post_states);
  return apply_local(joint, detail::with_label(basis.front().space().labels(), app.label()), u);
}

inline StateVector premeasure(const StateVector& system, const ApparatusModel& app, const std::vector<StateVector>& basis,
                              const std::vector<StateVector>* post_states = nullptr) {
  if (basis.empty() || basis.front().space() != system.space()) throw Error(Errc::dimension_mismatch, "basis and system");
  return premeasure_joint(tensor(system, app.ready()), basis, app, post_states);
}

struct ChainSpec {
  std::vector<StateVector> system_basis;
  std::vector<ApparatusModel> links;  // chi^(1) .. chi^(K)
  std::optional<ApparatusModel> observer;
  std::vector<std::size_t> activation_order;  // empty means 1..K in order
};

/// Joint states of system, links and observer: the initial product state,
/// one state per link activation, and a final observer step when an observer
/// is present. Every link records the system basis index n.
inline std::vector<StateVector> chain_propagate(const ChainSpec& spec, const StateVector& initial_system) {
  if (spec.system_basis.empty() || spec.system_basis.front().space() != initial_system.space())
    throw Error(Errc::dimension_mismatch, "chain system basis and initial state");
  require_complete_basis(spec.system_basis);

  std::vector<std::size_t> order = spec.activation_order;
  if (order.empty())
    for (std::size_t i = 0; i < spec.links.size(); ++i) order.push_back(i);
  std::vector<bool> used(spec.links.size(), false);
  for (auto i : order) {
    if (i >= spec.links.size()) throw Error(Errc::invalid_argument, "activation order names link " + std::to_string(i + 1) + " which does not exist");
    if (used[i]) throw Error(Errc::invalid_argument, "link " + std::to_string(i + 1) + " activated twice");
    used[i] = true;
  }

  StateVector joint = initial_system;
  for (const auto& link : spec.links) joint = tensor(joint, link.ready());
  if (spec.observer) joint = tensor(joint, spec.observer->ready());

  std::vector<StateVector> states{joint};
  for (auto i : order) {
    joint = premeasure_joint(joint, spec.system_basis, spec.links[i]);
    states.push_back(joint);
  }
  if (spec.observer) {
    joint = premeasure_joint(joint, spec.system_basis, *spec.observer);
    states.push_back(joint);
  }
  return states;
}

/// The three unitaries of the branching/recoherence sequence.
struct RecoherenceSteps {
  Matrix apparatus_entangle;    // on (system, apparatus)
  Matrix environment_entangle;  // on (apparatus, environment)
  Matrix apparatus_reset;       // on (apparatus, environment)

  /// Permutation realization for an n-state system, an apparatus of
  /// dimension >= n + 1 (ready |0>, pointer n at |n+1>) and an environment
  /// of dimension >= n (ready |0>; records |n+1> when room allows, else |n>).
  static RecoherenceSteps standard(std::size_t n, std::size_t app_dim, std::size_t env_dim) {
    if (app_dim < n + 1) throw Error(Errc::invalid_argument, "apparatus dimension must be at least outcomes + 1");
    if (env_dim < n) throw Error(Errc::invalid_argument, "environment dimension must be at least the number of outcomes");
    const std::size_t shift = env_dim >= n + 1 ? 1 : 0;
    auto pointer = [](std::size_t k) { return k + 1; };
    auto record = [&](std::size_t k) { return k + shift; };

    auto swap_matrix = [](std::size_t dim, std::size_t a, std::size_t b) {
      Eigen::PermutationMatrix<Eigen::Dynamic> perm(static_cast<Eigen::Index>(dim));
      perm.setIdentity();
      perm.applyTranspositionOnTheRight(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      return Matrix(perm.toDenseMatrix().cast<Complex>());
    };

    auto da = static_cast<Eigen::Index>(app_dim), de = static_cast<Eigen::Index>(env_dim);
    RecoherenceSteps steps;

    std::vector<Vector> sys_basis;
    std::vector<Matrix> app_ops;
    for (std::size_t k = 0; k < n; ++k) {
      sys_basis.push_back(Vector::Unit(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k)));
      app_ops.push_back(swap_matrix(app_dim, 0, pointer(k)));
    }
    steps.apparatus_entangle = controlled_unitary(sys_basis, sys_basis, app_ops);

    std::vector<Vector> app_basis;
    std::vector<Matrix> env_ops;
    for (std::size_t a = 0; a < app_dim; ++a) {
      app_basis.push_back(Vector::Unit(da, static_cast<Eigen::Index>(a)));
      env_ops.push_back(a >= 1 && a <= n ? swap_matrix(env_dim, 0, record(a - 1)) : Matrix(Matrix::Identity(de, de)));
    }
    steps.environment_entangle = controlled_unitary(app_basis, app_basis, env_ops);

    // |Phi_k>|r_k> <-> |Phi_0>|r_k>
    Eigen::PermutationMatrix<Eigen::Dynamic> reset(da * de);
    reset.setIdentity();
    for (std::size_t k = 0; k < n; ++k)
      reset.applyTranspositionOnTheRight(static_cast<Eigen::Index>(pointer(k) * env_dim + record(k)),
                                         static_cast<Eigen::Index>(record(k)));
    steps.apparatus_reset = reset.toDenseMatrix().cast<Complex>();
    return steps;
  }
};

inline constexpr const char* kSystemLabel = "system";
inline constexpr const char* kApparatusLabel = "apparatus";
inline constexpr const char* kEnvironmentLabel = "environment";

/// (|a>+|b>)|phi0>|chi0> -> (|a>|phiA>+|b>|phiB>)|chi0>
///                       -> |a>|phiA>|chiA> + |b>|phiB>|chiB>
///                       -> (|a>|chiA> + |b>|chiB>)|phi0>
/// on subsystems labeled "system", "apparatus" and "environment".
inline std::array<StateVector, 3> branch_and_recohere(const StateVector& initial, const RecoherenceSteps& steps) {
  const std::vector<std::string> sys_app{kSystemLabel, kApparatusLabel};
  const std::vector<std::string> app_env{kApparatusLabel, kEnvironmentLabel};
  const auto& space = initial.space();
  if (space.rank() != 3) throw Error(Errc::invalid_argument, "branch_and_recohere expects system, apparatus and environment");
  const auto ds = space.dim(kSystemLabel), da = space.dim(kApparatusLabel), de = space.dim(kEnvironmentLabel);

  detail::require_square(steps.apparatus_entangle, ds * da, "apparatus entangling step");
  detail::require_square(steps.environment_entangle, da * de, "environment entangling step");
  detail::require_square(steps.apparatus_reset, da * de, "apparatus reset step");
  require_unitary(steps.apparatus_entangle, "apparatus entangling step");
  require_unitary(steps.environment_entangle, "environment entangling step");
  require_unitary(steps.apparatus_reset, "apparatus reset step");

  StateVector s1 = apply_local(initial, sys_app, steps.apparatus_entangle);
  StateVector s2 = apply_local(s1, app_env, steps.environment_entangle);
  StateVector s3 = apply_local(s2, app_env, steps.apparatus_reset);
  return {std::move(s1), std::move(s2), std::move(s3)};
}

inline std::array<StateVector, 3> branch_and_recohere(const StateVector& initial) {
  const auto& space = initial.space();
  return branch_and_recohere(initial, RecoherenceSteps::standard(space.dim(kSystemLabel), space.dim(kApparatusLabel),
                                                                 space.dim(kEnvironmentLabel)));
}

}  // namespace decolab
