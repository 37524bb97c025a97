#pragma once

// Entropy bookkeeping of ideal measurements: a classical copy-and-reset cycle,
// a quantum measurement completed by collapse, and unitary branching with
// apparatus recoherence. All entropies are in nats (k = 1).

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "decolab/entanglement.hpp"
#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/histories.hpp"
#include "decolab/measurement.hpp"
#include "decolab/types.hpp"

namespace decolab {

/// Probability table over a product of finite label sets, row-major with the
/// first variable varying slowest.
class ClassicalJoint {
 public:
  ClassicalJoint(TensorSpace space, std::vector<Real> probabilities)
      : space_(std::move(space)), probabilities_(std::move(probabilities)) {
    if (probabilities_.size() != space_.total_dim()) throw Error(Errc::dimension_mismatch, "probability table size");
    Real total = 0.0;
    for (Real p : probabilities_) {
      if (p < 0.0) throw Error(Errc::invalid_argument, "negative probability in joint table");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-12) throw Error(Errc::invalid_argument, "joint table sums to " + std::to_string(total));
  }

  /// Product distribution with `p` on the first variable and every other
  /// variable fixed at value 0.
  static ClassicalJoint prepared(TensorSpace space, std::span<const Real> p) {
    const auto& first = space.subsystems().front();
    if (p.size() != first.dim) throw Error(Errc::dimension_mismatch, "distribution over '" + first.label + "'");
    std::vector<Real> table(space.total_dim(), 0.0);
    const std::size_t stride = space.total_dim() / first.dim;
    for (std::size_t i = 0; i < p.size(); ++i) table[i * stride] = p[i];
    return {std::move(space), std::move(table)};
  }

  const TensorSpace& space() const { return space_; }
  const std::vector<Real>& probabilities() const { return probabilities_; }

  Real entropy() const { return shannon_entropy(probabilities_); }

  std::vector<Real> marginal(std::string_view label) const {
    const auto pos = space_.position(label);
    std::vector<Real> out(space_.subsystems()[pos].dim, 0.0);
    for (std::size_t i = 0; i < probabilities_.size(); ++i) out[space_.multi_index(i)[pos]] += probabilities_[i];
    return out;
  }

  Real marginal_entropy(std::string_view label) const { return shannon_entropy(marginal(label)); }

  /// Sum of the single-variable entropies (correlations dropped).
  Real additive_entropy() const {
    Real s = 0.0;
    for (const auto& sub : space_.subsystems()) s += marginal_entropy(sub.label);
    return s;
  }

  /// Pushes the table through a deterministic map of configurations, which
  /// must be a bijection.
  ClassicalJoint apply(const std::function<std::vector<std::size_t>(const std::vector<std::size_t>&)>& map) const {
    std::vector<Real> out(probabilities_.size(), 0.0);
    std::vector<bool> hit(probabilities_.size(), false);
    for (std::size_t i = 0; i < probabilities_.size(); ++i) {
      std::size_t j = space_.flat_index(map(space_.multi_index(i)));
      if (hit[j]) throw Error(Errc::invalid_argument, "deterministic step is not a bijection");
      hit[j] = true;
      out[j] = probabilities_[i];
    }
    return {space_, std::move(out)};
  }

  /// (P(label = value), table conditioned on it)
  std::pair<Real, ClassicalJoint> condition(std::string_view label, std::size_t value) const {
    const auto pos = space_.position(label);
    std::vector<Real> out(probabilities_.size(), 0.0);
    Real weight = 0.0;
    for (std::size_t i = 0; i < probabilities_.size(); ++i)
      if (space_.multi_index(i)[pos] == value) {
        out[i] = probabilities_[i];
        weight += probabilities_[i];
      }
    if (weight <= 0.0) throw Error(Errc::zero_probability, "conditioning on an impossible value");
    for (Real& x : out) x /= weight;
    return {weight, ClassicalJoint(space_, std::move(out))};
  }

 private:
  TensorSpace space_;
  std::vector<Real> probabilities_;
};

struct LedgerRow {
  std::string step;
  Real s_ensemble = 0.0;   // joint entropy of the full state
  Real s_physical = 0.0;   // sum of subsystem entropies, correlations neglected
  Real s_physical_controllable_excluded = 0.0;  // s_physical without the measured system's own entropy
  Real information = 0.0;  // held by the observer
  Real s_system = 0.0;
  Real s_memory = 0.0;
  Real s_environment = 0.0;
};

struct LedgerOptions {
  /// When false, correlations count as relevant and the physical entropy is
  /// reported as the joint (ensemble) entropy.
  bool correlations_irrelevant = true;
};

inline constexpr const char* kMemoryLabel = "memory";

namespace detail {

inline void require_nondegenerate(std::span<const Real> p) {
  RealVector v = Eigen::Map<const RealVector>(p.data(), static_cast<Eigen::Index>(p.size()));
  require_simplex(v);
  std::size_t positive = 0;
  for (Real x : p)
    if (x > 0.0) ++positive;
  if (positive < 2) throw Error(Errc::invalid_argument, "nothing to measure: fewer than two outcomes have positive probability");
}

inline LedgerRow finish_row(LedgerRow row, const LedgerOptions& opt) {
  row.s_physical = row.s_system + row.s_memory + row.s_environment;
  row.s_physical_controllable_excluded = row.s_memory + row.s_environment;
  if (!opt.correlations_irrelevant) {
    row.s_physical = row.s_ensemble;
    row.s_physical_controllable_excluded = row.s_ensemble - row.s_system;
  }
  return row;
}

inline LedgerRow classical_row(std::string step, const ClassicalJoint& joint, Real information, const LedgerOptions& opt) {
  LedgerRow row{std::move(step), joint.entropy(), 0.0, 0.0, information, joint.marginal_entropy(kSystemLabel),
                joint.marginal_entropy(kMemoryLabel), joint.marginal_entropy(kEnvironmentLabel)};
  return finish_row(std::move(row), opt);
}

/// Probability-weighted average of per-branch rows after conditioning on the
/// memory ("or"); the information gained is the memory entropy.
inline LedgerRow weighted_row(std::string step, const std::vector<std::pair<Real, LedgerRow>>& branches, Real information) {
  LedgerRow out{std::move(step)};
  for (const auto& [w, r] : branches) {
    out.s_ensemble += w * r.s_ensemble;
    out.s_physical += w * r.s_physical;
    out.s_physical_controllable_excluded += w * r.s_physical_controllable_excluded;
    out.s_system += w * r.s_system;
    out.s_memory += w * r.s_memory;
    out.s_environment += w * r.s_environment;
  }
  out.information = information;
  return out;
}

}  // namespace detail

/// Tables of the classical cycle: initial, after the deterministic copy into
/// the memory, and after the reset that moves the record into the environment.
struct ClassicalCycle {
  ClassicalJoint initial;
  ClassicalJoint measured;
  ClassicalJoint reset;
};

/// Variables: system (n values), memory (ready 0, record k + 1) and
/// environment (ready 0, trace k + 1).
inline ClassicalCycle classical_cycle(std::span<const Real> p_system) {
  detail::require_nondegenerate(p_system);
  const std::size_t n = p_system.size();
  TensorSpace space({{kSystemLabel, n}, {kMemoryLabel, n + 1}, {kEnvironmentLabel, n + 1}});
  ClassicalJoint initial = ClassicalJoint::prepared(space, p_system);
  // (s, 0, e) <-> (s, s+1, e)
  ClassicalJoint measured = initial.apply([](std::vector<std::size_t> x) {
    if (x[1] == 0) x[1] = x[0] + 1;
    else if (x[1] == x[0] + 1) x[1] = 0;
    return x;
  });
  // (s, m, 0) <-> (s, 0, m) for m >= 1
  ClassicalJoint reset = measured.apply([](std::vector<std::size_t> x) {
    if (x[1] >= 1 && x[2] == 0) std::swap(x[1], x[2]);
    else if (x[1] == 0 && x[2] >= 1) std::swap(x[1], x[2]);
    return x;
  });
  return {std::move(initial), std::move(measured), std::move(reset)};
}

/// Rows: initial, measured (before "or"), observed (after "or"), reset.
inline std::vector<LedgerRow> classical_ledger(std::span<const Real> p_system, const LedgerOptions& opt = {}) {
  ClassicalCycle cycle = classical_cycle(p_system);
  std::vector<LedgerRow> rows;
  rows.push_back(detail::classical_row("initial", cycle.initial, 0.0, opt));
  rows.push_back(detail::classical_row("measured", cycle.measured, 0.0, opt));

  std::vector<std::pair<Real, LedgerRow>> branches;
  for (std::size_t k = 0; k < p_system.size(); ++k) {
    if (p_system[k] <= 0.0) continue;
    auto [w, cond] = cycle.measured.condition(kMemoryLabel, k + 1);
    branches.emplace_back(w, detail::classical_row("", cond, 0.0, opt));
  }
  rows.push_back(detail::weighted_row("observed", branches, cycle.measured.marginal_entropy(kMemoryLabel)));
  rows.push_back(detail::classical_row("reset", cycle.reset, 0.0, opt));
  return rows;
}

namespace detail {

inline LedgerRow quantum_row(std::string step, const DensityOperator& rho, Real information, const LedgerOptions& opt) {
  auto sub = [&](const char* label) -> Real {
    if (!rho.space().contains(label)) return 0.0;
    if (rho.space().rank() == 1) return ensemble_entropy(rho);
    std::vector<std::string> keep{label};
    return ensemble_entropy(partial_trace(rho, keep));
  };
  LedgerRow row{std::move(step), ensemble_entropy(rho), 0.0, 0.0, information, sub(kSystemLabel), sub(kMemoryLabel), sub(kEnvironmentLabel)};
  if (rho.space().contains(kApparatusLabel)) row.s_memory = sub(kApparatusLabel);
  return finish_row(std::move(row), opt);
}

inline StateVector amplitude_state(const TensorSpace& space, std::span<const Complex> c) {
  Vector v = Eigen::Map<const Vector>(c.data(), static_cast<Eigen::Index>(c.size()));
  StateVector psi(space, v);
  if (!(psi.norm() > 0.0)) throw Error(Errc::invalid_argument, "zero amplitude vector");
  if (!psi.is_normalized()) throw Error(Errc::invalid_argument, "amplitudes have norm " + std::to_string(psi.norm()));
  if (c.size() < 2) throw Error(Errc::invalid_argument, "need at least two components");
  return psi;
}

}  // namespace detail

/// Rows: initial (pure), premeasured (entangled with the memory), mixture
/// (superposition replaced by the ensemble of its branches), observed.
inline std::vector<LedgerRow> quantum_collapse_ledger(std::span<const Complex> c, const LedgerOptions& opt = {}) {
  const std::size_t n = c.size();
  TensorSpace sys(kSystemLabel, n);
  StateVector psi = detail::amplitude_state(sys, c);
  auto basis = computational_basis(sys);
  auto memory = ApparatusModel::with_overlap(kMemoryLabel, n, 0.0);

  StateVector initial = tensor(psi, memory.ready());
  StateVector premeasured = premeasure(psi, memory, basis);
  DensityOperator rho_pre = DensityOperator::pure(premeasured);
  ProjectorSet branches = ProjectorSet::lifted(ProjectorSet::from_basis(basis), premeasured.space());
  DensityOperator mixture = decohere_projectors(rho_pre, branches);

  std::vector<LedgerRow> rows;
  rows.push_back(detail::quantum_row("initial", DensityOperator::pure(initial), 0.0, opt));
  rows.push_back(detail::quantum_row("premeasured", rho_pre, 0.0, opt));
  rows.push_back(detail::quantum_row("mixture", mixture, 0.0, opt));

  std::vector<std::pair<Real, LedgerRow>> observed;
  std::vector<Real> weights;
  for (std::size_t k = 0; k < n; ++k) {
    Real w = (branches[k] * mixture.matrix()).trace().real();
    if (w <= kNegligibleOutcome) continue;
    auto projected = luders_project(mixture, branches[k]);
    observed.emplace_back(projected.probability, detail::quantum_row("", projected.state, 0.0, opt));
    weights.push_back(projected.probability);
  }
  rows.push_back(detail::weighted_row("observed", observed, shannon_entropy(weights)));
  return rows;
}

/// Rows along the unitary branching/recoherence sequence on system,
/// apparatus and environment; the global state stays pure throughout.
inline std::vector<LedgerRow> branching_ledger(std::span<const Complex> c, std::size_t env_dim, const LedgerOptions& opt = {}) {
  const std::size_t n = c.size();
  if (env_dim < n) throw Error(Errc::invalid_argument, "environment dimension " + std::to_string(env_dim) + " cannot hold " + std::to_string(n) + " orthogonal records");
  StateVector psi = detail::amplitude_state(TensorSpace(kSystemLabel, n), c);
  TensorSpace app(kApparatusLabel, n + 1), env(kEnvironmentLabel, env_dim);
  StateVector initial = tensor(tensor(psi, StateVector::basis(app, 0)), StateVector::basis(env, 0));
  auto steps = branch_and_recohere(initial);

  std::vector<LedgerRow> rows;
  rows.push_back(detail::quantum_row("initial", DensityOperator::pure(initial), 0.0, opt));
  rows.push_back(detail::quantum_row("apparatus_entangled", DensityOperator::pure(steps[0]), 0.0, opt));
  rows.push_back(detail::quantum_row("environment_entangled", DensityOperator::pure(steps[1]), 0.0, opt));
  rows.push_back(detail::quantum_row("apparatus_reset", DensityOperator::pure(steps[2]), 0.0, opt));
  return rows;
}

}  // namespace decolab
