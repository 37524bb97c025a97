#pragma once

// Coarse-grained layer: projector decoherence, the Pauli-type master
// equation, probabilities of projector histories and their consistency, and
// the squared norm of Born-deviant branches in N-fold repeated measurements.

#include <bit>
#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "decolab/dynamics.hpp"
#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/types.hpp"

namespace decolab {

/// Orthogonal projectors P_n with P_n P_m = delta_nm P_n and sum_n P_n = 1.
class ProjectorSet {
 public:
  ProjectorSet(TensorSpace space, std::vector<Matrix> projectors, std::vector<std::string> labels = {})
      : space_(std::move(space)), projectors_(std::move(projectors)), labels_(std::move(labels)) {
    if (projectors_.empty()) throw Error(Errc::invalid_projectors, "empty projector set");
    if (labels_.empty())
      for (std::size_t i = 0; i < projectors_.size(); ++i) labels_.push_back(std::to_string(i));
    if (labels_.size() != projectors_.size()) throw Error(Errc::invalid_projectors, "label count differs from projector count");
    auto d = static_cast<Eigen::Index>(space_.total_dim());
    Matrix sum = Matrix::Zero(d, d);
    for (std::size_t m = 0; m < projectors_.size(); ++m) {
      require_projector(projectors_[m], space_.total_dim());
      for (std::size_t n = 0; n < m; ++n)
        if ((projectors_[m] * projectors_[n]).cwiseAbs().maxCoeff() > kValidityTol)
          throw Error(Errc::invalid_projectors, "projectors " + labels_[n] + " and " + labels_[m] + " are not orthogonal");
      sum += projectors_[m];
    }
    if ((sum - Matrix::Identity(d, d)).cwiseAbs().maxCoeff() > kValidityTol)
      throw Error(Errc::invalid_projectors, "projectors do not sum to the identity");
  }

  /// Rank-one projectors |n><n| of an orthonormal complete basis.
  static ProjectorSet from_basis(const std::vector<StateVector>& basis) {
    require_complete_basis(basis);
    std::vector<Matrix> ps;
    for (const auto& b : basis) ps.emplace_back(b.amplitudes() * b.amplitudes().adjoint());
    return {basis.front().space(), std::move(ps)};
  }

  /// P_n (x) 1 for a projector set on some of the subsystems of `full`.
  static ProjectorSet lifted(const ProjectorSet& local, const TensorSpace& full) {
    std::vector<Matrix> ps;
    for (const auto& p : local.projectors()) ps.push_back(lift(p, local.space(), full));
    return {full, std::move(ps), local.labels()};
  }

  const TensorSpace& space() const { return space_; }
  const std::vector<Matrix>& projectors() const { return projectors_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return projectors_.size(); }
  const Matrix& operator[](std::size_t n) const { return projectors_.at(n); }

 private:
  TensorSpace space_;
  std::vector<Matrix> projectors_;
  std::vector<std::string> labels_;
};

/// sum_n P_n rho P_n
inline DensityOperator decohere_projectors(const DensityOperator& rho, const ProjectorSet& set) {
  if (rho.space() != set.space()) throw Error(Errc::dimension_mismatch, "density operator and projector set");
  Matrix out = Matrix::Zero(rho.matrix().rows(), rho.matrix().cols());
  for (const auto& p : set.projectors()) out += p * rho.matrix() * p;
  return {rho.space(), Matrix(0.5 * (out + out.adjoint()))};
}

/// Transition rates A_nm >= 0 (per unit time) with zero diagonal. The master
/// equation p_n' = sum_m A_nm (p_m - p_n) conserves total probability only
/// when every row sum equals the matching column sum, so that is required.
class RateMatrix {
 public:
  explicit RateMatrix(RealMatrix rates) : rates_(std::move(rates)) {
    if (rates_.rows() != rates_.cols() || rates_.rows() == 0) throw Error(Errc::invalid_argument, "rate matrix must be square");
    for (Eigen::Index n = 0; n < rates_.rows(); ++n)
      for (Eigen::Index m = 0; m < rates_.cols(); ++m) {
        if (!std::isfinite(rates_(n, m))) throw Error(Errc::invalid_argument, "non-finite rate");
        if (rates_(n, m) < 0.0)
          throw Error(Errc::invalid_argument, "negative rate A[" + std::to_string(n) + "][" + std::to_string(m) + "]");
      }
    if (rates_.diagonal().cwiseAbs().maxCoeff() != 0.0) throw Error(Errc::invalid_argument, "rate matrix diagonal must be zero");
    RealVector imbalance = rates_.rowwise().sum() - rates_.colwise().sum().transpose();
    Real scale = std::max(1.0, rates_.cwiseAbs().maxCoeff());
    if (imbalance.cwiseAbs().maxCoeff() > 1e-12 * scale * static_cast<Real>(rates_.rows()))
      throw Error(Errc::invalid_argument, "rate matrix row and column sums differ; probability would not be conserved");
  }

  static RateMatrix symmetric(std::size_t n, Real gamma) {
    RealMatrix a = RealMatrix::Constant(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n), gamma);
    a.diagonal().setZero();
    return RateMatrix(std::move(a));
  }

  const RealMatrix& rates() const { return rates_; }
  std::size_t size() const { return static_cast<std::size_t>(rates_.rows()); }

  /// L with p' = L p.
  RealMatrix generator() const {
    RealMatrix l = rates_;
    l.diagonal() -= rates_.rowwise().sum();
    return l;
  }

 private:
  RealMatrix rates_;
};

inline constexpr Real kSimplexTol = 1e-10;

inline void require_simplex(const RealVector& p) {
  if (p.size() == 0) throw Error(Errc::invalid_argument, "empty probability vector");
  if (p.minCoeff() < -1e-12) throw Error(Errc::invalid_argument, "probability vector has a negative entry");
  if (std::abs(p.sum() - 1.0) > kSimplexTol) throw Error(Errc::invalid_argument, "probabilities sum to " + std::to_string(p.sum()));
}

/// Exact solution p(t) = exp(L t) p(0). Only forward time is accepted.
inline RealVector pauli_master_evolve(const RealVector& p0, const RateMatrix& a, Real t) {
  require_simplex(p0);
  if (static_cast<std::size_t>(p0.size()) != a.size()) throw Error(Errc::dimension_mismatch, "probability vector and rate matrix");
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error(Errc::invalid_argument, "master equation evolves forward in time only (t >= 0)");
  RealMatrix lt = a.generator() * t;
  RealMatrix propagator = lt.exp();
  return propagator * p0;
}

struct HistorySpec {
  std::vector<Real> times;
  std::vector<ProjectorSet> sets;
  Hamiltonian hamiltonian;
  DensityOperator initial;
  Real t0 = 0.0;

  void validate() const {
    if (times.empty()) throw Error(Errc::invalid_argument, "history needs at least one time slice");
    if (times.size() != sets.size()) throw Error(Errc::dimension_mismatch, "one projector set per time is required");
    Real prev = t0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (!(times[i] > prev) && !(i == 0 && times[i] == t0)) throw Error(Errc::invalid_argument, "history times must increase strictly");
      prev = times[i];
    }
    for (const auto& s : sets)
      if (s.space() != initial.space()) throw Error(Errc::dimension_mismatch, "projector set space");
    if (hamiltonian.space() != initial.space()) throw Error(Errc::dimension_mismatch, "hamiltonian space");
  }

  /// P(t) = U(t)^dagger P U(t), U(t) = exp(-iH(t - t0)), per slice.
  std::vector<std::vector<Matrix>> heisenberg_projectors() const {
    std::vector<std::vector<Matrix>> out;
    for (std::size_t i = 0; i < times.size(); ++i) {
      Matrix u = hamiltonian.propagator(times[i] - t0);
      std::vector<Matrix> slice;
      for (const auto& p : sets[i].projectors()) slice.push_back(u.adjoint() * p * u);
      out.push_back(std::move(slice));
    }
    return out;
  }
};

namespace detail {

inline Matrix chain_operator(const std::vector<std::vector<Matrix>>& heis, const std::vector<std::size_t>& history) {
  if (history.size() != heis.size()) throw Error(Errc::dimension_mismatch, "history length differs from the number of slices");
  Matrix c = Matrix::Identity(heis.front().front().rows(), heis.front().front().cols());
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (history[i] >= heis[i].size()) throw Error(Errc::invalid_argument, "history outcome index out of range");
    c = heis[i][history[i]] * c;
  }
  return c;
}

inline void for_each_history(const std::vector<std::size_t>& sizes, const std::function<void(const std::vector<std::size_t>&)>& fn) {
  std::vector<std::size_t> h(sizes.size(), 0);
  while (true) {
    fn(h);
    std::size_t i = sizes.size();
    while (i-- > 0) {
      if (++h[i] < sizes[i]) break;
      h[i] = 0;
    }
    if (i == static_cast<std::size_t>(-1)) return;
  }
}

}  // namespace detail

/// tr{C rho C^dagger} with C = P_{n_k}(t_k) ... P_{n_1}(t_1).
inline Real history_probability(const HistorySpec& spec, const std::vector<std::size_t>& history) {
  spec.validate();
  Matrix c = detail::chain_operator(spec.heisenberg_projectors(), history);
  return (c * spec.initial.matrix() * c.adjoint()).trace().real();
}

/// The single-sided trace tr{P_{n_k}(t_k) ... P_{n_1}(t_1) rho}; complex in
/// general, equal to the Lüders form when the histories decohere.
inline Complex history_trace_single_sided(const HistorySpec& spec, const std::vector<std::size_t>& history) {
  spec.validate();
  Matrix c = detail::chain_operator(spec.heisenberg_projectors(), history);
  return (c * spec.initial.matrix()).trace();
}

struct HistoryProbability {
  std::vector<std::size_t> history;
  Real probability = 0.0;
  Complex single_sided;
};

inline std::vector<HistoryProbability> all_history_probabilities(const HistorySpec& spec) {
  spec.validate();
  auto heis = spec.heisenberg_projectors();
  std::vector<std::size_t> sizes;
  for (const auto& s : spec.sets) sizes.push_back(s.size());
  std::vector<HistoryProbability> out;
  detail::for_each_history(sizes, [&](const std::vector<std::size_t>& h) {
    Matrix c = detail::chain_operator(heis, h);
    Matrix crho = c * spec.initial.matrix();
    out.push_back({h, (crho * c.adjoint()).trace().real(), crho.trace()});
  });
  return out;
}

/// Largest violation of additivity when outcomes of one slice are merged,
/// |p(union) - sum p(members)|, over every slice, every subset of at least
/// two outcomes, and every fine-grained choice at the other slices.
inline Real consistency_defect(const HistorySpec& spec) {
  spec.validate();
  auto heis = spec.heisenberg_projectors();
  const Matrix& rho = spec.initial.matrix();
  std::vector<std::size_t> sizes;
  for (const auto& s : spec.sets) {
    if (s.size() > 20) throw Error(Errc::invalid_argument, "consistency_defect supports at most 20 outcomes per slice");
    sizes.push_back(s.size());
  }
  Real worst = 0.0;
  for (std::size_t slice = 0; slice < sizes.size(); ++slice) {
    const std::size_t n = sizes[slice];
    if (n < 2) continue;
    auto others = sizes;
    others[slice] = 1;
    detail::for_each_history(others, [&](const std::vector<std::size_t>& base) {
      // Decoherence functional D(m, n) = tr{C_m rho C_n^dagger} for this slice.
      std::vector<Matrix> chains;
      auto h = base;
      for (std::size_t k = 0; k < n; ++k) {
        h[slice] = k;
        chains.push_back(detail::chain_operator(heis, h));
      }
      Matrix d(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b)
          d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = (chains[a] * rho * chains[b].adjoint()).trace();
      for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        if (std::popcount(mask) < 2) continue;
        Real interference = 0.0;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b)
            if ((mask >> a & 1ul) && (mask >> b & 1ul)) interference += 2.0 * d(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)).real();
        worst = std::max(worst, std::abs(interference));
      }
    });
  }
  return worst;
}

/// A branch deviates when some outcome's relative frequency differs from its
/// Born probability by at least epsilon (up to this slack).
inline constexpr Real kDeviationSlack = 1e-12;

/// Above this trial count the multinomial weights are summed in log domain.
inline constexpr std::size_t kDirectSummationLimit = 1000;

/// Squared norm of the part of |psi>^{(x) N} whose outcome frequencies deviate
/// from the Born probabilities by >= epsilon: the total multinomial weight of
/// the deviant frequency classes.
inline Real graham_deviant_norm(std::span<const Real> born_p, std::size_t trials, Real epsilon) {
  if (born_p.size() < 2) throw Error(Errc::invalid_argument, "need at least two outcomes");
  if (trials < 1) throw Error(Errc::invalid_argument, "need at least one trial");
  if (!(epsilon > 0.0)) throw Error(Errc::invalid_argument, "epsilon must be positive");
  RealVector p = Eigen::Map<const RealVector>(born_p.data(), static_cast<Eigen::Index>(born_p.size()));
  require_simplex(p);

  const std::size_t d = born_p.size();
  const auto nd = static_cast<long double>(trials);
  if (d > 2) {
    // Number of frequency classes is C(N + d - 1, d - 1).
    long double classes = 1.0L;
    for (std::size_t i = 1; i < d; ++i) classes *= static_cast<long double>(trials + i) / static_cast<long double>(i);
    if (classes > 5e7L) throw Error(Errc::invalid_argument, "too many multinomial classes to enumerate");
  }
  const bool log_domain = trials > kDirectSummationLimit;

  std::vector<std::size_t> counts(d, 0);
  long double deviant = 0.0L;
  // weight carries prod_{i<idx} C(remaining_i, k_i) p_i^{k_i}, or its log.
  std::function<void(std::size_t, std::size_t, long double)> recurse = [&](std::size_t idx, std::size_t remaining, long double weight) {
    if (idx + 1 == d) {
      counts[idx] = remaining;
      long double w = weight;
      if (remaining > 0) {
        if (born_p[idx] == 0.0) return;
        w = log_domain ? w + static_cast<long double>(remaining) * std::log(static_cast<long double>(born_p[idx]))
                       : w * std::pow(static_cast<long double>(born_p[idx]), static_cast<long double>(remaining));
      }
      bool is_deviant = false;
      for (std::size_t i = 0; i < d; ++i)
        if (std::abs(static_cast<long double>(counts[i]) / nd - static_cast<long double>(born_p[i])) >=
            static_cast<long double>(epsilon) - kDeviationSlack)
          is_deviant = true;
      if (is_deviant) deviant += log_domain ? std::exp(w) : w;
      return;
    }
    const auto pi = static_cast<long double>(born_p[idx]);
    long double binom = log_domain ? 0.0L : 1.0L;  // C(remaining, k)
    for (std::size_t k = 0; k <= remaining; ++k) {
      if (k > 0) {
        if (log_domain)
          binom += std::log(static_cast<long double>(remaining - k + 1)) - std::log(static_cast<long double>(k));
        else
          binom *= static_cast<long double>(remaining - k + 1) / static_cast<long double>(k);
      }
      if (k > 0 && pi == 0.0L) break;
      counts[idx] = k;
      long double w = log_domain ? weight + binom + static_cast<long double>(k) * (k ? std::log(pi) : 0.0L)
                                 : weight * binom * std::pow(pi, static_cast<long double>(k));
      recurse(idx + 1, remaining - k, w);
    }
  };
  recurse(0, trials, log_domain ? 0.0L : 1.0L);
  return static_cast<Real>(deviant);
}

}  // namespace decolab
