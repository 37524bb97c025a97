#pragma once

// Discretized Wigner transform of one-dimensional continuous-variable states,
//
//   W(p, q) = (1/pi) * integral dx exp(2ipx) rho(q + x, q - x),
//
// on a uniform position grid q_j = q_min + j dq (q_max excluded). With
// x = k dq the integrand stays on the grid, and the sum over k is a length-N
// DFT giving the reciprocal momentum grid p_m = pi m / (N dq).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "decolab/error.hpp"
#include "decolab/parallel.hpp"
#include "decolab/types.hpp"

namespace decolab {

struct PositionGrid {
  Real q_min = -8.0;
  Real q_max = 8.0;
  std::size_t n_points = 256;

  Real dq() const { return (q_max - q_min) / static_cast<Real>(n_points); }
  Real q(std::size_t j) const { return q_min + static_cast<Real>(j) * dq(); }
  /// Momentum spacing of the reciprocal grid.
  Real dp() const { return std::numbers::pi / (static_cast<Real>(n_points) * dq()); }
  /// p_m for m = 0..N-1 maps to m - N/2.
  Real p(std::size_t m) const { return (static_cast<Real>(m) - static_cast<Real>(n_points / 2)) * dp(); }

  void validate() const {
    if (!(q_max > q_min)) throw Error(Errc::invalid_argument, "grid needs q_max > q_min");
    if (n_points < 2 || (n_points & (n_points - 1)) != 0) throw Error(Errc::invalid_argument, "grid size must be a power of two");
  }
};

inline constexpr Real kGridNormTol = 1e-6;
inline constexpr Real kBoundaryTol = 1e-8;

/// Position-representation state rho(z, z') on a grid. Values carry units of
/// 1/length so that sum_j rho(q_j, q_j) dq = 1.
class GridState {
 public:
  static GridState from_wavefunction(PositionGrid grid, Vector psi) {
    grid.validate();
    if (static_cast<std::size_t>(psi.size()) != grid.n_points) throw Error(Errc::dimension_mismatch, "wave function samples");
    Real norm = psi.squaredNorm() * grid.dq();
    if (std::abs(norm - 1.0) > kGridNormTol)
      throw Error(Errc::invalid_argument, "wave function normalization " + std::to_string(norm));
    Matrix rho = psi * psi.adjoint();
    GridState s(grid, std::move(rho));
    s.wavefunction_ = std::move(psi);
    return s;
  }

  static GridState from_density(PositionGrid grid, const Matrix& rho) {
    grid.validate();
    if (static_cast<std::size_t>(rho.rows()) != grid.n_points || rho.rows() != rho.cols())
      throw Error(Errc::dimension_mismatch, "grid density matrix");
    if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > kValidityTol)
      throw Error(Errc::not_hermitian, "grid density matrix violates rho(z,z') = rho(z',z)*");
    Real norm = rho.trace().real() * grid.dq();
    if (std::abs(norm - 1.0) > kGridNormTol) throw Error(Errc::invalid_argument, "density normalization " + std::to_string(norm));
    return GridState(grid, Matrix(0.5 * (rho + rho.adjoint())));
  }

  /// Convex combination of states on the same grid.
  static GridState mixture(const std::vector<std::pair<Real, GridState>>& parts) {
    if (parts.empty()) throw Error(Errc::invalid_argument, "empty mixture");
    const auto& grid = parts.front().second.grid();
    Matrix rho = Matrix::Zero(static_cast<Eigen::Index>(grid.n_points), static_cast<Eigen::Index>(grid.n_points));
    for (const auto& [w, s] : parts) {
      if (w < 0.0) throw Error(Errc::invalid_argument, "negative mixture weight");
      rho += w * s.density();
    }
    return from_density(grid, rho);
  }

  const PositionGrid& grid() const { return grid_; }
  const Matrix& density() const { return rho_; }
  const std::optional<Vector>& wavefunction() const { return wavefunction_; }

  /// Largest |psi| at the two grid edges (square root of the edge densities).
  Real boundary_amplitude() const {
    auto n = rho_.rows();
    return std::sqrt(std::max(std::abs(rho_(0, 0)), std::abs(rho_(n - 1, n - 1))));
  }

  Real purity() const {
    Real dq = grid_.dq();
    return (rho_ * rho_).trace().real() * dq * dq;
  }

 private:
  GridState(PositionGrid grid, Matrix rho) : grid_(grid), rho_(std::move(rho)) {}

  PositionGrid grid_;
  Matrix rho_;
  std::optional<Vector> wavefunction_;
};

/// Samples f on the grid and rescales so that sum |psi|^2 dq = 1.
inline Vector sample_wavefunction(const PositionGrid& grid, const std::function<Complex(Real)>& f) {
  Vector psi(static_cast<Eigen::Index>(grid.n_points));
  for (std::size_t j = 0; j < grid.n_points; ++j) psi(static_cast<Eigen::Index>(j)) = f(grid.q(j));
  return psi / std::sqrt(psi.squaredNorm() * grid.dq());
}

struct WignerGrid {
  PositionGrid grid;
  RealMatrix values;  // values(m, j) = W(p_m, q_j)
  Real max_imag_residue = 0.0;

  Real dq() const { return grid.dq(); }
  Real dp() const { return grid.dp(); }
  Real q(std::size_t j) const { return grid.q(j); }
  Real p(std::size_t m) const { return grid.p(m); }

  /// sum W dp dq
  Real integral() const { return values.sum() * dp() * dq(); }
};

inline void require_wide_grid(const GridState& state) {
  Real edge = state.boundary_amplitude();
  if (edge >= kBoundaryTol)
  {
    char buf[64];
    std::snprintf(buf, sizeof buf, "grid too narrow: boundary amplitude %.3e", edge);
    throw Error(Errc::invalid_argument, buf);
  }
}

/// FFT evaluation of the x integral, one q column at a time.
inline WignerGrid wigner_transform(const GridState& state, unsigned threads = 1) {
  require_wide_grid(state);
  const auto& grid = state.grid();
  const auto n = static_cast<Eigen::Index>(grid.n_points);
  const Matrix& rho = state.density();
  const Real scale = grid.dq() / std::numbers::pi;

  WignerGrid out{grid, RealMatrix(n, n), 0.0};
  std::vector<Real> residue(grid.n_points, 0.0);
  parallel_for(grid.n_points, threads, [&](std::size_t begin, std::size_t end) {
    Eigen::FFT<Real> fft;
    fft.SetFlag(Eigen::FFT<Real>::Unscaled);
    std::vector<Complex> f(static_cast<std::size_t>(n)), spectrum;
    for (std::size_t jj = begin; jj < end; ++jj) {
      auto j = static_cast<Eigen::Index>(jj);
      std::fill(f.begin(), f.end(), Complex{});
      const Eigen::Index kmax = std::min(j, n - 1 - j);
      for (Eigen::Index k = -kmax; k <= kmax; ++k) f[static_cast<std::size_t>((k + n) % n)] = rho(j + k, j - k);
      // sum_k f_k exp(+2 pi i m k / N) is the unscaled inverse DFT.
      fft.inv(spectrum, f);
      for (Eigen::Index m = 0; m < n; ++m) {
        Complex v = scale * spectrum[static_cast<std::size_t>((m - n / 2 + n) % n)];
        out.values(m, j) = v.real();
        residue[jj] = std::max(residue[jj], std::abs(v.imag()));
      }
    }
  });
  out.max_imag_residue = *std::max_element(residue.begin(), residue.end());
  if (out.max_imag_residue > kValidityTol)
    throw Error(Errc::invariant_violation, "Wigner function has imaginary residue " + std::to_string(out.max_imag_residue));
  return out;
}

namespace detail {

inline bool on_lattice(Real x, Real origin, Real step, Real& index) {
  index = std::round((x - origin) / step);
  return std::abs((x - origin) / step - index) <= 1e-9;
}

}  // namespace detail

/// Generalized Pauli kernel Sigma_{p,q}(z, z') = (1/2pi) exp(ip(z - z'))
/// delta(q - (z + z')/2). z and z' are grid points; the delta is a Kronecker
/// symbol normalized by the spacing of the lattice of pair midpoints, dq/2.
inline Complex pauli_kernel_value(const PositionGrid& grid, Real p, Real q, Real z, Real z_prime) {
  Real iz, izp, iq;
  if (!detail::on_lattice(z, grid.q_min, grid.dq(), iz) || !detail::on_lattice(z_prime, grid.q_min, grid.dq(), izp))
    throw Error(Errc::invalid_argument, "kernel arguments z, z' must be grid points");
  if (!detail::on_lattice(q, grid.q_min, 0.5 * grid.dq(), iq)) throw Error(Errc::invalid_argument, "off-grid midpoint q");
  if (static_cast<long long>(iz + izp) != static_cast<long long>(iq)) return {};
  const Real mid_spacing = 0.5 * grid.dq();
  return std::exp(kI * p * (z - z_prime)) / (2.0 * std::numbers::pi * mid_spacing);
}

/// trace{Sigma_{p,q} rho} = sum_{a,b} Sigma_{p,q}(z_a, z_b) rho(z_a, z_b) dq^2,
/// restricted to the pairs where the kernel is nonzero.
inline Complex kernel_contraction(const GridState& state, Real p, Real q) {
  const auto& grid = state.grid();
  const auto n = static_cast<long long>(grid.n_points);
  Real iq;
  if (!detail::on_lattice(q, grid.q_min, 0.5 * grid.dq(), iq)) throw Error(Errc::invalid_argument, "off-grid midpoint q");
  const auto sum_index = static_cast<long long>(iq);  // a + b
  const Real dq = grid.dq();
  Complex acc{};
  for (long long a = std::max(0LL, sum_index - (n - 1)); a <= std::min(n - 1, sum_index); ++a) {
    long long b = sum_index - a;
    acc += pauli_kernel_value(grid, p, q, grid.q(static_cast<std::size_t>(a)), grid.q(static_cast<std::size_t>(b))) *
           state.density()(a, b);
  }
  return acc * dq * dq;
}

/// W on the full (p, q) grid through the kernel contraction route.
inline WignerGrid wigner_via_kernel(const GridState& state, unsigned threads = 1) {
  require_wide_grid(state);
  const auto& grid = state.grid();
  const auto n = static_cast<Eigen::Index>(grid.n_points);
  WignerGrid out{grid, RealMatrix(n, n), 0.0};
  std::vector<Real> residue(grid.n_points, 0.0);
  parallel_for(grid.n_points, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t j = begin; j < end; ++j)
      for (std::size_t m = 0; m < grid.n_points; ++m) {
        Complex w = kernel_contraction(state, grid.p(m), grid.q(j));
        out.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j)) = w.real();
        residue[j] = std::max(residue[j], std::abs(w.imag()));
      }
  });
  out.max_imag_residue = *std::max_element(residue.begin(), residue.end());
  return out;
}

struct Marginals {
  RealVector position;  // integral W dp, indexed by q_j
  RealVector momentum;  // integral W dq, indexed by p_m
};

inline Marginals marginals(const WignerGrid& w) {
  return {RealVector(w.values.colwise().sum().transpose() * w.dp()), RealVector(w.values.rowwise().sum() * w.dq())};
}

}  // namespace decolab
