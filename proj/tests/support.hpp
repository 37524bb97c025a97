#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "decolab/decolab.hpp"

namespace testing_support {

using namespace decolab;

inline Vector random_vector(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Vector v(static_cast<Eigen::Index>(dim));
  for (auto& x : v) x = {n(gen), n(gen)};
  return v.normalized();
}

inline StateVector random_state(std::mt19937_64& gen, const TensorSpace& space) {
  return {space, random_vector(gen, space.total_dim())};
}

inline Matrix random_hermitian(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (auto& x : m.reshaped()) x = {n(gen), n(gen)};
  return 0.5 * (m + m.adjoint());
}

/// Unitary Q factor of a complex Gaussian matrix.
inline Matrix random_unitary(std::mt19937_64& gen, std::size_t dim) {
  std::normal_distribution<Real> n(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  for (auto& x : m.reshaped()) x = {n(gen), n(gen)};
  Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

inline DensityOperator random_density(std::mt19937_64& gen, const TensorSpace& space, std::size_t rank) {
  const auto d = static_cast<Eigen::Index>(space.total_dim());
  Matrix rho = Matrix::Zero(d, d);
  std::uniform_real_distribution<Real> w(0.1, 1.0);
  Real total = 0.0;
  for (std::size_t k = 0; k < rank; ++k) {
    Vector v = random_vector(gen, space.total_dim());
    Real x = w(gen);
    rho += x * v * v.adjoint();
    total += x;
  }
  rho /= total;
  return {space, Matrix(0.5 * (rho + rho.adjoint()))};
}

inline Real max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline std::vector<std::string> labels(std::initializer_list<const char*> l) { return {l.begin(), l.end()}; }

}  // namespace testing_support
