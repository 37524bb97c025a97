#pragma once

#include <complex>
#include <cstddef>

#include <Eigen/Dense>

namespace decolab {

using Real = double;
using Complex = std::complex<double>;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

inline constexpr Complex kI{0.0, 1.0};

/// Validity checks on states and operators.
inline constexpr Real kValidityTol = 1e-10;

inline constexpr Real kLn2 = 0.693147180559945309417232121458176568;

inline Real nats_to_bits(Real nats) { return nats / kLn2; }

}  // namespace decolab
