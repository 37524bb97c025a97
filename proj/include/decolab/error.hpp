#pragma once

#include <stdexcept>
#include <string>

namespace decolab {

enum class Errc {
  label_collision,
  unknown_label,
  dimension_mismatch,
  invalid_argument,
  invalid_basis,
  not_hermitian,
  not_unitary,
  invalid_projectors,
  zero_probability,
  invariant_violation,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::label_collision: return "label collision";
    case Errc::unknown_label: return "unknown label";
    case Errc::dimension_mismatch: return "dimension mismatch";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::invalid_basis: return "invalid basis";
    case Errc::not_hermitian: return "not hermitian";
    case Errc::not_unitary: return "not unitary";
    case Errc::invalid_projectors: return "invalid projector set";
    case Errc::zero_probability: return "zero-probability projection";
    case Errc::invariant_violation: return "invariant violation";
  }
  return "unknown error";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace decolab
