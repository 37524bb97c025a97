#pragma once

// JSON and CSV encodings of library values. JSON layouts:
//   space:   [["label", dim], ...]
//   state:   {"space": ..., "amplitudes": [[re, im], ...]}
//   density: {"space": ..., "matrix": [[[re, im], ...], ...]}   (rows)
// Doubles are written with 17 significant digits, which round-trips exactly.

#include <bit>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "decolab/dynamics.hpp"
#include "decolab/entanglement.hpp"
#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/ledger.hpp"
#include "decolab/wigner.hpp"

namespace decolab::io {

using json = nlohmann::json;

inline std::string format_real(Real x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline json to_json(const TensorSpace& space) {
  json out = json::array();
  for (const auto& s : space.subsystems()) out.push_back(json::array({s.label, s.dim}));
  return out;
}

inline TensorSpace space_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(Errc::invalid_argument, "space must be a nonempty array of [label, dim]");
  std::vector<Subsystem> subs;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_number_unsigned())
      throw Error(Errc::invalid_argument, "space entry must be [label, dim]");
    subs.push_back({e[0].get<std::string>(), e[1].get<std::size_t>()});
  }
  return TensorSpace(std::move(subs));
}

inline json to_json(Complex z) { return json::array({z.real(), z.imag()}); }

inline Complex complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<Real>(), 0.0};
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(Errc::invalid_argument, "complex number must be [re, im]");
  return {j[0].get<Real>(), j[1].get<Real>()};
}

inline json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v(i)));
  return out;
}

inline Vector vector_from_json(const json& j) {
  if (!j.is_array()) throw Error(Errc::invalid_argument, "expected an array of complex numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = complex_from_json(j[i]);
  return v;
}

inline json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(to_json(Vector(m.row(r).transpose())));
  return out;
}

inline Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw Error(Errc::invalid_argument, "expected a nonempty array of rows");
  const auto cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != cols) throw Error(Errc::invalid_argument, "ragged matrix");
    m.row(static_cast<Eigen::Index>(r)) = vector_from_json(j[r]).transpose();
  }
  return m;
}

inline json to_json(const StateVector& psi) { return {{"space", to_json(psi.space())}, {"amplitudes", to_json(psi.amplitudes())}}; }

inline StateVector state_from_json(const json& j) {
  return {space_from_json(j.at("space")), vector_from_json(j.at("amplitudes"))};
}

inline json to_json(const DensityOperator& rho) { return {{"space", to_json(rho.space())}, {"matrix", to_json(rho.matrix())}}; }

inline DensityOperator density_from_json(const json& j) {
  return {space_from_json(j.at("space")), matrix_from_json(j.at("matrix"))};
}

inline json to_json(const CollapseRecord& r) {
  return {{"outcome_index", r.outcome_index},
          {"outcome_probability", r.outcome_probability},
          {"pre_state", to_json(r.pre_state)},
          {"post_state", to_json(r.post_state)},
          {"seed", r.rng_seed}};
}

inline CollapseRecord collapse_record_from_json(const json& j) {
  return {j.at("outcome_index").get<std::size_t>(), j.at("outcome_probability").get<Real>(), state_from_json(j.at("pre_state")),
          state_from_json(j.at("post_state")), j.at("seed").get<std::uint64_t>()};
}

inline json to_json(const SchmidtDecomposition& s) {
  json sys = json::array(), env = json::array();
  for (const auto& v : s.system_vectors) sys.push_back(to_json(v.amplitudes()));
  for (const auto& v : s.environment_vectors) env.push_back(to_json(v.amplitudes()));
  return {{"space", to_json(s.space)},
          {"system_space", to_json(s.system_space)},
          {"environment_space", to_json(s.environment_space)},
          {"coefficients", s.coefficients},
          {"system_vectors", sys},
          {"environment_vectors", env},
          {"degenerate", s.degenerate}};
}

// CSV emitters. Every numeric field uses format_real.

inline void write_ledger_csv(std::ostream& os, const std::vector<LedgerRow>& rows) {
  os << "step,S_ensemble_nats,S_physical_nats,I_nats,S_bits,S_physical_controllable_excluded_nats,S_system_nats,S_memory_nats,S_environment_nats\n";
  for (const auto& r : rows)
    os << r.step << ',' << format_real(r.s_ensemble) << ',' << format_real(r.s_physical) << ',' << format_real(r.information) << ','
       << format_real(nats_to_bits(r.s_ensemble)) << ',' << format_real(r.s_physical_controllable_excluded) << ','
       << format_real(r.s_system) << ',' << format_real(r.s_memory) << ',' << format_real(r.s_environment) << '\n';
}

/// Long format: one (q, p, W) line per grid cell, q slowest.
inline void write_wigner_csv(std::ostream& os, const WignerGrid& w) {
  os << "q,p,W\n";
  for (std::size_t j = 0; j < w.grid.n_points; ++j)
    for (std::size_t m = 0; m < w.grid.n_points; ++m)
      os << format_real(w.q(j)) << ',' << format_real(w.p(m)) << ','
         << format_real(w.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(j))) << '\n';
}

inline json wigner_header(const WignerGrid& w) {
  return {{"format", "decolab.wigner.v1"},
          {"dtype", "float64-le"},
          {"order", "row-major"},
          {"rows", "p"},
          {"cols", "q"},
          {"n_p", w.grid.n_points},
          {"n_q", w.grid.n_points},
          {"q_min", w.grid.q_min},
          {"q_max", w.grid.q_max},
          {"dq", w.dq()},
          {"p_min", w.p(0)},
          {"dp", w.dp()}};
}

/// One line of JSON metadata, then n_p * n_q little-endian doubles with
/// W(p_m, q_j) at offset m * n_q + j.
inline void write_wigner_binary(std::ostream& os, const WignerGrid& w) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  os << wigner_header(w).dump() << '\n';
  for (Eigen::Index m = 0; m < w.values.rows(); ++m)
    for (Eigen::Index j = 0; j < w.values.cols(); ++j) {
      double v = w.values(m, j);
      os.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

struct WignerDump {
  json header;
  RealMatrix values;
};

inline WignerDump read_wigner_binary(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(Errc::invalid_argument, "missing Wigner dump header");
  WignerDump out{json::parse(line), {}};
  auto np = out.header.at("n_p").get<Eigen::Index>(), nq = out.header.at("n_q").get<Eigen::Index>();
  out.values.resize(np, nq);
  for (Eigen::Index m = 0; m < np; ++m)
    for (Eigen::Index j = 0; j < nq; ++j) {
      double v;
      if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw Error(Errc::invalid_argument, "truncated Wigner dump");
      out.values(m, j) = v;
    }
  return out;
}

struct EntropySample {
  Real t = 0.0;
  Real linear = 0.0;
  Real ensemble = 0.0;
};

inline void write_entropy_series_csv(std::ostream& os, const std::vector<EntropySample>& series) {
  os << "t,S_lin,S_ensemble_nats,S_ensemble_bits\n";
  for (const auto& s : series)
    os << format_real(s.t) << ',' << format_real(s.linear) << ',' << format_real(s.ensemble) << ','
       << format_real(nats_to_bits(s.ensemble)) << '\n';
}

}  // namespace decolab::io
