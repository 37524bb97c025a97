#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>
#include <variant>

#include <openssl/evp.h>

#include <boost/math/distributions/chi_squared.hpp>

#include "decolab/decolab.hpp"

namespace decolab::scenario {

namespace fs = std::filesystem;
using io::format_real;

std::string to_string(const Diagnostic& d) { return d.field.empty() ? d.message : d.field + ": " + d.message; }

const std::vector<std::string>& kinds() {
  static const std::vector<std::string> all{"premeasurement", "chain",  "branch_recohere", "collapse_mc",      "wigner",         "schmidt",
                                            "master",         "histories", "graham",       "ledger_classical", "ledger_quantum", "ledger_branching"};
  return all;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

json load(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path.string());
  return json::parse(buf.str());
}

namespace {

/// Raised by runners when a module invariant fails on computed data.
struct InvariantFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void check_invariant(bool ok, const std::string& what) {
  if (!ok) throw InvariantFailure(what);
}

// ---------------------------------------------------------------------------
// Parameter reading. Every reader records diagnostics instead of throwing and
// returns nullopt for a missing or malformed field.

class Params {
 public:
  Params(const json& params, std::vector<Diagnostic>& diags) : p_(params), diags_(diags) {}

  void fail(const std::string& key, const std::string& msg) { diags_.push_back({"params." + key, msg}); }
  bool has(const std::string& key) const { return p_.contains(key); }
  const json& raw(const std::string& key) const { return p_.at(key); }

  std::optional<Real> real(const std::string& key, std::optional<Real> fallback = std::nullopt) {
    if (!p_.contains(key)) {
      if (!fallback) fail(key, "required number is missing");
      return fallback;
    }
    if (!p_[key].is_number()) {
      fail(key, "must be a number");
      return std::nullopt;
    }
    Real v = p_[key].get<Real>();
    if (!std::isfinite(v)) {
      fail(key, "must be finite");
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::int64_t> integer(const std::string& key, std::int64_t lo, std::int64_t hi, std::optional<std::int64_t> fallback = std::nullopt) {
    if (!p_.contains(key)) {
      if (!fallback) fail(key, "required integer is missing");
      return fallback;
    }
    if (!p_[key].is_number_integer()) {
      fail(key, "must be an integer");
      return std::nullopt;
    }
    auto v = p_[key].get<std::int64_t>();
    if (v < lo || v > hi) {
      fail(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(v));
      return std::nullopt;
    }
    return v;
  }

  std::optional<bool> boolean(const std::string& key, bool fallback) {
    if (!p_.contains(key)) return fallback;
    if (!p_[key].is_boolean()) {
      fail(key, "must be true or false");
      return std::nullopt;
    }
    return p_[key].get<bool>();
  }

  std::optional<std::vector<Real>> reals(const std::string& key, std::size_t min_size) {
    if (!p_.contains(key)) {
      fail(key, "required array is missing");
      return std::nullopt;
    }
    const json& a = p_[key];
    if (!a.is_array() || a.size() < min_size) {
      fail(key, "must be an array of at least " + std::to_string(min_size) + " numbers");
      return std::nullopt;
    }
    std::vector<Real> out;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number() || !std::isfinite(a[i].get<Real>())) {
        fail(key + "[" + std::to_string(i) + "]", "must be a finite number");
        return std::nullopt;
      }
      out.push_back(a[i].get<Real>());
    }
    return out;
  }

  std::optional<Vector> complex_vector(const std::string& key, const json& a, std::size_t min_size) {
    if (!a.is_array() || a.size() < min_size) {
      fail(key, "must be an array of at least " + std::to_string(min_size) + " complex numbers ([re, im] or re)");
      return std::nullopt;
    }
    try {
      return io::vector_from_json(a);
    } catch (const Error& e) {
      fail(key, e.what());
      return std::nullopt;
    }
  }

  /// Normalized amplitude vector with at least two components.
  std::optional<Vector> amplitudes(const std::string& key = "amplitudes") {
    if (!p_.contains(key)) {
      fail(key, "required amplitude array is missing");
      return std::nullopt;
    }
    auto v = complex_vector(key, p_[key], 2);
    if (!v) return v;
    Real norm = v->norm();
    if (std::abs(norm - 1.0) > kValidityTol) {
      fail(key, "amplitudes are not normalized (norm = " + format_real(norm) + ")");
      return std::nullopt;
    }
    return v;
  }

  std::optional<Matrix> complex_matrix(const std::string& key, const json& m) {
    try {
      Matrix out = io::matrix_from_json(m);
      return out;
    } catch (const Error& e) {
      fail(key, e.what());
    } catch (const json::exception& e) {
      fail(key, e.what());
    }
    return std::nullopt;
  }

 private:
  const json& p_;
  std::vector<Diagnostic>& diags_;
};

// ---------------------------------------------------------------------------
// Typed parameter blocks.

struct PremeasurementParams {
  Vector amplitudes;
  Real overlap = 0.0;
};

struct ChainParams {
  Vector amplitudes;
  std::vector<Real> overlaps;
  std::optional<Real> observer_overlap;
  std::vector<std::size_t> order;
};

struct BranchParams {
  Vector amplitudes;
  std::size_t env_dim = 0;
};

struct CollapseParams {
  Vector amplitudes;
  std::size_t trials = 0;
};

struct WignerParams {
  std::string state;
  PositionGrid grid;
  Real separation = 1.5;
};

struct SchmidtParams {
  Vector amplitudes;
  TensorSpace space{"unused", 1};
  std::vector<std::string> system;
};

struct MasterParams {
  RealMatrix rates;
  RealVector p0;
  std::vector<Real> times;
};

struct HistoriesParams {
  Matrix hamiltonian;
  Matrix initial;
  Real t0 = 0.0;
  std::vector<Real> times;
  std::vector<std::vector<Vector>> bases;  // empty inner vector means computational
};

struct GrahamParams {
  std::vector<Real> born;
  std::vector<std::size_t> trials;
  Real epsilon = 0.0;
};

struct LedgerParams {
  std::vector<Real> probabilities;
  Vector amplitudes;
  std::size_t env_dim = 0;
  bool correlations_irrelevant = true;
};

bool overlap_admissible(Real g, std::size_t outcomes) {
  return g <= 1.0 && (outcomes < 2 || g >= -1.0 / static_cast<Real>(outcomes - 1));
}

std::optional<PremeasurementParams> parse_premeasurement(Params& p) {
  auto amps = p.amplitudes();
  auto g = p.real("overlap", 0.0);
  if (amps && g && !overlap_admissible(*g, static_cast<std::size_t>(amps->size()))) p.fail("overlap", "no pointer states have this pairwise overlap");
  if (!amps || !g) return std::nullopt;
  return PremeasurementParams{*amps, *g};
}

constexpr std::size_t kMaxJointDim = 1u << 16;

std::optional<ChainParams> parse_chain(Params& p) {
  auto amps = p.amplitudes();
  auto links = p.integer("links", 0, 16);
  if (!amps || !links) return std::nullopt;
  const auto n = static_cast<std::size_t>(amps->size());
  const auto k = static_cast<std::size_t>(*links);
  ChainParams out{*amps, {}, std::nullopt, {}};
  if (p.has("overlaps")) {
    auto gs = p.reals("overlaps", 0);
    if (!gs) return std::nullopt;
    if (gs->size() != k) {
      p.fail("overlaps", "needs one overlap per link (" + std::to_string(k) + ")");
      return std::nullopt;
    }
    out.overlaps = *gs;
  } else {
    auto g = p.real("overlap", 0.0);
    if (!g) return std::nullopt;
    out.overlaps.assign(k, *g);
  }
  bool ok = true;
  for (std::size_t i = 0; i < out.overlaps.size(); ++i)
    if (!overlap_admissible(out.overlaps[i], n)) {
      p.fail("overlaps[" + std::to_string(i) + "]", "no pointer states have this pairwise overlap");
      ok = false;
    }
  if (p.has("observer_overlap")) {
    auto g = p.real("observer_overlap");
    if (!g) return std::nullopt;
    if (!overlap_admissible(*g, n)) {
      p.fail("observer_overlap", "no pointer states have this pairwise overlap");
      ok = false;
    }
    out.observer_overlap = *g;
  }
  if (p.has("order")) {
    const json& o = p.raw("order");
    if (!o.is_array()) {
      p.fail("order", "must be an array of 1-based link indices");
      return std::nullopt;
    }
    std::vector<bool> seen(k, false);
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (!o[i].is_number_integer() || o[i].get<std::int64_t>() < 1 || o[i].get<std::int64_t>() > static_cast<std::int64_t>(k)) {
        p.fail("order[" + std::to_string(i) + "]", "must be a link index in [1, " + std::to_string(k) + "]");
        ok = false;
        continue;
      }
      auto idx = static_cast<std::size_t>(o[i].get<std::int64_t>() - 1);
      if (seen[idx]) {
        p.fail("order[" + std::to_string(i) + "]", "link " + std::to_string(idx + 1) + " activated twice");
        ok = false;
      }
      seen[idx] = true;
      out.order.push_back(idx);
    }
  }
  long double dim = static_cast<long double>(n) * std::pow(static_cast<long double>(n + 1), static_cast<long double>(k + (out.observer_overlap ? 1 : 0)));
  if (dim > static_cast<long double>(kMaxJointDim)) {
    p.fail("links", "joint dimension " + std::to_string(static_cast<double>(dim)) + " exceeds " + std::to_string(kMaxJointDim));
    ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<BranchParams> parse_branch(Params& p) {
  auto amps = p.amplitudes();
  if (!amps) return std::nullopt;
  const auto n = static_cast<std::int64_t>(amps->size());
  auto env = p.integer("env_dim", n, 1 << 12, n + 1);
  if (!env) return std::nullopt;
  return BranchParams{*amps, static_cast<std::size_t>(*env)};
}

std::optional<CollapseParams> parse_collapse(Params& p) {
  auto amps = p.amplitudes();
  auto trials = p.integer("trials", 1, 100'000'000);
  if (!amps || !trials) return std::nullopt;
  return CollapseParams{*amps, static_cast<std::size_t>(*trials)};
}

std::optional<WignerParams> parse_wigner(Params& p) {
  WignerParams out;
  if (!p.has("state") || !p.raw("state").is_string()) {
    p.fail("state", "must be one of gaussian, excited, cat, mixture");
    return std::nullopt;
  }
  out.state = p.raw("state").get<std::string>();
  if (out.state != "gaussian" && out.state != "excited" && out.state != "cat" && out.state != "mixture") {
    p.fail("state", "unknown state '" + out.state + "' (gaussian, excited, cat, mixture)");
    return std::nullopt;
  }
  auto qmin = p.real("q_min", -8.0), qmax = p.real("q_max", 8.0), sep = p.real("separation", 1.5);
  auto n = p.integer("n_points", 2, 4096, 256);
  if (!qmin || !qmax || !n || !sep) return std::nullopt;
  out.grid = {*qmin, *qmax, static_cast<std::size_t>(*n)};
  out.separation = *sep;
  bool ok = true;
  if (!(*qmax > *qmin)) {
    p.fail("q_max", "must exceed q_min");
    ok = false;
  }
  if ((*n & (*n - 1)) != 0) {
    p.fail("n_points", "must be a power of two");
    ok = false;
  }
  if (!ok) return std::nullopt;
  return out;
}

std::optional<SchmidtParams> parse_schmidt(Params& p) {
  if (!p.has("state")) {
    p.fail("state", "required state object {space, amplitudes} is missing");
    return std::nullopt;
  }
  SchmidtParams out;
  try {
    out.space = io::space_from_json(p.raw("state").at("space"));
  } catch (const std::exception& e) {
    p.fail("state.space", e.what());
    return std::nullopt;
  }
  if (!p.raw("state").contains("amplitudes")) {
    p.fail("state.amplitudes", "missing");
    return std::nullopt;
  }
  auto amps = p.complex_vector("state.amplitudes", p.raw("state")["amplitudes"], 1);
  if (!amps) return std::nullopt;
  if (static_cast<std::size_t>(amps->size()) != out.space.total_dim()) {
    p.fail("state.amplitudes", "has " + std::to_string(amps->size()) + " entries for a space of dimension " + std::to_string(out.space.total_dim()));
    return std::nullopt;
  }
  if (std::abs(amps->norm() - 1.0) > kValidityTol) {
    p.fail("state.amplitudes", "amplitudes are not normalized (norm = " + format_real(amps->norm()) + ")");
    return std::nullopt;
  }
  out.amplitudes = *amps;
  if (!p.has("system") || !p.raw("system").is_array() || p.raw("system").empty()) {
    p.fail("system", "must be a nonempty array of subsystem labels");
    return std::nullopt;
  }
  for (const auto& l : p.raw("system")) {
    if (!l.is_string() || !out.space.contains(l.get<std::string>())) {
      p.fail("system", "unknown subsystem label " + l.dump());
      return std::nullopt;
    }
    out.system.push_back(l.get<std::string>());
  }
  if (out.system.size() >= out.space.rank()) {
    p.fail("system", "must leave at least one subsystem as environment");
    return std::nullopt;
  }
  return out;
}

std::optional<MasterParams> parse_master(Params& p) {
  auto p0 = p.reals("p0", 1);
  auto times = p.reals("times", 1);
  if (!p.has("rates") || !p.raw("rates").is_array()) {
    p.fail("rates", "must be a square array of nonnegative numbers");
    return std::nullopt;
  }
  const json& r = p.raw("rates");
  const auto n = r.size();
  RealMatrix rates(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  bool ok = n > 0;
  for (std::size_t i = 0; i < n && ok; ++i) {
    if (!r[i].is_array() || r[i].size() != n) {
      p.fail("rates[" + std::to_string(i) + "]", "row must have " + std::to_string(n) + " entries");
      ok = false;
      break;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const std::string field = "rates[" + std::to_string(i) + "][" + std::to_string(j) + "]";
      if (!r[i][j].is_number()) {
        p.fail(field, "must be a number");
        ok = false;
        continue;
      }
      Real v = r[i][j].get<Real>();
      if (v < 0.0) {
        p.fail(field, "negative rate " + format_real(v));
        ok = false;
      } else if (i == j && v != 0.0) {
        p.fail(field, "diagonal rates must be zero");
        ok = false;
      }
      rates(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  if (ok) {
    try {
      RateMatrix check(rates);
    } catch (const Error& e) {
      p.fail("rates", e.what());
      ok = false;
    }
  }
  if (p0) {
    if (p0->size() != n) {
      p.fail("p0", "needs " + std::to_string(n) + " entries");
      ok = false;
    } else {
      Real sum = std::accumulate(p0->begin(), p0->end(), 0.0);
      if (std::abs(sum - 1.0) > kSimplexTol || *std::min_element(p0->begin(), p0->end()) < 0.0) {
        p.fail("p0", "must be a probability vector (sum = " + format_real(sum) + ")");
        ok = false;
      }
    }
  }
  if (times)
    for (std::size_t i = 0; i < times->size(); ++i)
      if ((*times)[i] < 0.0) {
        p.fail("times[" + std::to_string(i) + "]", "master equation runs forward in time only");
        ok = false;
      }
  if (!ok || !p0 || !times) return std::nullopt;
  return MasterParams{rates, Eigen::Map<const RealVector>(p0->data(), static_cast<Eigen::Index>(p0->size())), *times};
}

std::optional<HistoriesParams> parse_histories(Params& p) {
  HistoriesParams out;
  if (!p.has("hamiltonian")) {
    p.fail("hamiltonian", "required matrix is missing");
    return std::nullopt;
  }
  auto h = p.complex_matrix("hamiltonian", p.raw("hamiltonian"));
  if (!h) return std::nullopt;
  if (h->rows() != h->cols()) {
    p.fail("hamiltonian", "must be square");
    return std::nullopt;
  }
  if (detail::hermiticity_defect(*h) > kValidityTol) {
    p.fail("hamiltonian", "must be hermitian");
    return std::nullopt;
  }
  out.hamiltonian = *h;
  const auto d = h->rows();

  if (!p.has("initial") || !p.raw("initial").is_object()) {
    p.fail("initial", "must be {\"amplitudes\": [...]} or {\"matrix\": [[...]]}");
    return std::nullopt;
  }
  const json& init = p.raw("initial");
  if (init.contains("amplitudes")) {
    auto v = p.complex_vector("initial.amplitudes", init["amplitudes"], 1);
    if (!v) return std::nullopt;
    if (v->size() != d) {
      p.fail("initial.amplitudes", "dimension differs from the hamiltonian");
      return std::nullopt;
    }
    if (std::abs(v->norm() - 1.0) > kValidityTol) {
      p.fail("initial.amplitudes", "amplitudes are not normalized (norm = " + format_real(v->norm()) + ")");
      return std::nullopt;
    }
    out.initial = *v * v->adjoint();
  } else if (init.contains("matrix")) {
    auto m = p.complex_matrix("initial.matrix", init["matrix"]);
    if (!m) return std::nullopt;
    if (m->rows() != d || m->cols() != d) {
      p.fail("initial.matrix", "dimension differs from the hamiltonian");
      return std::nullopt;
    }
    try {
      DensityOperator check(TensorSpace("system", static_cast<std::size_t>(d)), *m);
    } catch (const Error& e) {
      p.fail("initial.matrix", e.what());
      return std::nullopt;
    }
    out.initial = *m;
  } else {
    p.fail("initial", "must contain amplitudes or matrix");
    return std::nullopt;
  }

  auto t0 = p.real("t0", 0.0);
  if (!t0) return std::nullopt;
  out.t0 = *t0;
  if (!p.has("slices") || !p.raw("slices").is_array() || p.raw("slices").empty()) {
    p.fail("slices", "must be a nonempty array of {t, basis}");
    return std::nullopt;
  }
  Real prev = out.t0;
  const json& slices = p.raw("slices");
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const std::string field = "slices[" + std::to_string(i) + "]";
    const json& s = slices[i];
    if (!s.is_object() || !s.contains("t") || !s["t"].is_number()) {
      p.fail(field + ".t", "required number is missing");
      return std::nullopt;
    }
    Real t = s["t"].get<Real>();
    if (!(t > prev) && !(i == 0 && t == out.t0)) {
      p.fail(field + ".t", "slice times must increase strictly");
      return std::nullopt;
    }
    prev = t;
    out.times.push_back(t);
    std::vector<Vector> basis;
    if (s.contains("basis") && !(s["basis"].is_string() && s["basis"].get<std::string>() == "computational")) {
      if (!s["basis"].is_array()) {
        p.fail(field + ".basis", "must be \"computational\" or an array of vectors");
        return std::nullopt;
      }
      for (std::size_t b = 0; b < s["basis"].size(); ++b) {
        auto v = p.complex_vector(field + ".basis[" + std::to_string(b) + "]", s["basis"][b], 1);
        if (!v) return std::nullopt;
        if (v->size() != d) {
          p.fail(field + ".basis[" + std::to_string(b) + "]", "dimension differs from the hamiltonian");
          return std::nullopt;
        }
        basis.push_back(*v);
      }
      std::vector<StateVector> states;
      TensorSpace space("system", static_cast<std::size_t>(d));
      for (const auto& v : basis) states.emplace_back(space, v);
      Real defect = basis_defect(states);
      if (defect > kValidityTol) {
        p.fail(field + ".basis", "not orthonormal and complete (defect " + format_real(defect) + ")");
        return std::nullopt;
      }
    }
    out.bases.push_back(std::move(basis));
  }
  return out;
}

std::optional<GrahamParams> parse_graham(Params& p) {
  auto born = p.reals("born", 2);
  auto eps = p.real("epsilon");
  GrahamParams out;
  bool ok = born && eps;
  if (born) {
    Real sum = std::accumulate(born->begin(), born->end(), 0.0);
    if (std::abs(sum - 1.0) > kSimplexTol || *std::min_element(born->begin(), born->end()) < 0.0) {
      p.fail("born", "must be a probability vector (sum = " + format_real(sum) + ")");
      ok = false;
    }
  }
  if (eps && !(*eps > 0.0)) {
    p.fail("epsilon", "must be positive");
    ok = false;
  }
  if (!p.has("trials")) {
    p.fail("trials", "required integer or array of integers is missing");
    return std::nullopt;
  }
  const json& t = p.raw("trials");
  std::vector<json> items = t.is_array() ? std::vector<json>(t.begin(), t.end()) : std::vector<json>{t};
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].is_number_integer() || items[i].get<std::int64_t>() < 1 || items[i].get<std::int64_t>() > 1'000'000) {
      p.fail("trials", "entries must be integers in [1, 1000000]");
      ok = false;
      break;
    }
    out.trials.push_back(items[i].get<std::size_t>());
  }
  if (items.empty()) {
    p.fail("trials", "must not be empty");
    ok = false;
  }
  if (!ok) return std::nullopt;
  out.born = *born;
  out.epsilon = *eps;
  return out;
}

std::optional<LedgerParams> parse_ledger(Params& p, const std::string& kind) {
  LedgerParams out;
  auto irrelevant = p.boolean("correlations_irrelevant", true);
  if (!irrelevant) return std::nullopt;
  out.correlations_irrelevant = *irrelevant;
  if (kind == "ledger_classical") {
    auto probs = p.reals("probabilities", 2);
    if (!probs) return std::nullopt;
    Real sum = std::accumulate(probs->begin(), probs->end(), 0.0);
    std::size_t positive = static_cast<std::size_t>(std::count_if(probs->begin(), probs->end(), [](Real x) { return x > 0.0; }));
    if (std::abs(sum - 1.0) > kSimplexTol || *std::min_element(probs->begin(), probs->end()) < 0.0) {
      p.fail("probabilities", "must be a probability vector (sum = " + format_real(sum) + ")");
      return std::nullopt;
    }
    if (positive < 2) {
      p.fail("probabilities", "nothing to measure: fewer than two outcomes have positive probability");
      return std::nullopt;
    }
    out.probabilities = *probs;
    return out;
  }
  auto amps = p.amplitudes();
  if (!amps) return std::nullopt;
  out.amplitudes = *amps;
  if (kind == "ledger_branching") {
    const auto n = static_cast<std::int64_t>(amps->size());
    auto env = p.integer("env_dim", n, 1 << 10, n + 1);
    if (!env) return std::nullopt;
    out.env_dim = static_cast<std::size_t>(*env);
  }
  return out;
}

/// Parses the params block of `kind`, recording diagnostics.
using AnyParams = std::variant<std::monostate, PremeasurementParams, ChainParams, BranchParams, CollapseParams, WignerParams,
                               SchmidtParams, MasterParams, HistoriesParams, GrahamParams, LedgerParams>;

template <class T>
AnyParams wrap(std::optional<T> v) {
  if (!v) return std::monostate{};
  return std::move(*v);
}

AnyParams parse_params(const std::string& kind, const json& params, std::vector<Diagnostic>& diags) {
  Params p(params, diags);
  if (kind == "premeasurement") return wrap(parse_premeasurement(p));
  if (kind == "chain") return wrap(parse_chain(p));
  if (kind == "branch_recohere") return wrap(parse_branch(p));
  if (kind == "collapse_mc") return wrap(parse_collapse(p));
  if (kind == "wigner") return wrap(parse_wigner(p));
  if (kind == "schmidt") return wrap(parse_schmidt(p));
  if (kind == "master") return wrap(parse_master(p));
  if (kind == "histories") return wrap(parse_histories(p));
  if (kind == "graham") return wrap(parse_graham(p));
  return wrap(parse_ledger(p, kind));
}

struct Header {
  std::string kind;
  std::uint64_t seed = 0;
  fs::path output = "decolab-out";
};

std::optional<Header> parse_header(const json& doc, std::vector<Diagnostic>& diags) {
  if (!doc.is_object()) {
    diags.push_back({"", "scenario must be a JSON object"});
    return std::nullopt;
  }
  Header h;
  if (!doc.contains("schema") || !doc["schema"].is_string()) {
    diags.push_back({"schema", std::string("required; expected \"") + kSchemaId + "\""});
  } else if (doc["schema"].get<std::string>() != kSchemaId) {
    diags.push_back({"schema", "unsupported schema '" + doc["schema"].get<std::string>() + "'; expected \"" + kSchemaId + "\""});
  }
  if (!doc.contains("kind") || !doc["kind"].is_string()) {
    diags.push_back({"kind", "required string is missing"});
  } else {
    h.kind = doc["kind"].get<std::string>();
    if (std::find(kinds().begin(), kinds().end(), h.kind) == kinds().end()) diags.push_back({"kind", "unknown experiment kind '" + h.kind + "'"});
  }
  if (doc.contains("seed")) {
    const auto& seed = doc["seed"];
    if (!seed.is_number_unsigned() && !(seed.is_number_integer() && seed.get<std::int64_t>() >= 0)) diags.push_back({"seed", "must be a nonnegative integer"});
    else h.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("output")) {
    if (!doc["output"].is_string() || doc["output"].get<std::string>().empty()) diags.push_back({"output", "must be a nonempty path string"});
    else h.output = doc["output"].get<std::string>();
  }
  if (doc.contains("params") && !doc["params"].is_object()) diags.push_back({"params", "must be an object"});
  if (!diags.empty()) return std::nullopt;
  return h;
}

// ---------------------------------------------------------------------------
// Artifact writing.

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  void write(const std::string& name, const std::string& bytes) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + (dir_ / name).string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out) throw IoError("failed writing " + (dir_ / name).string());
    entries_.push_back({{"path", name}, {"bytes", bytes.size()}, {"sha256", sha256_hex(bytes)}});
    files_.push_back(name);
  }

  void write_json(const std::string& name, const json& j) { write(name, j.dump(2) + "\n"); }

  const json& entries() const { return entries_; }
  const std::vector<fs::path>& files() const { return files_; }
  std::vector<fs::path>& files() { return files_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json entries_ = json::array();
  std::vector<fs::path> files_;
};

std::string csv_join(const std::vector<std::string>& cells) {
  std::string out;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out + "\n";
}

json reals_json(const RealVector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

StateVector system_state(const Vector& amps) { return {TensorSpace(kSystemLabel, static_cast<std::size_t>(amps.size())), amps}; }

Real global_purity(const StateVector& psi) {
  Real n2 = psi.amplitudes().squaredNorm();
  return n2 * n2;
}

// ---------------------------------------------------------------------------
// Runners.

void run_premeasurement(const PremeasurementParams& p, Artifacts& out) {
  StateVector psi = system_state(p.amplitudes);
  auto app = ApparatusModel::with_overlap(kApparatusLabel, static_cast<std::size_t>(p.amplitudes.size()), p.overlap);
  auto basis = computational_basis(psi.space());
  StateVector joint = premeasure(psi, app, basis);
  check_invariant(std::abs(joint.norm() - 1.0) <= kValidityTol, "premeasurement changed the norm");
  std::vector<std::string> keep{kSystemLabel};
  DensityOperator reduced = partial_trace(joint, keep);
  auto factor = decoherence_factor(reduced, basis);
  out.write_json("joint_state.json", io::to_json(joint));
  out.write_json("reduced_system.json", io::to_json(reduced));
  out.write_json("summary.json", {{"max_off_diagonal", factor.max_off_diagonal()},
                                  {"populations", reals_json(factor.populations)},
                                  {"S_lin_system", linear_entropy(reduced)},
                                  {"global_purity", global_purity(joint)}});
}

void run_chain(const ChainParams& p, Artifacts& out) {
  const auto n = static_cast<std::size_t>(p.amplitudes.size());
  StateVector psi = system_state(p.amplitudes);
  ChainSpec spec{computational_basis(psi.space()), {}, std::nullopt, p.order};
  for (std::size_t i = 0; i < p.overlaps.size(); ++i)
    spec.links.push_back(ApparatusModel::with_overlap("chi" + std::to_string(i + 1), n, p.overlaps[i]));
  if (p.observer_overlap) spec.observer = ApparatusModel::with_overlap("observer", n, *p.observer_overlap);
  auto states = chain_propagate(spec, psi);

  std::string csv = "step,off_diagonal,S_lin,global_purity\n";
  std::vector<std::string> keep{kSystemLabel};
  for (std::size_t s = 1; s < states.size(); ++s) {
    Real purity = global_purity(states[s]);
    check_invariant(std::abs(purity - 1.0) <= kValidityTol, "global purity drifted at step " + std::to_string(s));
    DensityOperator reduced = partial_trace(states[s], keep);
    auto factor = decoherence_factor(reduced, spec.system_basis);
    csv += csv_join({std::to_string(s), format_real(factor.max_off_diagonal()), format_real(linear_entropy(reduced)), format_real(purity)});
  }
  out.write("chain.csv", csv);
}

void run_branch(const BranchParams& p, Artifacts& out) {
  const auto n = static_cast<std::size_t>(p.amplitudes.size());
  StateVector psi = system_state(p.amplitudes);
  TensorSpace app(kApparatusLabel, n + 1), env(kEnvironmentLabel, p.env_dim);
  StateVector initial = tensor(tensor(psi, StateVector::basis(app, 0)), StateVector::basis(env, 0));
  auto steps = branch_and_recohere(initial);
  std::vector<const StateVector*> all{&initial, &steps[0], &steps[1], &steps[2]};
  const char* labels[] = {"initial", "apparatus_entangled", "environment_entangled", "apparatus_reset"};
  std::string csv = "step,label,global_purity,apparatus_ready_fidelity,S_lin_system,S_lin_apparatus,system_off_diagonal\n";
  std::vector<std::string> keep_sys{kSystemLabel}, keep_app{kApparatusLabel};
  auto basis = computational_basis(psi.space());
  for (std::size_t s = 0; s < all.size(); ++s) {
    Real purity = global_purity(*all[s]);
    check_invariant(std::abs(purity - 1.0) <= kValidityTol, "global purity drifted at step " + std::to_string(s));
    DensityOperator rs = partial_trace(*all[s], keep_sys), ra = partial_trace(*all[s], keep_app);
    Real fidelity = ra.matrix()(0, 0).real();
    csv += csv_join({std::to_string(s), labels[s], format_real(purity), format_real(fidelity), format_real(linear_entropy(rs)),
                     format_real(linear_entropy(ra)), format_real(decoherence_factor(rs, basis).max_off_diagonal())});
  }
  out.write("recoherence.csv", csv);
  out.write_json("final_state.json", io::to_json(steps[2]));
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void run_collapse(const CollapseParams& p, std::uint64_t seed, unsigned threads, Artifacts& out) {
  StateVector psi = system_state(p.amplitudes);
  auto basis = computational_basis(psi.space());
  std::vector<std::size_t> outcomes(p.trials);
  parallel_for(p.trials, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) outcomes[i] = collapse(psi, basis, splitmix64(seed + i)).outcome_index;
  });
  std::vector<std::size_t> counts(basis.size(), 0);
  for (auto o : outcomes) ++counts[o];

  std::string csv = "outcome,born_probability,count,frequency\n";
  Real chi2 = 0.0;
  std::size_t cells = 0;
  for (std::size_t k = 0; k < basis.size(); ++k) {
    Real born = born_probability(basis[k], psi);
    Real freq = static_cast<Real>(counts[k]) / static_cast<Real>(p.trials);
    csv += csv_join({std::to_string(k), format_real(born), std::to_string(counts[k]), format_real(freq)});
    if (born < kNegligibleOutcome) {
      check_invariant(counts[k] == 0, "an excluded outcome was sampled");
      continue;
    }
    Real expected = born * static_cast<Real>(p.trials);
    chi2 += (static_cast<Real>(counts[k]) - expected) * (static_cast<Real>(counts[k]) - expected) / expected;
    ++cells;
  }
  Real p_value = 1.0;
  if (cells >= 2) p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<Real>(cells - 1)), chi2));
  out.write("outcomes.csv", csv);
  out.write_json("first_record.json", io::to_json(collapse(psi, basis, splitmix64(seed))));
  out.write_json("summary.json", {{"trials", p.trials},
                                  {"seed", seed},
                                  {"chi_square", chi2},
                                  {"degrees_of_freedom", cells - 1},
                                  {"p_value", p_value},
                                  {"trial_seed_rule", "splitmix64(seed + trial_index)"}});
}

GridState wigner_state(const WignerParams& p) {
  const auto& g = p.grid;
  auto gauss = [](Real q, Real c) { return std::exp(-(q - c) * (q - c) / 2.0); };
  const Real a = p.separation;
  if (p.state == "gaussian") return GridState::from_wavefunction(g, sample_wavefunction(g, [&](Real q) { return Complex(gauss(q, 0.0)); }));
  if (p.state == "excited") return GridState::from_wavefunction(g, sample_wavefunction(g, [&](Real q) { return Complex(q * gauss(q, 0.0)); }));
  if (p.state == "cat")
    return GridState::from_wavefunction(g, sample_wavefunction(g, [&](Real q) { return Complex(gauss(q, -a) + gauss(q, a)); }));
  auto left = GridState::from_wavefunction(g, sample_wavefunction(g, [&](Real q) { return Complex(gauss(q, -a)); }));
  auto right = GridState::from_wavefunction(g, sample_wavefunction(g, [&](Real q) { return Complex(gauss(q, a)); }));
  return GridState::mixture({{0.5, left}, {0.5, right}});
}

void run_wigner(const WignerParams& p, unsigned threads, Artifacts& out) {
  GridState state = wigner_state(p);
  WignerGrid w = wigner_transform(state, threads);
  check_invariant(std::abs(w.integral() - 1.0) <= kGridNormTol, "Wigner function is not normalized");
  auto marg = marginals(w);
  std::ostringstream csv, bin;
  io::write_wigner_csv(csv, w);
  io::write_wigner_binary(bin, w);
  out.write("wigner.csv", csv.str());
  out.write("wigner.bin", bin.str());

  std::string mq = "q,position_density\n", mp = "p,momentum_density\n";
  for (std::size_t j = 0; j < p.grid.n_points; ++j) mq += csv_join({format_real(w.q(j)), format_real(marg.position(static_cast<Eigen::Index>(j)))});
  for (std::size_t m = 0; m < p.grid.n_points; ++m) mp += csv_join({format_real(w.p(m)), format_real(marg.momentum(static_cast<Eigen::Index>(m)))});
  out.write("marginal_q.csv", mq);
  out.write("marginal_p.csv", mp);

  json summary{{"state", p.state},
               {"W_min", w.values.minCoeff()},
               {"W_max", w.values.maxCoeff()},
               {"integral", w.integral()},
               {"max_imag_residue", w.max_imag_residue},
               {"purity_direct", state.purity()},
               {"purity_phase_space", 2.0 * std::numbers::pi * w.values.array().square().sum() * w.dp() * w.dq()}};
  Real origin_index;
  if (p.grid.q_min <= 0.0 && 0.0 < p.grid.q_max && detail::on_lattice(0.0, p.grid.q_min, p.grid.dq(), origin_index))
    summary["W_origin"] = w.values(static_cast<Eigen::Index>(p.grid.n_points / 2), static_cast<Eigen::Index>(origin_index));
  out.write_json("summary.json", summary);
}

void run_schmidt(const SchmidtParams& p, Artifacts& out) {
  StateVector psi(p.space, p.amplitudes);
  auto s = schmidt_decompose(psi, p.system);
  Real err = (s.reconstruct().amplitudes() - psi.amplitudes()).cwiseAbs().maxCoeff();
  check_invariant(err < kValidityTol, "Schmidt reconstruction error " + format_real(err));
  DensityOperator reduced = partial_trace(psi, p.system);
  auto w = s.weights();
  out.write_json("schmidt.json", io::to_json(s));
  out.write_json("summary.json", {{"coefficients", s.coefficients},
                                  {"weights", w},
                                  {"schmidt_rank", s.rank()},
                                  {"degenerate", s.degenerate},
                                  {"S_ensemble_system_nats", ensemble_entropy(reduced)},
                                  {"S_ensemble_system_bits", ensemble_entropy_bits(reduced)},
                                  {"S_lin_system", linear_entropy(reduced)},
                                  {"reconstruction_error", err}});
}

void run_master(const MasterParams& p, Artifacts& out) {
  RateMatrix a(p.rates);
  std::string csv = "t";
  for (Eigen::Index n = 0; n < p.p0.size(); ++n) csv += ",p_" + std::to_string(n);
  csv += "\n";
  for (Real t : p.times) {
    RealVector pt = pauli_master_evolve(p.p0, a, t);
    check_invariant(std::abs(pt.sum() - 1.0) <= kSimplexTol && pt.minCoeff() >= -1e-12, "probability left the simplex at t = " + format_real(t));
    std::vector<std::string> cells{format_real(t)};
    for (Eigen::Index n = 0; n < pt.size(); ++n) cells.push_back(format_real(pt(n)));
    csv += csv_join(cells);
  }
  out.write("master.csv", csv);
}

void run_histories(const HistoriesParams& p, Artifacts& out) {
  TensorSpace space("system", static_cast<std::size_t>(p.hamiltonian.rows()));
  std::vector<ProjectorSet> sets;
  for (const auto& b : p.bases) {
    if (b.empty()) {
      sets.push_back(ProjectorSet::from_basis(computational_basis(space)));
      continue;
    }
    std::vector<StateVector> states;
    for (const auto& v : b) states.emplace_back(space, v);
    sets.push_back(ProjectorSet::from_basis(states));
  }
  HistorySpec spec{p.times, sets, Hamiltonian(space, p.hamiltonian), DensityOperator(space, p.initial), p.t0};
  auto all = all_history_probabilities(spec);
  Real total = 0.0;
  std::string csv = "history,probability,single_sided_re,single_sided_im,defect\n";
  for (const auto& h : all) {
    std::string label;
    for (std::size_t i = 0; i < h.history.size(); ++i) label += (i ? "|" : "") + std::to_string(h.history[i]);
    total += h.probability;
    csv += csv_join({label, format_real(h.probability), format_real(h.single_sided.real()), format_real(h.single_sided.imag()),
                     format_real(std::abs(h.single_sided - h.probability))});
  }
  check_invariant(std::abs(total - 1.0) <= kValidityTol, "history probabilities sum to " + format_real(total));
  out.write("histories.csv", csv);
  out.write_json("summary.json", {{"total_probability", total}, {"consistency_defect", consistency_defect(spec)}, {"histories", all.size()}});
}

void run_graham(const GrahamParams& p, Artifacts& out) {
  std::string csv = "N,epsilon,deviant_norm\n";
  json values = json::array();
  for (auto n : p.trials) {
    Real v = graham_deviant_norm(p.born, n, p.epsilon);
    check_invariant(v >= 0.0 && v <= 1.0 + 1e-12, "deviant norm outside [0, 1]");
    csv += csv_join({std::to_string(n), format_real(p.epsilon), format_real(v)});
    values.push_back({{"N", n}, {"deviant_norm", v}});
  }
  out.write("graham.csv", csv);
  out.write_json("summary.json", {{"born", p.born}, {"epsilon", p.epsilon}, {"results", values}});
}

void run_ledger(const std::string& kind, const LedgerParams& p, Artifacts& out) {
  LedgerOptions opt{p.correlations_irrelevant};
  std::vector<LedgerRow> rows;
  std::vector<Complex> amps(p.amplitudes.data(), p.amplitudes.data() + p.amplitudes.size());
  if (kind == "ledger_classical") rows = classical_ledger(p.probabilities, opt);
  else if (kind == "ledger_quantum") rows = quantum_collapse_ledger(amps, opt);
  else rows = branching_ledger(amps, p.env_dim, opt);
  for (const auto& r : rows) {
    check_invariant(r.s_physical >= r.s_ensemble - 1e-12, "physical entropy below ensemble entropy at step " + r.step);
    check_invariant(r.information >= 0.0, "negative information at step " + r.step);
    if (kind == "ledger_branching") check_invariant(r.s_ensemble <= 1e-10, "global state stopped being pure at step " + r.step);
  }
  std::ostringstream csv;
  io::write_ledger_csv(csv, rows);
  out.write("ledger.csv", csv.str());
}

}  // namespace

std::vector<Diagnostic> validate(const json& doc) {
  std::vector<Diagnostic> diags;
  auto header = parse_header(doc, diags);
  if (!header) return diags;
  static const json empty = json::object();
  parse_params(header->kind, doc.contains("params") ? doc["params"] : empty, diags);
  return diags;
}

RunResult run(const json& doc, const RunOptions& options) {
  RunResult result;
  auto header = parse_header(doc, result.diagnostics);
  if (!header) {
    result.exit_code = kExitSchema;
    return result;
  }
  static const json empty = json::object();
  AnyParams params = parse_params(header->kind, doc.contains("params") ? doc["params"] : empty, result.diagnostics);
  if (!result.diagnostics.empty() || std::holds_alternative<std::monostate>(params)) {
    result.exit_code = kExitSchema;
    return result;
  }
  const std::uint64_t seed = options.seed.value_or(header->seed);
  result.output_dir = options.output.value_or(header->output);

  try {
    Artifacts out(result.output_dir);
    const auto& kind = header->kind;
    if (kind == "premeasurement") run_premeasurement(std::get<PremeasurementParams>(params), out);
    else if (kind == "chain") run_chain(std::get<ChainParams>(params), out);
    else if (kind == "branch_recohere") run_branch(std::get<BranchParams>(params), out);
    else if (kind == "collapse_mc") run_collapse(std::get<CollapseParams>(params), seed, options.threads, out);
    else if (kind == "wigner") run_wigner(std::get<WignerParams>(params), options.threads, out);
    else if (kind == "schmidt") run_schmidt(std::get<SchmidtParams>(params), out);
    else if (kind == "master") run_master(std::get<MasterParams>(params), out);
    else if (kind == "histories") run_histories(std::get<HistoriesParams>(params), out);
    else if (kind == "graham") run_graham(std::get<GrahamParams>(params), out);
    else run_ledger(kind, std::get<LedgerParams>(params), out);

    json manifest{{"schema", "decolab.manifest.v1"},
                  {"scenario_schema", kSchemaId},
                  {"kind", kind},
                  {"seed", seed},
                  {"version", DECOLAB_VERSION},
                  {"files", out.entries()}};
    std::ofstream mf(out.dir() / "manifest.json", std::ios::binary | std::ios::trunc);
    mf << manifest.dump(2) << "\n";
    mf.close();
    if (!mf) throw IoError("failed writing manifest.json");
    result.files = out.files();
    result.files.emplace_back("manifest.json");
  } catch (const IoError& e) {
    result.exit_code = kExitIo;
    result.error = e.what();
  } catch (const InvariantFailure& e) {
    result.exit_code = kExitInvariant;
    result.error = std::string("invariant violation: ") + e.what();
  } catch (const Error& e) {
    result.exit_code = kExitInvariant;
    result.error = e.what();
  }
  return result;
}

}  // namespace decolab::scenario
