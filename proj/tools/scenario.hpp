#pragma once

// Scenario documents: validation and execution of the named experiments.
//
//   {
//     "schema": "decolab.scenario.v1",
//     "kind": "chain",
//     "seed": 7,                 (optional, default 0)
//     "output": "out/chain",     (optional, default "decolab-out")
//     "params": { ... }          (kind-specific)
//   }

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace decolab::scenario {

using json = nlohmann::json;

inline constexpr const char* kSchemaId = "decolab.scenario.v1";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitSchema = 2,
  kExitInvariant = 3,
  kExitIo = 4,
};

struct Diagnostic {
  std::string field;
  std::string message;
};

std::string to_string(const Diagnostic& d);

const std::vector<std::string>& kinds();

/// Schema and invariant violations; empty when the document is runnable.
std::vector<Diagnostic> validate(const json& doc);

struct RunOptions {
  std::optional<std::filesystem::path> output;  // overrides "output"
  std::optional<std::uint64_t> seed;            // overrides "seed"
  unsigned threads = 1;
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<Diagnostic> diagnostics;
  std::string error;
  std::filesystem::path output_dir;
  std::vector<std::filesystem::path> files;  // relative to output_dir, manifest last
};

RunResult run(const json& doc, const RunOptions& options);

/// Reads and parses a scenario file; throws IoError or json parse errors.
json load(const std::filesystem::path& path);

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(const std::string& bytes);

}  // namespace decolab::scenario
