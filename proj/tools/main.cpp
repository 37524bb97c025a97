#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "decolab/parallel.hpp"
#include "scenario.hpp"

namespace sc = decolab::scenario;

namespace {

int report_diagnostics(const std::string& file, const std::vector<sc::Diagnostic>& diags) {
  for (const auto& d : diags) std::cerr << file << ": " << sc::to_string(d) << "\n";
  return sc::kExitSchema;
}

std::optional<sc::json> load_or_report(const std::string& file, int& code) {
  try {
    return sc::load(file);
  } catch (const sc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    code = sc::kExitIo;
  } catch (const sc::json::parse_error& e) {
    std::cerr << file << ": malformed JSON: " << e.what() << "\n";
    code = sc::kExitSchema;
  }
  return std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"decolab: decoherence and measurement experiments"};
  app.set_version_flag("--version", std::string("decolab ") + DECOLAB_VERSION);
  app.require_subcommand(1);

  std::string run_file, validate_file;
  std::string out_dir;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run a scenario file and write its artifacts");
  run->add_option("file", run_file, "Scenario JSON")->required();
  auto* out_opt = run->add_option("--out", out_dir, "Output directory (overrides the scenario)");
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed (overrides the scenario)");

  auto* val = app.add_subcommand("validate", "Check a scenario file without running it");
  val->add_option("file", validate_file, "Scenario JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? sc::kExitOk : sc::kExitFailure;
  }

  int code = sc::kExitOk;
  if (*val) {
    auto doc = load_or_report(validate_file, code);
    if (!doc) return code;
    auto diags = sc::validate(*doc);
    if (!diags.empty()) return report_diagnostics(validate_file, diags);
    std::cout << validate_file << ": ok\n";
    return sc::kExitOk;
  }

  auto doc = load_or_report(run_file, code);
  if (!doc) return code;
  sc::RunOptions opts;
  if (*out_opt) opts.output = out_dir;
  if (*seed_opt) opts.seed = seed;
  opts.threads = decolab::threads_from_env();
  auto result = sc::run(*doc, opts);
  if (!result.diagnostics.empty()) return report_diagnostics(run_file, result.diagnostics);
  if (result.exit_code != sc::kExitOk) {
    std::cerr << "error: " << result.error << "\n";
    return result.exit_code;
  }
  for (const auto& f : result.files) std::cout << (result.output_dir / f).string() << "\n";
  return sc::kExitOk;
}
