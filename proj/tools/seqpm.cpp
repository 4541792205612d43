// seqpm: one experiment per invocation.
//
//   seqpm decay --config decay.toml --workers 4 --out runs/decay --emit decay
//
// Exit status: 0 when every enabled check passed, 1 when a check failed,
// 2 for configuration errors, 3 for numeric aborts and I/O failures.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "seqpm/config.hpp"
#include "seqpm/errors.hpp"
#include "seqpm/harness.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  unsigned workers{1};
  std::string out;
  std::vector<std::string> emit;
  bool print_config{false};
  bool quiet{false};
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

int run(seqpm::ExperimentKind kind, const Options& opt) {
  using namespace seqpm;
  ExperimentConfig config;
  try {
    config = opt.config_path.empty() ? default_config(kind) : parse_config(slurp(opt.config_path), kind);
    if (opt.seed) config.seed = *opt.seed;
    if (!opt.out.empty()) config.output = opt.out;
    if (auto errors = validate(config); !errors.empty()) throw ConfigError(std::move(errors));
  } catch (const ConfigError& e) {
    for (const auto& m : e.messages()) std::cerr << "config error: " << m << "\n";
    return 2;
  }
  if (opt.print_config) {
    std::cout << serialize_config(config);
    return 0;
  }

  LogSink log;
  if (!opt.quiet) log = [](const std::string& m) { std::cerr << m << "\n"; };
  try {
    const auto record = run_experiment(config, Parallelism{std::max(1u, opt.workers)}, log);
    write_outputs(record, config.output);

    std::vector<std::string> curves = opt.emit;
    if (std::find(curves.begin(), curves.end(), "all") != curves.end()) curves = curve_names(record);
    for (const auto& name : curves) {
      const auto path = std::filesystem::path(config.output) / (name + ".csv");
      std::ofstream(path, std::ios::binary) << emit_plotdata(record, name);
    }

    for (const auto& c : record.checks)
      std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << c.value
                << " threshold=" << c.threshold << "\n";
    if (record.checks.empty()) std::cout << "no checks enabled\n";
    std::cout << "summary: " << (std::filesystem::path(config.output) / "summary.json").string()
              << "\n";
    return record.passed() ? 0 : 1;
  } catch (const ConfigError& e) {
    for (const auto& m : e.messages()) std::cerr << "config error: " << m << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential Pomeau-Manneville maps: transfer operators and limit-theorem diagnostics"};
  app.set_version_flag("--version", std::string(seqpm::kToolVersion));
  app.require_subcommand(1);

  Options opt;
  if (const char* w = std::getenv("SEQPM_WORKERS")) opt.workers = static_cast<unsigned>(std::atoi(w));
  std::optional<seqpm::ExperimentKind> chosen;

  for (const auto& name : seqpm::experiment_kind_names()) {
    auto* sub = app.add_subcommand(name, "run the " + name + " experiment");
    sub->add_option("--config", opt.config_path, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", opt.seed, "master seed (overrides the config)");
    sub->add_option("--workers", opt.workers, "worker threads; results do not depend on it")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", opt.out, "output directory (overrides the config)");
    sub->add_option("--emit", opt.emit, "write CURVE.csv to the output directory; 'all' for every curve")
        ->take_all();
    sub->add_flag("--print-config", opt.print_config, "print the resolved config and exit");
    sub->add_flag("-q,--quiet", opt.quiet, "no progress messages");
    sub->callback([&chosen, name] { chosen = seqpm::parse_kind(name); });
  }

  CLI11_PARSE(app, argc, argv);
  return run(*chosen, opt);
}
