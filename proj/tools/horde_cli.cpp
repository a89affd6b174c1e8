#include <cstdlib>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "horde/config.hpp"
#include "horde/error.hpp"
#include "horde/experiment.hpp"
#include "horde/export.hpp"
#include "horde/io.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_quarantine = 2;
constexpr int exit_error = 3;

horde::ExperimentConfig load(const std::string& source) {
  auto cfg = horde::load_config(source);
  if (const char* env = std::getenv("HORDE_WORKERS"); env && *env) {
    const auto n = horde::io::parse_int(env);
    if (!n || *n < 0) throw horde::ConfigValidationError({"HORDE_WORKERS: expected a non-negative integer"});
    cfg.workers = static_cast<std::uint64_t>(*n);
  }
  return cfg;
}

int report_invalid(const horde::ConfigValidationError& e) {
  std::cerr << e.what() << '\n';
  return exit_invalid;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Horde: parallel off-policy GVF prediction with GTD(lambda)"};
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run an experiment and write its run directory");
  run->add_option("config", config, "Config file or preset name")->required();
  run->add_option("-o,--out", out_dir, "Run directory (default: runs/<preset or config stem>)");
  run->add_flag("-q,--quiet", quiet, "Suppress warnings");

  auto* validate = app.add_subcommand("validate", "Check a config and print it in canonical form");
  validate->add_option("config", config, "Config file or preset name")->required();

  std::string run_dir;
  auto* exp = app.add_subcommand("export", "Write averaged curves for a run directory");
  exp->add_option("run-dir", run_dir, "Directory written by `run`")->required()->check(CLI::ExistingDirectory);

  std::size_t ticks = 200;
  std::size_t questions = 0;
  auto* bench = app.add_subcommand("bench", "Time engine ticks for a config's question bank");
  bench->add_option("config", config, "Config file or preset name")->required();
  bench->add_option("--ticks", ticks, "Learning ticks to time")->check(CLI::PositiveNumber);
  bench->add_option("--questions", questions, "Override the Gibbs question count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) {
      const auto cfg = load(config);
      std::cout << horde::serialize_config(cfg);
      return exit_ok;
    }

    if (*run) {
      const auto cfg = load(config);
      std::filesystem::path dir = out_dir;
      if (dir.empty()) {
        dir = std::filesystem::path("runs") /
              (cfg.preset.empty() ? std::filesystem::path(config).stem().string() : cfg.preset);
      }
      horde::RunOptions opts;
      opts.output_dir = dir;
      if (!quiet) opts.warn = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
      const auto result = horde::run_experiment(cfg, opts);
      std::cout << "wrote " << dir.string() << ": " << result.metrics.size() << " metric rows, "
                << result.excursions.size() << " excursions, " << result.quarantined << " quarantined";
      if (result.overruns > 0) std::cout << ", " << result.overruns << " cycle overruns";
      std::cout << '\n';
      if (result.quarantined > cfg.quarantine_limit) {
        std::cerr << "error: " << result.quarantined << " learners quarantined, limit is " << cfg.quarantine_limit
                  << '\n';
        return exit_quarantine;
      }
      return exit_ok;
    }

    if (*exp) {
      const auto s = horde::export_curves(run_dir);
      std::cout << "exported " << s.questions << " questions over " << s.steps << " steps, " << s.excursions
                << " excursions to " << (std::filesystem::path(run_dir) / "curves").string() << '\n';
      return exit_ok;
    }

    if (*bench) {
      const auto cfg = load(config);
      const auto b = horde::bench_engine(cfg, ticks, questions > 0 ? std::optional(questions) : std::nullopt);
      std::cout << "questions " << b.questions << ", workers " << b.workers << ", ticks " << b.ticks << '\n'
                << "mean " << b.mean_ms << " ms, median " << b.median_ms << " ms, max " << b.max_ms << " ms\n"
                << "full updates per tick " << b.updates_per_tick << '\n';
      return exit_ok;
    }
  } catch (const horde::ConfigValidationError& e) {
    return report_invalid(e);
  } catch (const horde::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return exit_invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_error;
  }
  return exit_ok;
}
