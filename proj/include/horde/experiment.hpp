#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "horde/config.hpp"
#include "horde/engine.hpp"

namespace horde {

namespace metric {
inline constexpr std::size_t nmsre = 0;
inline constexpr std::size_t mspbe_vector = 1;
inline constexpr std::size_t mspbe_scalar = 2;
inline constexpr std::size_t mspbe_sample = 3;
inline constexpr std::size_t mspbe_true = 4;
inline constexpr std::size_t count = 5;
inline constexpr std::array<std::string_view, count> names{"nmsre", "mspbe_vector", "mspbe_scalar", "mspbe_sample",
                                                           "mspbe_true"};
}  // namespace metric

// One logged sample. Metrics that are not tracked are NaN. `step` counts
// ticks for the pen and replay environments and episodes for the chain.
struct MetricRow {
  std::uint64_t run = 0;
  std::uint64_t step = 0;
  std::uint32_t question = 0;
  std::array<double, metric::count> values{};
};

struct ExcursionRow {
  std::uint64_t run = 0;
  ExcursionRecord record;
};

struct JournalRow {
  std::uint64_t run = 0;
  TickReport report;
};

struct RunResult {
  std::vector<GvfQuestion> questions;
  std::vector<MetricRow> metrics;
  std::vector<ExcursionRow> excursions;
  std::vector<JournalRow> journal;
  std::size_t quarantined = 0;  // summed over runs
  std::size_t overruns = 0;
  // Final primary weights per run and question.
  std::vector<std::vector<std::vector<double>>> final_theta;
};

struct RunOptions {
  // Run directory for config.ini, questions.csv, metrics.csv, excursions.csv,
  // journal.csv, stream.csv and snapshots/. Nothing is written when empty.
  std::optional<std::filesystem::path> output_dir;
  std::function<void(const std::string&)> warn;
};

// Validates the config (throwing ConfigValidationError before any work) and
// executes every run.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// Per-run generator for a named stream, derived from the config seed only.
Rng derive_rng(std::uint64_t seed, std::uint64_t run, std::uint64_t stream);

std::size_t resolve_workers(std::uint64_t configured);

// The question bank a pen or replay config describes.
std::vector<GvfQuestion> build_questions(const ExperimentConfig& cfg);

EngineOptions engine_options(const ExperimentConfig& cfg);

struct BenchResult {
  std::size_t questions = 0;
  std::size_t workers = 0;
  std::size_t ticks = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double max_ms = 0.0;
  double updates_per_tick = 0.0;
};

// Times learning ticks of the configured bank on a pre-encoded pen-simulator
// stream. `questions` overrides the Gibbs policy count when given.
BenchResult bench_engine(const ExperimentConfig& cfg, std::size_t ticks,
                         std::optional<std::size_t> questions = std::nullopt);

// CSV writers and readers for the run-directory files.
void write_metrics(const std::filesystem::path& path, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics(const std::filesystem::path& path);
void write_excursions(const std::filesystem::path& path, const std::vector<ExcursionRow>& rows);
std::vector<ExcursionRow> read_excursions(const std::filesystem::path& path);
void write_journal(const std::filesystem::path& path, const std::vector<JournalRow>& rows);
void write_questions(const std::filesystem::path& path, const std::vector<GvfQuestion>& questions,
                     const ActionSet& actions);

}  // namespace horde
