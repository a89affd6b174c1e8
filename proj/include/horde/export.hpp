#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "horde/experiment.hpp"

namespace horde {

// A metric series point averaged over runs.
struct CurveRow {
  std::uint64_t step = 0;
  std::uint32_t question = 0;
  std::array<double, metric::count> values{};
};

// Across-question mean at one step.
struct MeanRow {
  std::uint64_t step = 0;
  std::array<double, metric::count> values{};
};

struct NmsrePoint {
  std::uint32_t question = 0;
  std::uint64_t excursion = 0;  // number of relevant excursions observed, from 1
  double nmsre = 0.0;
};

struct NmsreMeanPoint {
  std::uint64_t excursion = 0;
  double nmsre = 0.0;
};

// Mean over runs per (step, question), ignoring NaN entries; sorted by step
// then question.
std::vector<CurveRow> average_runs(std::span<const MetricRow> rows);

// Mean over questions per step, ignoring NaN entries.
std::vector<MeanRow> mean_over_questions(std::span<const CurveRow> rows);

// NMSRE after each relevant excursion, normalised by the population variance
// of all of that question's returns in the run, then averaged over runs.
std::vector<NmsrePoint> nmsre_by_excursion(std::span<const ExcursionRow> rows, double tau);
std::vector<NmsreMeanPoint> nmsre_mean(std::span<const NmsrePoint> points);

struct ExportSummary {
  std::size_t questions = 0;
  std::size_t steps = 0;
  std::size_t excursions = 0;
};

// Reads metrics.csv, excursions.csv and config.ini from a run directory and
// writes curves/{per_question,mean,nmsre_per_question,nmsre_mean}.csv.
ExportSummary export_curves(const std::filesystem::path& run_dir);

}  // namespace horde
