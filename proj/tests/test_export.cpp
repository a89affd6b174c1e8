#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gen.hpp"
#include "horde/config.hpp"
#include "horde/error.hpp"
#include "horde/experiment.hpp"
#include "horde/export.hpp"
#include "horde/io.hpp"

using namespace horde;
namespace fs = std::filesystem;

namespace {

constexpr double missing = std::numeric_limits<double>::quiet_NaN();

MetricRow row(std::uint64_t run, std::uint64_t step, std::uint32_t q, double v) {
  MetricRow r{run, step, q, {}};
  r.values.fill(missing);
  r.values[metric::mspbe_vector] = v;
  r.values[metric::mspbe_scalar] = 2.0 * v;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    for (auto c : io::split(line, ',')) cells.emplace_back(c);
    out.push_back(std::move(cells));
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig small_chain() {
  auto cfg = preset_config("paper-chain");
  cfg.runs = 3;
  cfg.episodes = 60;
  cfg.log_interval = 5;
  cfg.reset_at = 30;
  return cfg;
}

}  // namespace

TEST_CASE("a single question's mean is that question's series") {
  std::vector<MetricRow> rows;
  Rng rng(3);
  for (std::uint64_t s = 1; s <= 20; ++s) rows.push_back(row(0, s * 10, 4, gen::uniform(rng)));
  const auto curves = average_runs(rows);
  const auto means = mean_over_questions(curves);
  REQUIRE(means.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(means[i].step == rows[i].step);
    CHECK(means[i].values[metric::mspbe_vector] == rows[i].values[metric::mspbe_vector]);
    CHECK(std::isnan(means[i].values[metric::nmsre]));
  }
}

TEST_CASE("two constant questions average to the midpoint") {
  std::vector<MetricRow> rows;
  for (std::uint64_t s = 0; s < 5; ++s) {
    rows.push_back(row(0, s, 0, 0.2));
    rows.push_back(row(0, s, 1, 0.4));
  }
  for (const auto& m : mean_over_questions(average_runs(rows))) {
    CHECK(m.values[metric::mspbe_vector] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(m.values[metric::mspbe_scalar] == doctest::Approx(0.6).epsilon(1e-15));
  }
}

TEST_CASE("run averaging ignores missing values") {
  std::vector<MetricRow> rows{row(0, 1, 0, 1.0), row(1, 1, 0, 3.0), row(2, 1, 0, missing)};
  const auto c = average_runs(rows);
  REQUIRE(c.size() == 1);
  CHECK(c[0].values[metric::mspbe_vector] == 2.0);
}

TEST_CASE("NMSRE by excursion matches a direct computation") {
  Rng rng(11);
  std::vector<ExcursionRow> rows;
  for (std::uint64_t run = 0; run < 3; ++run) {
    for (std::uint64_t k = 0; k < 30; ++k) {
      for (std::uint32_t q = 0; q < 2; ++q) {
        const double g = gen::uniform(rng, 0.0, 5.0);
        rows.push_back({run, {k * 100, q, g + gen::uniform(rng, -0.5, 0.5), g}});
      }
    }
  }
  const double tau = 4.0;
  const auto points = nmsre_by_excursion(rows, tau);
  REQUIRE(points.size() == 60);

  for (std::uint32_t q = 0; q < 2; ++q) {
    std::vector<double> sum(30, 0.0);
    for (std::uint64_t run = 0; run < 3; ++run) {
      std::vector<const ExcursionRecord*> recs;
      for (const auto& r : rows) {
        if (r.run == run && r.record.question == q) recs.push_back(&r.record);
      }
      double mean = 0.0;
      for (auto* r : recs) mean += r->sampled_return;
      mean /= static_cast<double>(recs.size());
      double var = 0.0;
      for (auto* r : recs) var += (r->sampled_return - mean) * (r->sampled_return - mean);
      var /= static_cast<double>(recs.size());
      double trace = 0.0;
      for (std::size_t k = 0; k < recs.size(); ++k) {
        const double e = recs[k]->prediction - recs[k]->sampled_return;
        trace += (e * e - trace) / tau;
        sum[k] += trace / var;
      }
    }
    for (const auto& p : points) {
      if (p.question == q) CHECK(p.nmsre == doctest::Approx(sum[p.excursion - 1] / 3.0).epsilon(1e-12));
    }
  }
  const auto means = nmsre_mean(points);
  REQUIRE(means.size() == 30);
  CHECK(means[0].excursion == 1);
}

TEST_CASE("chain export: aligned mean columns equal the mean of per-question rows") {
  const auto dir = fresh_dir("horde_export_chain");
  const auto cfg = small_chain();
  run_experiment(cfg, {.output_dir = dir});
  const auto s = export_curves(dir);
  CHECK(s.questions == 1);
  CHECK(s.steps == 12);

  const auto per_q = csv(dir / "curves" / "per_question.csv");
  const auto mean = csv(dir / "curves" / "mean.csv");
  REQUIRE(mean.size() == 13);
  CHECK(mean[0] == std::vector<std::string>{"step", "nmsre", "mspbe_vector", "mspbe_scalar", "mspbe_sample",
                                            "mspbe_true"});
  for (std::size_t i = 1; i < mean.size(); ++i) {
    REQUIRE(mean[i].size() == 6);
    for (std::size_t k = 2; k < 6; ++k) CHECK_FALSE(mean[i][k].empty());
    CHECK(mean[i][1].empty());
  }

  // Recompute the mean from the written per-question rows.
  std::map<std::string, std::vector<double>> by_step;
  for (std::size_t i = 1; i < per_q.size(); ++i) by_step[per_q[i][0]].push_back(*io::parse_double(per_q[i][3]));
  for (std::size_t i = 1; i < mean.size(); ++i) {
    const auto& xs = by_step.at(mean[i][0]);
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    CHECK(*io::parse_double(mean[i][2]) == m);
  }

  // Per-question values are the means over runs of the raw metrics.
  const auto raw = read_metrics(dir / "metrics.csv");
  std::map<std::uint64_t, std::vector<double>> runs;
  for (const auto& r : raw) runs[r.step].push_back(r.values[metric::mspbe_true]);
  for (std::size_t i = 1; i < per_q.size(); ++i) {
    const auto& xs = runs.at(*io::parse_int(per_q[i][0]));
    CHECK(xs.size() == 3);
    const double m = (xs[0] + xs[1] + xs[2]) / 3.0;
    CHECK(*io::parse_double(per_q[i][6]) == doctest::Approx(m).epsilon(1e-15));
  }
  fs::remove_all(dir);
}

TEST_CASE("metrics and exports are byte-identical across repeated runs") {
  const auto a = fresh_dir("horde_export_a");
  const auto b = fresh_dir("horde_export_b");
  auto cfg = preset_config("paper-pen-795");
  cfg.layout = TileLayout::compact;
  cfg.steps = 400;
  cfg.log_interval = 50;
  cfg.sensors = 4;
  cfg.snapshots = false;
  cfg.schedule.mean_interval = 10.0;
  cfg.schedule.test_length = 51;
  for (const auto& dir : {a, b}) {
    run_experiment(cfg, {.output_dir = dir});
    export_curves(dir);
  }
  for (auto f : {"metrics.csv", "excursions.csv", "curves/per_question.csv", "curves/mean.csv",
                 "curves/nmsre_per_question.csv", "curves/nmsre_mean.csv"}) {
    INFO(f);
    const auto x = slurp(a / f);
    CHECK_FALSE(x.empty());
    CHECK(x == slurp(b / f));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("metrics files round-trip with NaN as empty fields") {
  const auto dir = fresh_dir("horde_metrics_rt");
  fs::create_directories(dir);
  Rng rng(2);
  std::vector<MetricRow> rows;
  for (std::uint64_t s = 0; s < 50; ++s) {
    MetricRow r{s % 3, s, static_cast<std::uint32_t>(s % 7), {}};
    for (auto& v : r.values) v = gen::index(rng, 3) == 0 ? missing : gen::uniform(rng, 0.0, 1e3);
    rows.push_back(r);
  }
  write_metrics(dir / "m.csv", rows);
  const auto back = read_metrics(dir / "m.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].run == rows[i].run);
    CHECK(back[i].step == rows[i].step);
    for (std::size_t k = 0; k < metric::count; ++k) {
      if (std::isnan(rows[i].values[k])) {
        CHECK(std::isnan(back[i].values[k]));
      } else {
        CHECK(back[i].values[k] == rows[i].values[k]);
      }
    }
  }
  { std::ofstream(dir / "bad.csv") << "run,step\n"; }
  CHECK_THROWS(read_metrics(dir / "bad.csv"));
  fs::remove_all(dir);
}
