#include "horde/export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <utility>

#include "horde/error.hpp"
#include "horde/evaluation.hpp"
#include "horde/io.hpp"

namespace horde {

namespace fs = std::filesystem;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

struct Mean {
  double sum = 0.0;
  std::size_t n = 0;

  void add(double x) {
    if (std::isnan(x)) return;
    sum += x;
    ++n;
  }
  double value() const { return n ? sum / static_cast<double>(n) : nan; }
};

void append_field(std::string& out, double x) {
  out += ',';
  if (!std::isnan(x)) io::append_double(out, x);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string metric_header(std::string_view keys) {
  std::string h(keys);
  for (auto name : metric::names) (h += ',') += name;
  return h + '\n';
}

}  // namespace

std::vector<CurveRow> average_runs(std::span<const MetricRow> rows) {
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::array<Mean, metric::count>> acc;
  for (const auto& r : rows) {
    auto& m = acc[{r.step, r.question}];
    for (std::size_t k = 0; k < metric::count; ++k) m[k].add(r.values[k]);
  }
  std::vector<CurveRow> out;
  out.reserve(acc.size());
  for (const auto& [key, m] : acc) {
    CurveRow c{key.first, key.second, {}};
    for (std::size_t k = 0; k < metric::count; ++k) c.values[k] = m[k].value();
    out.push_back(c);
  }
  return out;
}

std::vector<MeanRow> mean_over_questions(std::span<const CurveRow> rows) {
  std::map<std::uint64_t, std::array<Mean, metric::count>> acc;
  for (const auto& r : rows) {
    auto& m = acc[r.step];
    for (std::size_t k = 0; k < metric::count; ++k) m[k].add(r.values[k]);
  }
  std::vector<MeanRow> out;
  out.reserve(acc.size());
  for (const auto& [step, m] : acc) {
    MeanRow row{step, {}};
    for (std::size_t k = 0; k < metric::count; ++k) row.values[k] = m[k].value();
    out.push_back(row);
  }
  return out;
}

std::vector<NmsrePoint> nmsre_by_excursion(std::span<const ExcursionRow> rows, double tau) {
  // Rows keep file order, which is excursion order within a run.
  std::map<std::pair<std::uint64_t, std::uint32_t>, std::vector<const ExcursionRecord*>> series;
  for (const auto& r : rows) series[{r.run, r.record.question}].push_back(&r.record);

  std::map<std::pair<std::uint32_t, std::uint64_t>, Mean> acc;
  for (const auto& [key, recs] : series) {
    RunningVariance returns;
    for (const auto* rec : recs) returns.add(rec->sampled_return);
    ExponentialTrace err(tau);
    for (std::size_t k = 0; k < recs.size(); ++k) {
      const double e = recs[k]->prediction - recs[k]->sampled_return;
      err.update(e * e);
      acc[{key.second, k + 1}].add(nmsre_value(err.value(), returns.variance()));
    }
  }
  std::vector<NmsrePoint> out;
  out.reserve(acc.size());
  for (const auto& [key, m] : acc) out.push_back({key.first, key.second, m.value()});
  return out;
}

std::vector<NmsreMeanPoint> nmsre_mean(std::span<const NmsrePoint> points) {
  std::map<std::uint64_t, Mean> acc;
  for (const auto& p : points) acc[p.excursion].add(p.nmsre);
  std::vector<NmsreMeanPoint> out;
  out.reserve(acc.size());
  for (const auto& [k, m] : acc) out.push_back({k, m.value()});
  return out;
}

ExportSummary export_curves(const fs::path& run_dir) {
  const auto metrics = read_metrics(run_dir / "metrics.csv");
  const fs::path excursion_file = run_dir / "excursions.csv";
  const auto excursions = fs::exists(excursion_file) ? read_excursions(excursion_file) : std::vector<ExcursionRow>{};
  double tau = ExperimentConfig{}.nmsre_tau;
  if (const fs::path ini = run_dir / "config.ini"; fs::exists(ini)) tau = load_config(ini.string()).nmsre_tau;

  const auto curves = average_runs(metrics);
  const auto means = mean_over_questions(curves);
  const auto points = nmsre_by_excursion(excursions, tau);
  const auto nmsre_means = nmsre_mean(points);

  const fs::path dir = run_dir / "curves";
  fs::create_directories(dir);

  std::string buf = metric_header("step,question");
  for (const auto& c : curves) {
    buf += std::to_string(c.step);
    (buf += ',') += std::to_string(c.question);
    for (double v : c.values) append_field(buf, v);
    buf += '\n';
  }
  write_file(dir / "per_question.csv", buf);

  buf = metric_header("step");
  for (const auto& m : means) {
    buf += std::to_string(m.step);
    for (double v : m.values) append_field(buf, v);
    buf += '\n';
  }
  write_file(dir / "mean.csv", buf);

  buf = "question,excursion,nmsre\n";
  for (const auto& p : points) {
    buf += std::to_string(p.question);
    (buf += ',') += std::to_string(p.excursion);
    append_field(buf, p.nmsre);
    buf += '\n';
  }
  write_file(dir / "nmsre_per_question.csv", buf);

  buf = "excursion,nmsre\n";
  for (const auto& p : nmsre_means) {
    buf += std::to_string(p.excursion);
    append_field(buf, p.nmsre);
    buf += '\n';
  }
  write_file(dir / "nmsre_mean.csv", buf);

  ExportSummary s;
  std::map<std::uint32_t, int> qs;
  for (const auto& c : curves) qs[c.question];
  s.questions = qs.size();
  s.steps = means.size();
  s.excursions = excursions.size();
  return s;
}

}  // namespace horde
