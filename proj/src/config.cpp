#include "horde/config.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "horde/io.hpp"

namespace horde {

namespace pt = boost::property_tree;

ConfigValidationError::ConfigValidationError(std::vector<std::string> problems)
    : ConfigError([&] {
        std::string msg = "invalid configuration:";
        for (const auto& p : problems) msg += "\n  - " + p;
        return msg;
      }()),
      problems_(std::move(problems)) {}

namespace {

using Getter = std::function<std::optional<std::string>(const ExperimentConfig&)>;
using Setter = std::function<std::optional<std::string>(ExperimentConfig&, std::string_view)>;

struct Field {
  std::string_view section;
  std::string_view key;
  Getter get;
  Setter set;
};

template <typename Access>
Field real(std::string_view sec, std::string_view key, Access acc) {
  return {sec, key, [acc](const ExperimentConfig& c) -> std::optional<std::string> {
            return io::format_double(acc(const_cast<ExperimentConfig&>(c)));
          },
          [acc](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            const auto x = io::parse_double(v);
            if (!x) return "expected a number";
            acc(c) = *x;
            return std::nullopt;
          }};
}

template <typename Access>
Field count(std::string_view sec, std::string_view key, Access acc) {
  return {sec, key, [acc](const ExperimentConfig& c) -> std::optional<std::string> {
            return std::to_string(acc(const_cast<ExperimentConfig&>(c)));
          },
          [acc](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            const auto x = io::parse_uint(v);
            if (!x) return "expected a non-negative integer";
            acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(*x);
            return std::nullopt;
          }};
}

template <typename Access>
Field flag(std::string_view sec, std::string_view key, Access acc) {
  return {sec, key, [acc](const ExperimentConfig& c) -> std::optional<std::string> {
            return acc(const_cast<ExperimentConfig&>(c)) ? "true" : "false";
          },
          [acc](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            if (v == "true" || v == "on" || v == "yes" || v == "1") {
              acc(c) = true;
            } else if (v == "false" || v == "off" || v == "no" || v == "0") {
              acc(c) = false;
            } else {
              return "expected true or false";
            }
            return std::nullopt;
          }};
}

template <typename E, typename Access>
Field choice(std::string_view sec, std::string_view key, std::vector<std::pair<std::string_view, E>> names,
             Access acc) {
  return {sec, key,
          [acc, names](const ExperimentConfig& c) -> std::optional<std::string> {
            const E value = acc(const_cast<ExperimentConfig&>(c));
            for (const auto& [n, e] : names) {
              if (e == value) return std::string(n);
            }
            return std::nullopt;
          },
          [acc, names](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            for (const auto& [n, e] : names) {
              if (n == v) {
                acc(c) = e;
                return std::nullopt;
              }
            }
            std::string msg = "expected one of";
            for (const auto& [n, e] : names) msg += " " + std::string(n);
            return msg;
          }};
}

template <typename Access>
Field text(std::string_view sec, std::string_view key, Access acc) {
  return {sec, key, [acc](const ExperimentConfig& c) -> std::optional<std::string> {
            const std::string& s = acc(const_cast<ExperimentConfig&>(c));
            if (s.empty()) return std::nullopt;
            return s;
          },
          [acc](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            acc(c) = std::string(v);
            return std::nullopt;
          }};
}

Field real_list(std::string_view sec, std::string_view key, std::vector<double> ExperimentConfig::*member) {
  return {sec, key,
          [member](const ExperimentConfig& c) -> std::optional<std::string> {
            std::string out;
            for (std::size_t i = 0; i < (c.*member).size(); ++i) {
              if (i) out += ',';
              io::append_double(out, (c.*member)[i]);
            }
            return out;
          },
          [member](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            std::vector<double> values;
            if (!io::trim(v).empty()) {
              for (auto part : io::split(v, ',')) {
                const auto x = io::parse_double(part);
                if (!x) return "expected a comma-separated list of numbers";
                values.push_back(*x);
              }
            }
            c.*member = std::move(values);
            return std::nullopt;
          }};
}

// Seeds are written only when set, and setting one marks it explicit.
Field seed(std::string_view sec, std::string_view key, std::uint64_t ExperimentConfig::*value,
           bool ExperimentConfig::*is_set) {
  return {sec, key,
          [value, is_set](const ExperimentConfig& c) -> std::optional<std::string> {
            if (!(c.*is_set)) return std::nullopt;
            return std::to_string(c.*value);
          },
          [value, is_set](ExperimentConfig& c, std::string_view v) -> std::optional<std::string> {
            const auto x = io::parse_uint(v);
            if (!x) return "expected a non-negative integer";
            c.*value = static_cast<std::uint64_t>(*x);
            c.*is_set = true;
            return std::nullopt;
          }};
}

#define HORDE_ACCESS(member) [](ExperimentConfig& c) -> auto& { return c.member; }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(text("experiment", "preset", HORDE_ACCESS(preset)));
    f.push_back(choice<EnvironmentKind>(
        "experiment", "environment",
        {{"chain", EnvironmentKind::chain}, {"pen", EnvironmentKind::pen}, {"replay", EnvironmentKind::replay}},
        HORDE_ACCESS(environment)));
    f.push_back(text("experiment", "replay_path", HORDE_ACCESS(replay_path)));
    f.push_back(count("experiment", "runs", HORDE_ACCESS(runs)));
    f.push_back(count("experiment", "steps", HORDE_ACCESS(steps)));
    f.push_back(count("experiment", "episodes", HORDE_ACCESS(episodes)));
    f.push_back(seed("experiment", "seed", &ExperimentConfig::seed, &ExperimentConfig::seed_set));
    f.push_back(count("experiment", "workers", HORDE_ACCESS(workers)));
    f.push_back(flag("experiment", "realtime", HORDE_ACCESS(realtime)));
    f.push_back(real("experiment", "cycle_budget_ms", HORDE_ACCESS(cycle_budget_ms)));
    f.push_back(count("experiment", "log_interval", HORDE_ACCESS(log_interval)));
    f.push_back(flag("experiment", "snapshots", HORDE_ACCESS(snapshots)));
    f.push_back(flag("experiment", "record_stream", HORDE_ACCESS(record_stream)));
    f.push_back(count("experiment", "quarantine_limit", HORDE_ACCESS(quarantine_limit)));

    f.push_back(choice<QuestionKind>("questions", "kind",
                                     {{"constant_product", QuestionKind::constant_product},
                                      {"random_gibbs", QuestionKind::random_gibbs},
                                      {"chain", QuestionKind::chain}},
                                     HORDE_ACCESS(questions)));
    f.push_back(real_list("questions", "gammas", &ExperimentConfig::gammas));
    f.push_back(count("questions", "sensors", HORDE_ACCESS(sensors)));
    f.push_back(count("questions", "count", HORDE_ACCESS(policy_count)));
    f.push_back(count("questions", "nonzeros", HORDE_ACCESS(nonzeros)));
    f.push_back(seed("questions", "seed", &ExperimentConfig::policy_seed, &ExperimentConfig::policy_seed_set));

    f.push_back(choice<TileLayout>("features", "layout",
                                   {{"robot", TileLayout::robot}, {"compact", TileLayout::compact}},
                                   HORDE_ACCESS(layout)));
    f.push_back(choice<ChainRepresentation>(
        "features", "chain_representation",
        {{"inverted", ChainRepresentation::inverted}, {"tabular", ChainRepresentation::tabular}},
        HORDE_ACCESS(chain_features)));

    f.push_back(real("learning", "alpha_theta", HORDE_ACCESS(learning.alpha_theta)));
    f.push_back(real("learning", "alpha_w", HORDE_ACCESS(learning.alpha_w)));
    f.push_back(real("learning", "lambda", HORDE_ACCESS(learning.lambda)));
    f.push_back(real("learning", "initial_theta", HORDE_ACCESS(initial_theta)));

    f.push_back(real("behaviour", "repeat_probability", HORDE_ACCESS(repeat_probability)));

    f.push_back(flag("schedule", "excursions", HORDE_ACCESS(schedule.enabled)));
    f.push_back(real("schedule", "mean_interval", HORDE_ACCESS(schedule.mean_interval)));
    f.push_back(count("schedule", "test_length", HORDE_ACCESS(schedule.test_length)));
    f.push_back(count("schedule", "recenter_length", HORDE_ACCESS(schedule.recenter_length)));
    f.push_back(flag("schedule", "learn_during_recenter", HORDE_ACCESS(learn_during_recenter)));
    f.push_back(flag("schedule", "clear_trace_on_excursion", HORDE_ACCESS(clear_trace_on_excursion)));

    f.push_back(real("evaluation", "mspbe_tau", HORDE_ACCESS(mspbe_tau)));
    f.push_back(real("evaluation", "nmsre_tau", HORDE_ACCESS(nmsre_tau)));
    f.push_back(flag("evaluation", "vector_estimator", HORDE_ACCESS(vector_estimator)));
    f.push_back(flag("evaluation", "rho_weighted_traces", HORDE_ACCESS(rho_weighted_traces)));
    f.push_back(flag("evaluation", "sample_mspbe", HORDE_ACCESS(sample_mspbe)));
    f.push_back(real("evaluation", "covariance_epsilon", HORDE_ACCESS(covariance_epsilon)));
    f.push_back(count("evaluation", "return_horizon", HORDE_ACCESS(return_horizon)));

    f.push_back(choice<ResetKind>("intervention", "reset", {{"none", ResetKind::none}, {"theta", ResetKind::theta}},
                                  HORDE_ACCESS(reset)));
    f.push_back(count("intervention", "at", HORDE_ACCESS(reset_at)));
    f.push_back(real("intervention", "low", HORDE_ACCESS(reset_low)));
    f.push_back(real("intervention", "high", HORDE_ACCESS(reset_high)));

    f.push_back(real("chain", "target_right", HORDE_ACCESS(target_right)));
    f.push_back(real("chain", "behaviour_right", HORDE_ACCESS(behaviour_right)));
    f.push_back(real("chain", "gamma", HORDE_ACCESS(chain_gamma)));

    f.push_back(real("pen", "sensor_noise", HORDE_ACCESS(sensor_noise)));
    return f;
  }();
  return table;
}

#undef HORDE_ACCESS

const Field* find_field(std::string_view section, std::string_view key) {
  for (const auto& f : fields()) {
    if (f.section == section && f.key == key) return &f;
  }
  return nullptr;
}

ExperimentConfig robot_base() {
  ExperimentConfig c;
  c.environment = EnvironmentKind::pen;
  c.questions = QuestionKind::constant_product;
  c.learning = {0.1 / 457.0, 0.001 * (0.1 / 457.0), 0.9};
  c.seed = 1;
  c.seed_set = true;
  c.workers = 0;
  c.log_interval = 1000;
  return c;
}

}  // namespace

std::vector<std::string_view> preset_names() {
  return {"paper-chain", "paper-pen-795", "paper-pen-reset", "paper-gibbs-1000"};
}

bool is_preset(std::string_view name) {
  for (auto p : preset_names()) {
    if (p == name) return true;
  }
  return false;
}

ExperimentConfig preset_config(std::string_view name) {
  if (name == "paper-chain") {
    ExperimentConfig c;
    c.preset = name;
    c.environment = EnvironmentKind::chain;
    c.questions = QuestionKind::chain;
    c.gammas.clear();
    c.runs = 100;
    c.episodes = 2000;
    c.seed = 1;
    c.seed_set = true;
    c.log_interval = 1;
    c.snapshots = false;
    c.learning = {0.05, 0.1, 0.0};
    c.schedule.enabled = false;
    c.mspbe_tau = 100.0;
    c.sample_mspbe = true;
    c.reset = ResetKind::theta;
    c.reset_at = 1000;
    c.reset_low = 0.0;
    c.reset_high = 1.0;
    return c;
  }
  if (name == "paper-pen-795") {
    ExperimentConfig c = robot_base();
    c.preset = name;
    c.gammas = {0.0, 0.5, 0.8};
    c.steps = 261681;
    return c;
  }
  if (name == "paper-pen-reset") {
    ExperimentConfig c = robot_base();
    c.preset = name;
    c.gammas = {0.8};
    c.steps = 216000;
    c.log_interval = 100;
    c.reset = ResetKind::theta;
    c.reset_at = 40000;
    return c;
  }
  if (name == "paper-gibbs-1000") {
    ExperimentConfig c = robot_base();
    c.preset = name;
    c.questions = QuestionKind::random_gibbs;
    c.gammas = {0.0, 0.5, 0.8, 0.95};
    c.policy_count = 1000;
    c.policy_seed = 2;
    c.policy_seed_set = true;
    c.steps = 252000;
    c.schedule.enabled = false;
    c.vector_estimator = false;
    c.snapshots = false;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

ExperimentConfig parse_config(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigValidationError({e.message() + " (line " + std::to_string(e.line()) + ")"});
  }

  std::vector<std::string> problems;
  ExperimentConfig cfg;
  if (const auto preset = tree.get_optional<std::string>("experiment.preset"); preset && !preset->empty()) {
    if (is_preset(*preset)) {
      cfg = preset_config(*preset);
    } else {
      problems.push_back("experiment.preset: unknown preset '" + *preset + "'");
    }
  }

  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      problems.push_back(section + ": key outside of a section");
      continue;
    }
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const Field* f = find_field(section, key);
      if (!f) {
        problems.push_back(name + ": unknown key");
        continue;
      }
      const std::string value(io::trim(node.data()));
      if (const auto err = f->set(cfg, value)) problems.push_back(name + ": " + *err + " (got '" + value + "')");
    }
  }

  for (auto& p : validate_config(cfg)) problems.push_back(std::move(p));
  if (!problems.empty()) throw ConfigValidationError(std::move(problems));
  return cfg;
}

ExperimentConfig load_config(const std::string& path_or_preset) {
  const std::filesystem::path path(path_or_preset);
  if (!std::filesystem::exists(path)) {
    if (is_preset(path_or_preset)) {
      auto cfg = preset_config(path_or_preset);
      if (auto problems = validate_config(cfg); !problems.empty()) throw ConfigValidationError(std::move(problems));
      return cfg;
    }
    throw ConfigValidationError({"no config file or preset named '" + path_or_preset + "'"});
  }
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  pt::ptree tree;
  for (const auto& f : fields()) {
    if (const auto v = f.get(cfg)) {
      tree.put(pt::ptree::path_type(std::string(f.section) + "." + std::string(f.key), '.'), *v);
    }
  }
  std::ostringstream out;
  pt::ini_parser::write_ini(out, tree);
  return out.str();
}

TileCoderConfig tile_layout(const ExperimentConfig& cfg) {
  return cfg.layout == TileLayout::robot ? robot_tile_layout(PenSimEnv::sensor_count)
                                         : compact_tile_layout(PenSimEnv::sensor_count);
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> p;
  auto require = [&p](bool ok, std::string msg) {
    if (!ok) p.push_back(std::move(msg));
  };

  require(c.seed_set, "experiment.seed: missing (seeds must be explicit)");
  require(c.runs >= 1, "experiment.runs: must be at least 1");
  require(c.log_interval >= 1, "experiment.log_interval: must be at least 1");
  require(c.cycle_budget_ms > 0.0, "experiment.cycle_budget_ms: must be positive");

  require(c.learning.alpha_theta > 0.0, "learning.alpha_theta: must be positive");
  require(c.learning.alpha_w > 0.0, "learning.alpha_w: must be positive");
  require(c.learning.lambda >= 0.0 && c.learning.lambda <= 1.0, "learning.lambda: must lie in [0, 1]");
  require(std::isfinite(c.initial_theta), "learning.initial_theta: must be finite");

  require(c.mspbe_tau >= 1.0, "evaluation.mspbe_tau: must be at least 1");
  require(c.nmsre_tau >= 1.0, "evaluation.nmsre_tau: must be at least 1");
  require(c.covariance_epsilon >= 0.0, "evaluation.covariance_epsilon: must be non-negative");
  require(c.return_horizon >= 1, "evaluation.return_horizon: must be at least 1");

  if (c.reset == ResetKind::theta) {
    require(c.reset_low <= c.reset_high, "intervention.low: must not exceed intervention.high");
  }

  switch (c.environment) {
    case EnvironmentKind::chain:
      require(c.questions == QuestionKind::chain, "questions.kind: the chain environment uses kind = chain");
      require(c.target_right >= 0.0 && c.target_right <= 1.0, "chain.target_right: must lie in [0, 1]");
      require(c.behaviour_right > 0.0 && c.behaviour_right < 1.0, "chain.behaviour_right: must lie in (0, 1)");
      require(c.chain_gamma >= 0.0 && c.chain_gamma <= 1.0, "chain.gamma: must lie in [0, 1]");
      break;
    case EnvironmentKind::replay:
      require(!c.replay_path.empty(), "experiment.replay_path: required for the replay environment");
      [[fallthrough]];
    case EnvironmentKind::pen: {
      require(c.questions != QuestionKind::chain, "questions.kind: chain questions need the chain environment");
      require(!c.gammas.empty(), "questions.gammas: must not be empty");
      for (double g : c.gammas) require(g >= 0.0 && g < 1.0, "questions.gammas: every gamma must lie in [0, 1)");
      require(c.sensors >= 1 && c.sensors <= PenSimEnv::sensor_count, "questions.sensors: must lie in [1, 53]");
      require(c.repeat_probability >= 0.0 && c.repeat_probability <= 1.0,
              "behaviour.repeat_probability: must lie in [0, 1]");
      require(c.sensor_noise >= 0.0, "pen.sensor_noise: must be non-negative");
      if (c.questions == QuestionKind::random_gibbs) {
        require(c.policy_seed_set, "questions.seed: missing (seeds must be explicit)");
        require(c.policy_count >= 1, "questions.count: must be at least 1");
        require(c.nonzeros <= tile_layout(c).dimension() * 5, "questions.nonzeros: exceeds n * |A|");
      }
      if (c.schedule.enabled && c.environment == EnvironmentKind::pen) {
        require(c.schedule.mean_interval >= 1.0, "schedule.mean_interval: must be at least 1");
        require(c.schedule.test_length >= c.return_horizon,
                "schedule.test_length: must cover evaluation.return_horizon ticks");
      }
      break;
    }
  }
  return p;
}

}  // namespace horde
