#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "horde/environments.hpp"
#include "horde/error.hpp"
#include "horde/features.hpp"
#include "horde/gtd.hpp"

namespace horde {

enum class EnvironmentKind { chain, pen, replay };
enum class QuestionKind { constant_product, random_gibbs, chain };
// `theta` resets every θ to U[reset_low, reset_high] (all zero when both are 0).
enum class ResetKind { none, theta };
enum class TileLayout { robot, compact };

struct ExperimentConfig {
  // [experiment]
  std::string preset;
  EnvironmentKind environment = EnvironmentKind::pen;
  std::string replay_path;
  std::uint64_t runs = 1;
  std::uint64_t steps = 0;     // ticks (pen, replay)
  std::uint64_t episodes = 0;  // chain
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t workers = 1;   // 0: one per hardware thread
  bool realtime = false;
  double cycle_budget_ms = 100.0;
  std::uint64_t log_interval = 1000;  // ticks (pen, replay) or episodes (chain)
  bool snapshots = true;              // final learner snapshots
  bool record_stream = false;         // write the sensorimotor log
  std::uint64_t quarantine_limit = 0;

  // [questions]
  QuestionKind questions = QuestionKind::constant_product;
  std::vector<double> gammas{0.0, 0.5, 0.8};
  std::uint64_t sensors = 53;  // cumulant sensors used
  std::uint64_t policy_count = 1000;
  std::uint64_t nonzeros = 60;
  std::uint64_t policy_seed = 0;
  bool policy_seed_set = false;

  // [features]
  TileLayout layout = TileLayout::robot;
  ChainRepresentation chain_features = ChainRepresentation::inverted;

  // [learning]
  GtdParams learning{0.1 / 457.0, 0.001 * (0.1 / 457.0), 0.9};
  double initial_theta = 0.0;

  // [behaviour] / [schedule]
  double repeat_probability = 0.5;
  ExcursionScheduleConfig schedule{};
  bool learn_during_recenter = false;
  bool clear_trace_on_excursion = false;

  // [evaluation]
  double mspbe_tau = 1000.0;
  double nmsre_tau = 20.0;
  bool vector_estimator = true;
  bool rho_weighted_traces = false;
  bool sample_mspbe = false;
  double covariance_epsilon = 1e-8;
  std::uint64_t return_horizon = 51;

  // [intervention]
  ResetKind reset = ResetKind::none;
  std::uint64_t reset_at = 0;
  double reset_low = 0.0;
  double reset_high = 0.0;

  // [chain]
  double target_right = 0.95;
  double behaviour_right = 0.2;
  double chain_gamma = 1.0;

  // [pen]
  double sensor_noise = 0.01;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

// Thrown with every violation found, not only the first.
class ConfigValidationError : public ConfigError {
public:
  explicit ConfigValidationError(std::vector<std::string> problems);
  const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
  std::vector<std::string> problems_;
};

std::vector<std::string_view> preset_names();
bool is_preset(std::string_view name);
// Throws ConfigError for unknown names.
ExperimentConfig preset_config(std::string_view name);

// INI text: optional `preset = <name>` in [experiment] selects the base, every
// other key overrides it. Throws ConfigValidationError listing unknown keys,
// unparsable values and range violations.
ExperimentConfig parse_config(std::string_view text);
// A file path, or a preset name when no such file exists.
ExperimentConfig load_config(const std::string& path_or_preset);

std::string serialize_config(const ExperimentConfig& cfg);

// Range checks; empty when the config is valid.
std::vector<std::string> validate_config(const ExperimentConfig& cfg);

TileCoderConfig tile_layout(const ExperimentConfig& cfg);

}  // namespace horde
