#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "horde/evaluation.hpp"
#include "horde/features.hpp"
#include "horde/policy.hpp"

namespace horde {

// ---------------------------------------------------------------------------
// Seven-state chain: states 0 and 6 absorb, episodes start in state 3, moving
// right into state 6 pays 1.

namespace chain_action {
inline constexpr Action left = 0;
inline constexpr Action right = 1;
}  // namespace chain_action

struct ChainStep {
  std::size_t next_state;
  double reward;
  bool terminal;
};

class ChainEnv {
public:
  static constexpr std::size_t state_count = 7;
  static constexpr std::size_t start_state = 3;

  std::size_t state() const noexcept { return state_; }
  std::size_t episode_steps() const noexcept { return steps_; }
  bool at_terminal() const noexcept { return is_terminal(state_); }

  void begin_episode() noexcept {
    state_ = start_state;
    steps_ = 0;
  }

  // Throws ProtocolError when called on an absorbing state.
  ChainStep step(Action action);

  static bool is_terminal(std::size_t s) noexcept { return s == 0 || s == state_count - 1; }
  // Index of non-terminal state s among the 5 feature rows.
  static std::size_t feature_row(std::size_t s) noexcept { return s - 1; }

private:
  std::size_t state_ = start_state;
  std::size_t steps_ = 0;
};

inline ChainStep chain_step(ChainEnv& env, Action action) { return env.step(action); }

// Features of a chain state, zero for the absorbing states.
SparseFeatures chain_state_features(std::size_t state, ChainRepresentation repr);

struct ChainModel {
  MdpModel mdp;
  PolicyModel target;
};

// Exact model of the chain under state-independent move-right probabilities.
// The visitation distribution is the normalised expected number of visits per
// episode under the behaviour policy.
ChainModel chain_model(double target_right, double behaviour_right, ChainRepresentation repr, double gamma = 1.0);

// ---------------------------------------------------------------------------
// Simulated holonomic robot in a square pen.

struct Pose {
  double x = 1.0;
  double y = 1.0;
  double heading = 0.0;  // radians, counter-clockwise from +x, in [0, 2π)
};

struct PenSimConfig {
  double size = 2.0;             // metres
  double forward_speed = 0.05;   // metres per tick
  double angular_rate = 0.15;    // radians per tick
  double noise = 0.01;           // std-dev of additive sensor noise
  std::uint64_t seed = 1;
  Pose start{};
};

// Sensor layout (all outputs clipped to [0, 1]):
//    0-7   infrared proximity, 8 directions around the body, exp(-d / 0.4)
//    8-15  directional light from a lamp at (1.7, 1.7)
//   16-19  directional heat from a source at (0.3, 0.4)
//   20-23  floor reflectance under front/left/back/right probes
//   24-26  magnetometer components
//   27-29  accelerometer (longitudinal, lateral) and gyro
//   30-32  wheel velocities
//   33-35  wheel currents
//   36-38  wheel temperatures
//   39-41  wheel voltages
//   42-43  battery voltages (fast and slow sag)
//   44-47  distance to north/east/south/west walls
//   48-51  overhead lamp intensities
//   52     body speed
class PenSimEnv {
public:
  static constexpr std::size_t sensor_count = 53;

  explicit PenSimEnv(PenSimConfig cfg = {});

  const PenSimConfig& config() const noexcept { return cfg_; }
  const Pose& pose() const noexcept { return pose_; }
  std::span<const double> observation() const noexcept { return obs_; }

  // Advances one 100 ms tick under `action` and returns the new observation.
  std::span<const double> step(Action action);

  // Action of the recentring controller: turn toward the centre, then drive.
  Action recenter_action() const noexcept;

  static const std::array<std::string_view, sensor_count>& sensor_names();

private:
  void sense();

  PenSimConfig cfg_;
  Pose pose_;
  Rng rng_;
  std::array<double, 3> wheel_cmd_{};
  std::array<double, 3> wheel_speed_{};
  std::array<double, 3> wheel_current_{};
  std::array<double, 3> wheel_temp_{};
  double body_speed_ = 0.0;  // signed, lagged
  double body_turn_ = 0.0;   // lagged angular rate
  double accel_ = 0.0;
  double battery_fast_ = 0.9;
  double battery_slow_ = 0.9;
  std::array<double, sensor_count> obs_{};
};

inline std::span<const double> pen_step(PenSimEnv& env, Action action) { return env.step(action); }

// ---------------------------------------------------------------------------
// Behaviour / test-excursion / recentre protocol.

enum class Phase { learn, test, recenter };

std::string_view phase_name(Phase p);

struct ExcursionScheduleConfig {
  bool enabled = true;
  double mean_interval = 50.0;  // mean LEARN ticks between excursions
  std::size_t test_length = 51; // target-policy ticks per excursion
  std::size_t recenter_length = 20;
  std::size_t policy_count = 5;

  friend bool operator==(const ExcursionScheduleConfig&, const ExcursionScheduleConfig&) = default;
};

struct PhaseDecision {
  Phase from;
  Phase to;
  bool changed() const noexcept { return from != to; }
};

class ExcursionSchedule {
public:
  explicit ExcursionSchedule(ExcursionScheduleConfig cfg = {});

  const ExcursionScheduleConfig& config() const noexcept { return cfg_; }
  Phase phase() const noexcept { return phase_; }
  // Constant-action policy followed during the current TEST phase.
  Action excursion_action() const noexcept { return action_; }
  std::size_t ticks_in_phase() const noexcept { return ticks_; }

  // Called once after every tick. From LEARN, starts an excursion with
  // probability 1/mean_interval; TEST and RECENTER run for fixed lengths.
  PhaseDecision advance(Rng& rng);

private:
  ExcursionScheduleConfig cfg_;
  Phase phase_ = Phase::learn;
  Action action_ = 0;
  std::size_t ticks_ = 0;
};

inline PhaseDecision schedule_next_phase(ExcursionSchedule& sched, Rng& rng) { return sched.advance(rng); }

// ---------------------------------------------------------------------------
// Sensorimotor stream logs.
//
//   # horde-log v1
//   # sensors=<k> actions=<name>,<name>,...
//   step,action,behaviour_prob,s0,...,s<k-1>
//   <rows>
//
// Each row holds the observation at which `action` was chosen with
// probability `behaviour_prob`. A behaviour_prob of 0 marks ticks outside the
// behaviour policy (excursions), and a final row with action -1 carries the
// last observation.

struct LogRow {
  std::uint64_t step = 0;
  long action = -1;
  double behaviour_prob = 0.0;
  std::vector<double> observation;

  friend bool operator==(const LogRow&, const LogRow&) = default;
};

class LogWriter {
public:
  LogWriter(const std::filesystem::path& path, std::size_t sensor_count, const ActionSet& actions);

  void write(const LogRow& row);
  void flush() { out_.flush(); }

private:
  std::ofstream out_;
  std::size_t sensors_;
  std::string buf_;
};

class LogReplay {
public:
  // Reads the header; throws ParseError when it is malformed. An empty file
  // has no header and no rows.
  explicit LogReplay(const std::filesystem::path& path);

  std::size_t sensor_count() const noexcept { return sensors_; }
  const ActionSet& actions() const noexcept { return actions_; }

  // Next row in file order; nullopt at end of log. Throws ParseError with
  // the offending line number on malformed input.
  std::optional<LogRow> next();

private:
  void read_header();

  std::ifstream in_;
  std::size_t line_ = 0;
  std::size_t sensors_ = 0;
  ActionSet actions_;
  bool header_done_ = false;
  std::optional<std::uint64_t> last_step_;
};

inline std::optional<LogRow> replay_next(LogReplay& lr) { return lr.next(); }

}  // namespace horde
