#include "horde/environments.hpp"
#include "horde/error.hpp"

namespace horde {

std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::learn: return "learn";
    case Phase::test: return "test";
    case Phase::recenter: return "recenter";
  }
  return "unknown";
}

ExcursionSchedule::ExcursionSchedule(ExcursionScheduleConfig cfg) : cfg_(cfg) {
  if (cfg_.enabled) {
    if (!(cfg_.mean_interval >= 1.0)) throw ConfigError("schedule: mean_interval must be at least 1");
    if (cfg_.test_length == 0) throw ConfigError("schedule: test_length must be positive");
    if (cfg_.policy_count == 0) throw ConfigError("schedule: needs at least one excursion policy");
  }
}

PhaseDecision ExcursionSchedule::advance(Rng& rng) {
  const Phase from = phase_;
  ++ticks_;
  switch (phase_) {
    case Phase::learn: {
      if (!cfg_.enabled) break;
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      if (coin(rng) < 1.0 / cfg_.mean_interval) {
        std::uniform_int_distribution<std::size_t> pick(0, cfg_.policy_count - 1);
        action_ = pick(rng);
        phase_ = Phase::test;
        ticks_ = 0;
      }
      break;
    }
    case Phase::test:
      if (ticks_ >= cfg_.test_length) {
        phase_ = cfg_.recenter_length > 0 ? Phase::recenter : Phase::learn;
        ticks_ = 0;
      }
      break;
    case Phase::recenter:
      if (ticks_ >= cfg_.recenter_length) {
        phase_ = Phase::learn;
        ticks_ = 0;
      }
      break;
  }
  return {from, phase_};
}

}  // namespace horde
