#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "horde/features.hpp"

namespace horde {

using Rng = std::mt19937_64;
using Action = std::size_t;

class ActionSet {
public:
  ActionSet() = default;
  explicit ActionSet(std::vector<std::string> names);

  // forward, reverse, rotate_cw, rotate_ccw, stop
  static ActionSet robot();
  // left, right
  static ActionSet chain();

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(Action a) const { return names_.at(a); }
  const std::vector<std::string>& names() const noexcept { return names_; }
  std::optional<Action> find(std::string_view name) const;

  friend bool operator==(const ActionSet&, const ActionSet&) = default;

private:
  std::vector<std::string> names_;
};

namespace robot_action {
inline constexpr Action forward = 0;
inline constexpr Action reverse = 1;
inline constexpr Action rotate_cw = 2;
inline constexpr Action rotate_ccw = 3;
inline constexpr Action stop = 4;
}  // namespace robot_action

struct ConstantActionPolicy {
  Action action = 0;
  std::size_t action_count = 0;
};

// State-independent distribution over actions.
struct FixedPolicy {
  std::vector<double> probabilities;
};

// Gibbs policy over stacked per-action copies of the feature vector. Only the
// nonzero components of u are stored; component k belongs to action k / dim
// and feature k % dim.
struct GibbsPolicy {
  struct Entry {
    std::uint32_t component;
    double value;
  };

  std::size_t dim = 0;
  std::size_t action_count = 0;
  std::vector<Entry> entries;  // ascending by component

  static GibbsPolicy from_dense(std::size_t dim, std::size_t action_count, std::span<const double> u);
  std::vector<double> dense() const;
  std::size_t nonzeros() const noexcept { return entries.size(); }
};

using PolicySpec = std::variant<ConstantActionPolicy, FixedPolicy, GibbsPolicy>;

std::size_t action_count(const PolicySpec& spec);

// π(·|φ) for every action.
std::vector<double> action_probabilities(const PolicySpec& spec, const SparseFeatures& feats);

double policy_prob(const PolicySpec& spec, const SparseFeatures& feats, Action action);

// u⊤Ψ_a: the a-th dim-sized block of u dotted with φ.
double gibbs_preference(const GibbsPolicy& policy, const SparseFeatures& feats, Action action);

// π(a|φ)/b(a|φ). Throws SupportError when behaviour_prob <= 0.
double importance_ratio(const PolicySpec& target, double behaviour_prob, const SparseFeatures& feats,
                        Action action);

struct BehaviourSample {
  Action action;
  double probability;  // b(action | history) under the mixture
};

// At each step: with probability repeat_probability keep the last action,
// otherwise draw uniformly. The first step is uniform.
class PersistentRandomBehaviour {
public:
  PersistentRandomBehaviour(std::size_t action_count, double repeat_probability = 0.5);

  double repeat_probability() const noexcept { return repeat_; }
  std::optional<Action> last_action() const noexcept { return last_; }

  // Probability that the next sample is `a`, given the current last action.
  double probability(Action a) const;

  BehaviourSample sample(Rng& rng);

private:
  std::size_t action_count_;
  double repeat_;
  std::optional<Action> last_;
};

inline BehaviourSample sample_behaviour(PersistentRandomBehaviour& state, Rng& rng) { return state.sample(rng); }

// Draws from a fixed distribution, returning the probability of the draw.
BehaviourSample sample_fixed(const FixedPolicy& policy, Rng& rng);

// u with `nonzeros` components chosen without replacement, each U[0,1].
GibbsPolicy generate_random_gibbs(std::size_t dim, std::size_t action_count, Rng& rng, std::size_t nonzeros = 60);

struct GvfQuestion {
  std::uint32_t id = 0;
  PolicySpec target;
  double gamma = 0.0;
  std::size_t reward_index = 0;  // which signal of the observation is the cumulant
};

// Cartesian product gammas x actions x sensors, ids assigned in that order.
std::vector<GvfQuestion> question_bank_constant(std::span<const double> gammas, std::size_t sensor_count,
                                                const ActionSet& actions);

// `count` Gibbs questions with gamma and cumulant drawn uniformly.
std::vector<GvfQuestion> question_bank_gibbs(std::size_t count, std::span<const double> gammas,
                                             std::size_t sensor_count, std::size_t dim,
                                             const ActionSet& actions, Rng& rng, std::size_t nonzeros = 60);

}  // namespace horde
