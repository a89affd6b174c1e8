#include "horde/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "horde/error.hpp"

namespace horde {

ActionSet::ActionSet(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.empty()) throw ConfigError("action set must not be empty");
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (std::find(names_.begin(), names_.begin() + static_cast<std::ptrdiff_t>(i), names_[i]) !=
        names_.begin() + static_cast<std::ptrdiff_t>(i)) {
      throw ConfigError("duplicate action name '" + names_[i] + "'");
    }
  }
}

ActionSet ActionSet::robot() { return ActionSet({"forward", "reverse", "rotate_cw", "rotate_ccw", "stop"}); }

ActionSet ActionSet::chain() { return ActionSet({"left", "right"}); }

std::optional<Action> ActionSet::find(std::string_view name) const {
  for (std::size_t a = 0; a < names_.size(); ++a) {
    if (names_[a] == name) return a;
  }
  return std::nullopt;
}

GibbsPolicy GibbsPolicy::from_dense(std::size_t dim, std::size_t action_count, std::span<const double> u) {
  if (u.size() != dim * action_count) throw ConfigError("Gibbs parameters must have dimension n*|A|");
  GibbsPolicy p{dim, action_count, {}};
  for (std::size_t k = 0; k < u.size(); ++k) {
    if (u[k] != 0.0) p.entries.push_back({static_cast<std::uint32_t>(k), u[k]});
  }
  return p;
}

std::vector<double> GibbsPolicy::dense() const {
  std::vector<double> u(dim * action_count, 0.0);
  for (const auto& e : entries) u[e.component] = e.value;
  return u;
}

std::size_t action_count(const PolicySpec& spec) {
  return std::visit(
      [](const auto& p) -> std::size_t {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, FixedPolicy>) {
          return p.probabilities.size();
        } else {
          return p.action_count;
        }
      },
      spec);
}

namespace {

double feature_value_at(const SparseFeatures& feats, std::size_t j) {
  const auto idx = feats.indices();
  const auto it = std::lower_bound(idx.begin(), idx.end(), static_cast<FeatureIndex>(j));
  if (it == idx.end() || *it != j) return 0.0;
  return feats.value(static_cast<std::size_t>(it - idx.begin()));
}

std::vector<double> gibbs_preferences(const GibbsPolicy& p, const SparseFeatures& feats) {
  if (feats.dim() != p.dim) throw ConfigError("Gibbs policy: feature dimension mismatch");
  std::vector<double> pref(p.action_count, 0.0);
  for (const auto& e : p.entries) {
    const std::size_t a = e.component / p.dim;
    const std::size_t j = e.component % p.dim;
    pref[a] += e.value * feature_value_at(feats, j);
  }
  return pref;
}

}  // namespace

double gibbs_preference(const GibbsPolicy& policy, const SparseFeatures& feats, Action action) {
  if (action >= policy.action_count) throw ConfigError("Gibbs policy: action out of range");
  return gibbs_preferences(policy, feats)[action];
}

std::vector<double> action_probabilities(const PolicySpec& spec, const SparseFeatures& feats) {
  if (const auto* c = std::get_if<ConstantActionPolicy>(&spec)) {
    std::vector<double> p(c->action_count, 0.0);
    p.at(c->action) = 1.0;
    return p;
  }
  if (const auto* f = std::get_if<FixedPolicy>(&spec)) return f->probabilities;

  const auto& g = std::get<GibbsPolicy>(spec);
  auto pref = gibbs_preferences(g, feats);
  // exp(-pref) normalised; shift by the smallest preference for stability.
  const double lowest = *std::min_element(pref.begin(), pref.end());
  double total = 0.0;
  for (auto& x : pref) {
    x = std::exp(-(x - lowest));
    total += x;
  }
  for (auto& x : pref) x /= total;
  return pref;
}

double policy_prob(const PolicySpec& spec, const SparseFeatures& feats, Action action) {
  if (const auto* c = std::get_if<ConstantActionPolicy>(&spec)) {
    if (action >= c->action_count) throw ConfigError("policy_prob: action out of range");
    return action == c->action ? 1.0 : 0.0;
  }
  const auto probs = action_probabilities(spec, feats);
  if (action >= probs.size()) throw ConfigError("policy_prob: action out of range");
  return probs[action];
}

double importance_ratio(const PolicySpec& target, double behaviour_prob, const SparseFeatures& feats,
                        Action action) {
  if (!(behaviour_prob > 0.0)) throw SupportError("behaviour probability must be positive for the emitted action");
  return policy_prob(target, feats, action) / behaviour_prob;
}

PersistentRandomBehaviour::PersistentRandomBehaviour(std::size_t action_count, double repeat_probability)
    : action_count_(action_count), repeat_(repeat_probability) {
  if (action_count == 0) throw ConfigError("behaviour policy needs at least one action");
  if (!(repeat_probability >= 0.0 && repeat_probability <= 1.0)) {
    throw ConfigError("repeat_probability must lie in [0, 1]");
  }
}

double PersistentRandomBehaviour::probability(Action a) const {
  const double uniform = 1.0 / static_cast<double>(action_count_);
  if (!last_) return uniform;
  return (1.0 - repeat_) * uniform + (a == *last_ ? repeat_ : 0.0);
}

BehaviourSample PersistentRandomBehaviour::sample(Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, action_count_ - 1);
  Action a;
  if (last_ && coin(rng) < repeat_) {
    a = *last_;
  } else {
    a = pick(rng);
  }
  const double prob = probability(a);
  last_ = a;
  return {a, prob};
}

BehaviourSample sample_fixed(const FixedPolicy& policy, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const double u = coin(rng);
  double acc = 0.0;
  const auto& p = policy.probabilities;
  for (std::size_t a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return {a, p[a]};
  }
  // Rounding left u above the cumulative sum: take the last supported action.
  for (std::size_t a = p.size(); a-- > 0;) {
    if (p[a] > 0.0) return {a, p[a]};
  }
  throw ConfigError("fixed policy has no support");
}

GibbsPolicy generate_random_gibbs(std::size_t dim, std::size_t action_count, Rng& rng, std::size_t nonzeros) {
  const std::size_t total = dim * action_count;
  if (total < nonzeros) throw ConfigError("Gibbs policy: fewer components than requested nonzeros");
  std::vector<std::uint32_t> all(total);
  std::iota(all.begin(), all.end(), 0U);
  std::vector<std::uint32_t> chosen;
  chosen.reserve(nonzeros);
  std::sample(all.begin(), all.end(), std::back_inserter(chosen), nonzeros, rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  GibbsPolicy p{dim, action_count, {}};
  p.entries.reserve(nonzeros);
  for (auto k : chosen) {
    double v = 0.0;
    while (v == 0.0) v = unit(rng);
    p.entries.push_back({k, v});
  }
  return p;
}

std::vector<GvfQuestion> question_bank_constant(std::span<const double> gammas, std::size_t sensor_count,
                                                const ActionSet& actions) {
  std::vector<GvfQuestion> bank;
  bank.reserve(gammas.size() * sensor_count * actions.size());
  std::uint32_t id = 0;
  for (double g : gammas) {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("question gamma must lie in [0, 1)");
    for (Action a = 0; a < actions.size(); ++a) {
      for (std::size_t s = 0; s < sensor_count; ++s) {
        bank.push_back({id++, ConstantActionPolicy{a, actions.size()}, g, s});
      }
    }
  }
  return bank;
}

std::vector<GvfQuestion> question_bank_gibbs(std::size_t count, std::span<const double> gammas,
                                             std::size_t sensor_count, std::size_t dim,
                                             const ActionSet& actions, Rng& rng, std::size_t nonzeros) {
  if (gammas.empty()) throw ConfigError("Gibbs question bank needs at least one gamma");
  if (sensor_count == 0) throw ConfigError("Gibbs question bank needs at least one sensor");
  for (double g : gammas) {
    if (!(g >= 0.0 && g < 1.0)) throw ConfigError("question gamma must lie in [0, 1)");
  }
  std::uniform_int_distribution<std::size_t> pick_gamma(0, gammas.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_sensor(0, sensor_count - 1);
  std::vector<GvfQuestion> bank;
  bank.reserve(count);
  for (std::uint32_t id = 0; id < count; ++id) {
    const double g = gammas[pick_gamma(rng)];
    const std::size_t s = pick_sensor(rng);
    bank.push_back({id, generate_random_gibbs(dim, actions.size(), rng, nonzeros), g, s});
  }
  return bank;
}

}  // namespace horde
