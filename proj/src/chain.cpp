#include <Eigen/LU>

#include "horde/environments.hpp"
#include "horde/error.hpp"

namespace horde {

ChainStep ChainEnv::step(Action action) {
  if (at_terminal()) throw ProtocolError("chain: step from absorbing state " + std::to_string(state_));
  if (action != chain_action::left && action != chain_action::right) throw ConfigError("chain: unknown action");
  state_ = action == chain_action::right ? state_ + 1 : state_ - 1;
  ++steps_;
  const bool terminal = is_terminal(state_);
  const double reward = state_ == state_count - 1 ? 1.0 : 0.0;
  return {state_, reward, terminal};
}

SparseFeatures chain_state_features(std::size_t state, ChainRepresentation repr) {
  if (state >= ChainEnv::state_count) throw ConfigError("chain: state out of range");
  if (ChainEnv::is_terminal(state)) return SparseFeatures::zero(chain_feature_count);
  return chain_features(ChainEnv::feature_row(state), repr);
}

namespace {

PolicyModel chain_policy(double right) {
  constexpr Eigen::Index n = chain_feature_count;
  PolicyModel m{Eigen::MatrixXd::Zero(n, n), Eigen::VectorXd::Zero(n)};
  for (Eigen::Index s = 0; s < n; ++s) {
    if (s + 1 < n) {
      m.kernel(s, s + 1) = right;
    } else {
      m.expected_reward(s) = right;  // rightmost move pays 1 and terminates
    }
    if (s > 0) m.kernel(s, s - 1) = 1.0 - right;
  }
  return m;
}

}  // namespace

ChainModel chain_model(double target_right, double behaviour_right, ChainRepresentation repr, double gamma) {
  for (double p : {target_right, behaviour_right}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("chain: move-right probability must lie in [0, 1]");
  }
  if (!(behaviour_right > 0.0 && behaviour_right < 1.0)) {
    throw ConfigError("chain: behaviour policy must give both actions positive probability");
  }
  constexpr Eigen::Index n = chain_feature_count;

  ChainModel model;
  model.target = chain_policy(target_right);
  model.mdp.gamma = gamma;
  model.mdp.features = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index s = 0; s < n; ++s) {
    const auto f = chain_features(static_cast<std::size_t>(s), repr).to_dense();
    for (Eigen::Index j = 0; j < n; ++j) model.mdp.features(s, j) = f[static_cast<std::size_t>(j)];
  }

  // Expected visits per episode: start⊤ (I − P_b)⁻¹.
  const PolicyModel behaviour = chain_policy(behaviour_right);
  Eigen::VectorXd start = Eigen::VectorXd::Zero(n);
  start(static_cast<Eigen::Index>(ChainEnv::feature_row(ChainEnv::start_state))) = 1.0;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd visits = (eye - behaviour.kernel).transpose().fullPivLu().solve(start);
  model.mdp.visitation = visits / visits.sum();
  return model;
}

}  // namespace horde
