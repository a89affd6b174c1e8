#include "horde/evaluation.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>

#include "horde/error.hpp"

namespace horde {

ExponentialTrace::ExponentialTrace(double tau) : tau_(tau), rate_(1.0 / tau) {
  if (!(tau >= 1.0)) throw ConfigError("trace time constant must be at least 1");
}

SparseVectorTrace::SparseVectorTrace(std::size_t dim, double tau) : tau_(tau), rate_(1.0 / tau), raw_(dim, 0.0) {
  if (!(tau >= 1.0)) throw ConfigError("trace time constant must be at least 1");
}

void SparseVectorTrace::renormalize() {
  for (auto& x : raw_) x *= scale_;
  scale_ = 1.0;
}

void SparseVectorTrace::decay() {
  if (rate_ == 1.0) {
    std::fill(raw_.begin(), raw_.end(), 0.0);
    scale_ = 1.0;
    return;
  }
  scale_ *= 1.0 - rate_;
  if (scale_ < 1e-100) renormalize();
}

void SparseVectorTrace::update(double coeff, std::span<const FeatureIndex> support, std::span<const double> values) {
  decay();
  const double step = rate_ * coeff / scale_;
  for (auto i : support) raw_[i] += step * values[i];
}

double SparseVectorTrace::dot(std::span<const double> v) const {
  if (v.size() != raw_.size()) throw ConfigError("vector trace: dimension mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < raw_.size(); ++i) sum += raw_[i] * v[i];
  return sum * scale_;
}

std::vector<double> SparseVectorTrace::value() const {
  std::vector<double> out(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) out[i] = raw_[i] * scale_;
  return out;
}

double truncated_return(std::span<const double> rewards, double gamma, std::size_t horizon) {
  if (rewards.size() < horizon) {
    throw InputError("truncated_return: need " + std::to_string(horizon) + " rewards, got " +
                     std::to_string(rewards.size()));
  }
  double g = 0.0;
  double discount = 1.0;
  for (std::size_t k = 0; k < horizon; ++k) {
    g += discount * rewards[k];
    discount *= gamma;
  }
  return g;
}

void RunningVariance::add(double x) noexcept {
  ++n_;
  const double d = x - mean_;
  mean_ += d / static_cast<double>(n_);
  m2_ += d * (x - mean_);
}

double nmsre_value(double mean_squared_error, double return_variance) noexcept {
  if (!(return_variance > 0.0)) return 1.0;
  return mean_squared_error / return_variance;
}

double NmsreTracker::update(double prediction, double sampled_return) {
  const double err = prediction - sampled_return;
  squared_error_.update(err * err);
  returns_.add(sampled_return);
  return value();
}

double NmsreTracker::value(double return_variance) const noexcept {
  return nmsre_value(squared_error_.value(), return_variance);
}

MspbeTrackers::MspbeTrackers(std::size_t dim, MspbeTrackerOptions opts) : opts_(opts), scalar_(opts.tau) {
  if (opts.track_vector) vector_.emplace_back(dim, opts.tau);
}

void MspbeTrackers::update(double delta, double rho, std::span<const FeatureIndex> trace_support,
                           std::span<const double> trace, double trace_dot_w) {
  const double weight = opts_.rho_weighted ? rho : 1.0;
  scalar_.update(weight * delta * trace_dot_w);
  if (!vector_.empty()) vector_.front().update(weight * delta, trace_support, trace);
}

void MspbeTrackers::update_zero() {
  scalar_.update(0.0);
  if (!vector_.empty()) vector_.front().decay();
}

double MspbeTrackers::vector_estimate(std::span<const double> w) const {
  if (vector_.empty()) throw ProtocolError("vector MSPBE estimator is disabled");
  return vector_.front().dot(w);
}

double mspbe_true(const MdpModel& mdp, const PolicyModel& target, std::span<const double> theta, double lambda) {
  const auto states = mdp.features.rows();
  const auto n = mdp.features.cols();
  if (static_cast<Eigen::Index>(theta.size()) != n) throw ConfigError("mspbe_true: theta dimension mismatch");
  if (target.kernel.rows() != states || target.kernel.cols() != states || target.expected_reward.size() != states ||
      mdp.visitation.size() != states) {
    throw ConfigError("mspbe_true: model dimensions disagree");
  }

  const Eigen::Map<const Eigen::VectorXd> th(theta.data(), n);
  const Eigen::VectorXd v = mdp.features * th;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(states, states);
  const Eigen::VectorXd backup = target.expected_reward + mdp.gamma * (1.0 - lambda) * target.kernel * v;
  const Eigen::VectorXd t_lambda_v = (eye - mdp.gamma * lambda * target.kernel).fullPivLu().solve(backup);

  const Eigen::MatrixXd phi_d = mdp.features.transpose() * mdp.visitation.asDiagonal();
  const Eigen::VectorXd g = phi_d * (t_lambda_v - v);
  const Eigen::MatrixXd cov = phi_d * mdp.features;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  if (!lu.isInvertible()) {
    throw NumericalError("mspbe_true: feature covariance is singular (rank " + std::to_string(lu.rank()) + " of " +
                         std::to_string(n) + ")");
  }
  return g.dot(lu.solve(g));
}

double mspbe_sample(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& td_update, double epsilon) {
  const auto n = covariance.rows();
  if (covariance.cols() != n || td_update.size() != n) throw ConfigError("mspbe_sample: dimension mismatch");
  const Eigen::MatrixXd reg = covariance + epsilon * Eigen::MatrixXd::Identity(n, n);
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(reg);
  if (!lu.isInvertible()) {
    throw NumericalError("mspbe_sample: covariance singular after regularisation (rank " + std::to_string(lu.rank()) +
                         ")");
  }
  return td_update.dot(lu.solve(td_update));
}

SampleMspbe::SampleMspbe(std::size_t dim, double epsilon)
    : covariance_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))),
      epsilon_(epsilon) {}

void SampleMspbe::add_features(const SparseFeatures& phi) {
  if (static_cast<Eigen::Index>(phi.dim()) != covariance_.rows()) throw ConfigError("SampleMspbe: dimension mismatch");
  ++count_;
  const double rate = 1.0 / static_cast<double>(count_);
  covariance_ *= 1.0 - rate;
  const auto idx = phi.indices();
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = 0; b < idx.size(); ++b) {
      covariance_(idx[a], idx[b]) += rate * phi.value(a) * phi.value(b);
    }
  }
}

double SampleMspbe::evaluate(const Eigen::VectorXd& td_update) const {
  return mspbe_sample(covariance_, td_update, epsilon_);
}

}  // namespace horde
