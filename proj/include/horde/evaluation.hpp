#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "horde/features.hpp"

namespace horde {

// Exponentially weighted average with time constant tau, starting at 0:
//   value ← (1/τ)·x + (1 − 1/τ)·value
class ExponentialTrace {
public:
  explicit ExponentialTrace(double tau = 1.0);

  double tau() const noexcept { return tau_; }
  double value() const noexcept { return value_; }
  bool initialized() const noexcept { return initialized_; }
  std::size_t count() const noexcept { return count_; }

  void update(double sample) noexcept {
    value_ = rate_ * sample + (1.0 - rate_) * value_;
    initialized_ = true;
    ++count_;
  }

private:
  double tau_;
  double rate_;
  double value_ = 0.0;
  bool initialized_ = false;
  std::size_t count_ = 0;
};

inline ExponentialTrace& trace_update(ExponentialTrace& tr, double sample) {
  tr.update(sample);
  return tr;
}

// Exponential trace over n-dimensional vectors whose samples are sparse. The
// stored vector is value/scale so a decay step only touches the scale; cost
// per update is O(nnz(sample)).
class SparseVectorTrace {
public:
  SparseVectorTrace(std::size_t dim, double tau);

  std::size_t dim() const noexcept { return raw_.size(); }
  double tau() const noexcept { return tau_; }

  // value ← (1/τ)·coeff·x + (1 − 1/τ)·value, where x is `values` restricted
  // to `support` (entries off the support are zero).
  void update(double coeff, std::span<const FeatureIndex> support, std::span<const double> values);
  // Sample of all zeros.
  void decay();

  double dot(std::span<const double> v) const;
  double at(std::size_t i) const { return raw_[i] * scale_; }
  std::vector<double> value() const;

private:
  void renormalize();

  double tau_;
  double rate_;
  double scale_ = 1.0;
  std::vector<double> raw_;
};

// Discounted sum of rewards[0..horizon-1]; rewards[k] is r_{t+k+1}.
// Throws InputError when fewer than `horizon` rewards are given.
double truncated_return(std::span<const double> rewards, double gamma, std::size_t horizon = 51);

// Online Welford mean/variance (population variance).
class RunningVariance {
public:
  void add(double x) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 0 ? m2_ / static_cast<double>(n_) : 0.0; }

private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Normalised mean squared return error for one question.
class NmsreTracker {
public:
  explicit NmsreTracker(double tau = 20.0) : squared_error_(tau) {}

  // Folds (prediction − return)² into the trace. Returns the current NMSRE
  // using the running return variance.
  double update(double prediction, double sampled_return);

  // trace / variance, or 1 when the variance is zero.
  double value(double return_variance) const noexcept;
  double value() const noexcept { return value(returns_.variance()); }

  std::size_t excursions() const noexcept { return squared_error_.count(); }
  const ExponentialTrace& squared_error() const noexcept { return squared_error_; }
  const RunningVariance& returns() const noexcept { return returns_; }

private:
  ExponentialTrace squared_error_;
  RunningVariance returns_;
};

double nmsre_value(double mean_squared_error, double return_variance) noexcept;

struct MspbeTrackerOptions {
  double tau = 1000.0;
  bool track_vector = true;
  bool rho_weighted = false;  // multiply each sample by ρ a second time
};

// Online MSPBE estimators: trace(δe)⊤w and trace(δe⊤w).
class MspbeTrackers {
public:
  MspbeTrackers(std::size_t dim, MspbeTrackerOptions opts);

  const MspbeTrackerOptions& options() const noexcept { return opts_; }
  bool has_vector() const noexcept { return !vector_.empty(); }

  // One learning step. `trace_dot_w` is e_t⊤w_t with the w used in the update.
  void update(double delta, double rho, std::span<const FeatureIndex> trace_support,
              std::span<const double> trace, double trace_dot_w);
  // A learning step whose sample is zero (ρ = 0, so e = 0).
  void update_zero();

  double vector_estimate(std::span<const double> w) const;
  double scalar_estimate() const noexcept { return scalar_.value(); }
  const SparseVectorTrace& vector_trace() const { return vector_.front(); }

private:
  MspbeTrackerOptions opts_;
  std::vector<SparseVectorTrace> vector_;  // zero or one element
  ExponentialTrace scalar_;
};

inline double mspbe_vector(const MspbeTrackers& trk, std::span<const double> w) { return trk.vector_estimate(w); }
inline double mspbe_scalar(const MspbeTrackers& trk) { return trk.scalar_estimate(); }

// A finite MDP with a known behaviour state distribution. States are the
// non-terminal states; transitions into terminal states leave each kernel
// row (sub-stochastic) and end the episode with value 0.
struct MdpModel {
  Eigen::MatrixXd features;    // one row per state
  Eigen::VectorXd visitation;  // diagonal of D, behaviour distribution
  double gamma = 1.0;
};

// Expected one-step dynamics of a target policy.
struct PolicyModel {
  Eigen::MatrixXd kernel;           // P_π restricted to non-terminal states
  Eigen::VectorXd expected_reward;  // r_π
};

// ‖Π T^λ V_θ − V_θ‖²_D computed in the expectation form
//   g⊤ (Φ⊤DΦ)⁻¹ g,  g = Φ⊤D (T^λ V_θ − V_θ),
//   T^λ V = (I − γλP)⁻¹ (r + γ(1−λ) P V).
// Throws NumericalError (naming the rank) when Φ⊤DΦ is singular.
double mspbe_true(const MdpModel& mdp, const PolicyModel& target, std::span<const double> theta, double lambda);

// q⊤ (C + εI)⁻¹ q for an estimated covariance C and TD-update estimate q.
double mspbe_sample(const Eigen::MatrixXd& covariance, const Eigen::VectorXd& td_update, double epsilon = 1e-8);

// Sample MSPBE estimator: running mean of φφ⊤ plus an externally supplied
// estimate of E[δe]. Dense, O(n²) per sample; for small feature spaces.
class SampleMspbe {
public:
  explicit SampleMspbe(std::size_t dim, double epsilon = 1e-8);

  void add_features(const SparseFeatures& phi);
  std::size_t samples() const noexcept { return count_; }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }

  double evaluate(const Eigen::VectorXd& td_update) const;

private:
  Eigen::MatrixXd covariance_;
  std::size_t count_ = 0;
  double epsilon_;
};

}  // namespace horde
