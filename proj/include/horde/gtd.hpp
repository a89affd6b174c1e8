#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "horde/features.hpp"
#include "horde/policy.hpp"

namespace horde {

struct GtdParams {
  double alpha_theta = 0.05;
  double alpha_w = 0.1;
  double lambda = 0.0;

  friend bool operator==(const GtdParams&, const GtdParams&) = default;
};

// One observed step, shared by every learner. `reward` is the cumulant of
// the question being updated; `gamma_next` overrides the question's discount
// for the bootstrap term (0 on entering an absorbing state).
struct Transition {
  const SparseFeatures& phi;
  Action action;
  const SparseFeatures& phi_next;
  double reward;
  double behaviour_prob;
  std::optional<double> gamma_next = std::nullopt;
};

// Weight magnitude past which a learner is considered diverged.
inline constexpr double divergence_bound = 1e6;

// GTD(λ) with sparse bookkeeping: the eligibility trace tracks its own
// support so every update costs O(|φ_t| + |φ_{t+1}| + nnz(e)).
class GtdLearner {
public:
  struct StepResult {
    double delta = 0.0;        // TD error computed with θ_t
    double trace_dot_w = 0.0;  // e_t⊤w_t, before w is updated
  };

  GtdLearner(std::size_t dim, double gamma, GtdParams params);

  std::size_t dim() const noexcept { return theta_.size(); }
  double gamma() const noexcept { return gamma_; }
  const GtdParams& params() const noexcept { return params_; }

  // δ ← r + γθ⊤φ' − θ⊤φ;  e ← ρ(φ + γλe);
  // θ ← θ + α_θ(δe − γ(1−λ)(e⊤w)φ');  w ← w + α_w(δe − (φ⊤w)φ)
  StepResult step(const Transition& tr, double rho);

  // The ρ = 0 case without computing δ: clears e and decays w along φ.
  // Leaves exactly the state step() would with rho == 0.
  void step_unmatched(const SparseFeatures& phi);

  double predict(const SparseFeatures& feats) const { return dot_sparse(theta_, feats); }

  // θ_i ~ U[low, high]; w and e are kept.
  void reset_primary(Rng& rng, double low, double high);
  void clear_trace();

  std::span<const double> theta() const noexcept { return theta_; }
  std::span<const double> w() const noexcept { return w_; }
  std::span<const double> trace() const noexcept { return e_; }
  std::span<const FeatureIndex> trace_support() const noexcept { return support_; }
  std::span<double> mutable_theta() noexcept { return theta_; }
  std::span<double> mutable_w() noexcept { return w_; }

  bool diverged() const noexcept { return diverged_; }

private:
  void check_bounds(double value) noexcept {
    if (!(std::abs(value) <= divergence_bound)) diverged_ = true;
  }

  double gamma_;
  GtdParams params_;
  DenseWeights theta_;
  DenseWeights w_;
  DenseWeights e_;
  std::vector<FeatureIndex> support_;
  std::vector<std::uint8_t> in_support_;
  bool diverged_ = false;
};

// Binary learner snapshot: magic "HGVF", u32 question id, u64 n, θ[n], w[n]
// as little-endian IEEE doubles.
struct WeightSnapshot {
  std::uint32_t question_id = 0;
  std::vector<double> theta;
  std::vector<double> w;
};

void write_snapshot(const std::filesystem::path& path, std::uint32_t question_id, const GtdLearner& learner);
WeightSnapshot read_snapshot(const std::filesystem::path& path);

}  // namespace horde
