#pragma once

#include <barrier>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "horde/environments.hpp"
#include "horde/evaluation.hpp"
#include "horde/features.hpp"
#include "horde/gtd.hpp"
#include "horde/policy.hpp"

namespace horde {

// Persistent workers that each process a static round-robin slice of the
// work items: worker k handles items k, k + W, k + 2W, ... The calling thread
// acts as worker 0; run() returns once every worker has finished.
class WorkerPool {
public:
  explicit WorkerPool(std::size_t workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  std::size_t size() const noexcept { return workers_; }

  // job(worker_id, worker_count)
  void run(const std::function<void(std::size_t, std::size_t)>& job);

private:
  void loop(std::size_t id);

  std::size_t workers_;
  std::barrier<> start_;
  std::barrier<> done_;
  const std::function<void(std::size_t, std::size_t)>* job_ = nullptr;
  bool stopping_ = false;
  std::vector<std::jthread> threads_;
};

struct EngineOptions {
  std::size_t workers = 1;
  GtdParams learning{};
  MspbeTrackerOptions mspbe{};
  double nmsre_tau = 20.0;
  std::size_t return_horizon = 51;
  double cycle_budget_ms = 100.0;
  double initial_theta = 0.0;
};

// One GVF with its learner and progress trackers.
struct Demon {
  GvfQuestion question;
  GtdLearner learner;
  MspbeTrackers mspbe;
  NmsreTracker nmsre;
  bool quarantined = false;
};

class QuestionBank {
public:
  QuestionBank(std::size_t dim, std::vector<GvfQuestion> questions, const EngineOptions& opts);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return demons_.size(); }
  bool empty() const noexcept { return demons_.empty(); }

  Demon& operator[](std::size_t i) { return demons_[i]; }
  const Demon& operator[](std::size_t i) const { return demons_[i]; }
  auto begin() { return demons_.begin(); }
  auto end() { return demons_.end(); }
  auto begin() const { return demons_.begin(); }
  auto end() const { return demons_.end(); }

private:
  std::size_t dim_;
  std::vector<Demon> demons_;
};

// Everything a tick shares with the learners. `signals` is the observation
// at t+1; question i reads its cumulant from signals[reward_index].
struct TickInput {
  const SparseFeatures& phi;
  Action action;
  double behaviour_prob;
  const SparseFeatures& phi_next;
  std::span<const double> signals;
  std::optional<double> gamma_next = std::nullopt;
};

struct TickReport {
  std::uint64_t step = 0;
  Phase phase = Phase::learn;
  double duration_ms = 0.0;
  std::size_t updated = 0;      // full GTD steps
  std::size_t skipped = 0;      // ρ = 0 shortcut or quarantined
  std::size_t diverged = 0;     // newly quarantined this tick
  bool overrun = false;
};

struct ExcursionRecord {
  std::uint64_t step = 0;  // tick at which the excursion started
  std::uint32_t question = 0;
  double prediction = 0.0;
  double sampled_return = 0.0;
};

struct DemonMetrics {
  double nmsre;         // NaN before the first scored excursion
  double mspbe_vector;  // NaN when the vector estimator is off
  double mspbe_scalar;
};

class Horde {
public:
  Horde(QuestionBank bank, EngineOptions opts);

  const EngineOptions& options() const noexcept { return opts_; }
  QuestionBank& bank() noexcept { return bank_; }
  const QuestionBank& bank() const noexcept { return bank_; }
  std::size_t workers() const noexcept { return pool_.size(); }
  std::size_t quarantined() const noexcept { return quarantined_; }

  // LEARN: fan the transition out to every learner. TEST: accumulate the
  // excursion (the first TEST tick records predictions at phi). RECENTER:
  // no-op.
  TickReport tick(std::uint64_t step, Phase phase, const TickInput& in);

  TickReport learn(std::uint64_t step, const TickInput& in);

  bool excursion_active() const noexcept { return excursion_.has_value(); }
  // Scores every question whose constant-action target matches the
  // excursion action; skipped when fewer than return_horizon signals arrived.
  std::vector<ExcursionRecord> end_excursion();

  void reset_primary(Rng& rng, double low, double high);
  void clear_traces();

  DemonMetrics metrics(std::size_t i) const;
  double predict(std::size_t i, const SparseFeatures& phi) const { return bank_[i].learner.predict(phi); }

private:
  struct Excursion {
    std::uint64_t step;
    Action action;
    std::vector<double> predictions;
    std::vector<std::vector<double>> signals;
  };

  void excursion_tick(std::uint64_t step, const TickInput& in);

  QuestionBank bank_;
  EngineOptions opts_;
  WorkerPool pool_;
  std::optional<Excursion> excursion_;
  std::size_t quarantined_ = 0;
};

inline TickReport engine_tick(Horde& horde, std::uint64_t step, Phase phase, const TickInput& in) {
  return horde.tick(step, phase, in);
}

}  // namespace horde
