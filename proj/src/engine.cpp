#include "horde/engine.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "horde/error.hpp"

namespace horde {

WorkerPool::WorkerPool(std::size_t workers)
    : workers_(std::max<std::size_t>(workers, 1)),
      start_(static_cast<std::ptrdiff_t>(workers_)),
      done_(static_cast<std::ptrdiff_t>(workers_)) {
  threads_.reserve(workers_ - 1);
  for (std::size_t id = 1; id < workers_; ++id) threads_.emplace_back([this, id] { loop(id); });
}

WorkerPool::~WorkerPool() {
  if (threads_.empty()) return;
  stopping_ = true;
  start_.arrive_and_wait();
}

void WorkerPool::loop(std::size_t id) {
  while (true) {
    start_.arrive_and_wait();
    if (stopping_) return;
    (*job_)(id, workers_);
    done_.arrive_and_wait();
  }
}

void WorkerPool::run(const std::function<void(std::size_t, std::size_t)>& job) {
  if (threads_.empty()) {
    job(0, 1);
    return;
  }
  job_ = &job;
  start_.arrive_and_wait();
  job(0, workers_);
  done_.arrive_and_wait();
  job_ = nullptr;
}

QuestionBank::QuestionBank(std::size_t dim, std::vector<GvfQuestion> questions, const EngineOptions& opts)
    : dim_(dim) {
  std::set<std::uint32_t> ids;
  demons_.reserve(questions.size());
  for (auto& q : questions) {
    if (!ids.insert(q.id).second) throw ConfigError("question id " + std::to_string(q.id) + " is not unique");
    if (const auto* g = std::get_if<GibbsPolicy>(&q.target); g && g->dim != dim) {
      throw ConfigError("Gibbs policy dimension does not match the feature dimension");
    }
    GtdLearner learner(dim, q.gamma, opts.learning);
    if (opts.initial_theta != 0.0) {
      for (auto& x : learner.mutable_theta()) x = opts.initial_theta;
    }
    demons_.push_back(Demon{std::move(q), std::move(learner), MspbeTrackers(dim, opts.mspbe),
                            NmsreTracker(opts.nmsre_tau), false});
  }
}

Horde::Horde(QuestionBank bank, EngineOptions opts)
    : bank_(std::move(bank)), opts_(opts), pool_(std::min(opts.workers, std::max<std::size_t>(bank_.size(), 1))) {}

TickReport Horde::tick(std::uint64_t step, Phase phase, const TickInput& in) {
  switch (phase) {
    case Phase::learn:
      return learn(step, in);
    case Phase::test: {
      const auto t0 = std::chrono::steady_clock::now();
      excursion_tick(step, in);
      TickReport r;
      r.step = step;
      r.phase = phase;
      r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      return r;
    }
    case Phase::recenter:
      break;
  }
  TickReport r;
  r.step = step;
  r.phase = phase;
  return r;
}

TickReport Horde::learn(std::uint64_t step, const TickInput& in) {
  if (in.phi.dim() != bank_.dim() || in.phi_next.dim() != bank_.dim()) {
    throw ConfigError("tick: feature dimension does not match the question bank");
  }
  if (!(in.behaviour_prob > 0.0 && in.behaviour_prob <= 1.0)) {
    throw SupportError("tick: behaviour probability must lie in (0, 1]");
  }
  const auto t0 = std::chrono::steady_clock::now();

  struct Counts {
    std::size_t updated = 0, skipped = 0, diverged = 0;
    char pad[64 - 3 * sizeof(std::size_t)];
  };
  std::vector<Counts> counts(pool_.size());

  pool_.run([&](std::size_t worker, std::size_t stride) {
    Counts& c = counts[worker];
    for (std::size_t i = worker; i < bank_.size(); i += stride) {
      Demon& d = bank_[i];
      if (d.quarantined) {
        ++c.skipped;
        continue;
      }
      const double rho = importance_ratio(d.question.target, in.behaviour_prob, in.phi, in.action);
      if (rho == 0.0) {
        d.learner.step_unmatched(in.phi);
        d.mspbe.update_zero();
        ++c.skipped;
      } else {
        const Transition tr{in.phi, in.action, in.phi_next, in.signals[d.question.reward_index], in.behaviour_prob,
                            in.gamma_next};
        const auto res = d.learner.step(tr, rho);
        d.mspbe.update(res.delta, rho, d.learner.trace_support(), d.learner.trace(), res.trace_dot_w);
        ++c.updated;
      }
      if (d.learner.diverged()) {
        d.quarantined = true;
        ++c.diverged;
      }
    }
  });

  TickReport r;
  r.step = step;
  r.phase = Phase::learn;
  for (const auto& c : counts) {
    r.updated += c.updated;
    r.skipped += c.skipped;
    r.diverged += c.diverged;
  }
  quarantined_ += r.diverged;
  r.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r.overrun = r.duration_ms > opts_.cycle_budget_ms;
  return r;
}

void Horde::excursion_tick(std::uint64_t step, const TickInput& in) {
  if (!excursion_) {
    Excursion ex{step, in.action, std::vector<double>(bank_.size()), {}};
    for (std::size_t i = 0; i < bank_.size(); ++i) ex.predictions[i] = bank_[i].learner.predict(in.phi);
    excursion_ = std::move(ex);
  }
  excursion_->signals.emplace_back(in.signals.begin(), in.signals.end());
}

std::vector<ExcursionRecord> Horde::end_excursion() {
  std::vector<ExcursionRecord> out;
  if (!excursion_) return out;
  Excursion ex = std::move(*excursion_);
  excursion_.reset();
  if (ex.signals.size() < opts_.return_horizon) return out;

  std::vector<double> rewards(opts_.return_horizon);
  for (std::size_t i = 0; i < bank_.size(); ++i) {
    Demon& d = bank_[i];
    const auto* target = std::get_if<ConstantActionPolicy>(&d.question.target);
    if (!target || target->action != ex.action || d.quarantined) continue;
    for (std::size_t k = 0; k < rewards.size(); ++k) rewards[k] = ex.signals[k][d.question.reward_index];
    const double g = truncated_return(rewards, d.question.gamma, opts_.return_horizon);
    d.nmsre.update(ex.predictions[i], g);
    out.push_back({ex.step, d.question.id, ex.predictions[i], g});
  }
  return out;
}

void Horde::reset_primary(Rng& rng, double low, double high) {
  for (auto& d : bank_) d.learner.reset_primary(rng, low, high);
}

void Horde::clear_traces() {
  for (auto& d : bank_) d.learner.clear_trace();
}

DemonMetrics Horde::metrics(std::size_t i) const {
  const Demon& d = bank_[i];
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  return {d.nmsre.excursions() > 0 ? d.nmsre.value() : nan,
          d.mspbe.has_vector() ? d.mspbe.vector_estimate(d.learner.w()) : nan, d.mspbe.scalar_estimate()};
}

}  // namespace horde
