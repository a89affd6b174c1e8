#include "horde/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "horde/error.hpp"
#include "horde/io.hpp"

namespace horde {

namespace fs = std::filesystem;

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

enum Stream : std::uint64_t { behaviour_stream = 0, sensor_stream = 1, schedule_stream = 2, reset_stream = 3 };

void append_field(std::string& out, double x) {
  out += ',';
  if (!std::isnan(x)) io::append_double(out, x);
}

double parse_field(std::string_view s, std::size_t line) {
  if (s.empty()) return nan;
  const auto x = io::parse_double(s);
  if (!x) throw ParseError("expected a number, got '" + std::string(s) + "'", line);
  return *x;
}

std::uint64_t parse_count(std::string_view s, std::size_t line) {
  const auto x = io::parse_int(s);
  if (!x || *x < 0) throw ParseError("expected a non-negative integer, got '" + std::string(s) + "'", line);
  return static_cast<std::uint64_t>(*x);
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  return in;
}

// Reads a CSV with a fixed header, handing each split data row to `row`.
template <typename F>
void read_csv(const fs::path& path, std::string_view header, std::size_t columns, F&& row) {
  auto in = open_in(path);
  std::string line;
  std::size_t n = 0;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  ++n;
  if (line != header) throw ParseError("unexpected header '" + line + "'", n);
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    const auto cells = io::split(line, ',');
    if (cells.size() != columns) {
      throw ParseError("expected " + std::to_string(columns) + " fields, got " + std::to_string(cells.size()), n);
    }
    row(cells, n);
  }
}

std::string target_name(const PolicySpec& target, const ActionSet& actions) {
  if (const auto* c = std::get_if<ConstantActionPolicy>(&target)) {
    return "constant:" + (c->action < actions.size() ? actions.name(c->action) : std::to_string(c->action));
  }
  if (std::holds_alternative<GibbsPolicy>(target)) return "gibbs";
  std::string out = "fixed:";
  const auto& p = std::get<FixedPolicy>(target).probabilities;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (a) out += ';';
    io::append_double(out, p[a]);
  }
  return out;
}

fs::path run_path(const fs::path& dir, const ExperimentConfig& cfg, std::uint64_t run, std::string_view name) {
  if (cfg.runs == 1) return dir / name;
  return dir / ("run" + std::to_string(run)) / name;
}

// Shared bookkeeping for one run.
class RunContext {
public:
  RunContext(const ExperimentConfig& cfg, const RunOptions& opts, RunResult& result, std::uint64_t run)
      : cfg_(cfg), opts_(opts), result_(result), run_(run) {}

  void log_metrics(const Horde& horde, std::uint64_t step, double sample = nan, double truth = nan) {
    for (std::size_t i = 0; i < horde.bank().size(); ++i) {
      const auto m = horde.metrics(i);
      result_.metrics.push_back(
          {run_, step, horde.bank()[i].question.id, {m.nmsre, m.mspbe_vector, m.mspbe_scalar, sample, truth}});
    }
  }

  void record(const TickReport& r) {
    if (r.overrun) {
      if (result_.overruns < 10) warn("tick " + std::to_string(r.step) + " took " + io::format_double(r.duration_ms) +
                                      " ms, over the cycle budget");
      ++result_.overruns;
    }
    if (r.diverged > 0) {
      warn("tick " + std::to_string(r.step) + ": " + std::to_string(r.diverged) +
           " learner(s) diverged and were quarantined");
    }
    result_.journal.push_back({run_, r});
  }

  void excursions(std::vector<ExcursionRecord> records) {
    for (auto& rec : records) result_.excursions.push_back({run_, rec});
  }

  void finish(const Horde& horde, std::uint64_t step) {
    result_.quarantined += horde.quarantined();
    std::vector<std::vector<double>> thetas;
    thetas.reserve(horde.bank().size());
    for (const auto& d : horde.bank()) thetas.emplace_back(d.learner.theta().begin(), d.learner.theta().end());
    result_.final_theta.push_back(std::move(thetas));
    if (opts_.output_dir && cfg_.snapshots) {
      const fs::path dir = run_path(*opts_.output_dir / "snapshots", cfg_, run_, std::to_string(step));
      fs::create_directories(dir);
      for (const auto& d : horde.bank()) {
        write_snapshot(dir / (std::to_string(d.question.id) + ".weights"), d.question.id, d.learner);
      }
    }
  }

  void pace(std::chrono::steady_clock::time_point start, std::uint64_t ticks) const {
    if (!cfg_.realtime) return;
    const auto budget = std::chrono::duration<double, std::milli>(cfg_.cycle_budget_ms);
    std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                              budget * static_cast<double>(ticks)));
  }

  void warn(const std::string& msg) const {
    if (opts_.warn) opts_.warn(msg);
  }

private:
  const ExperimentConfig& cfg_;
  const RunOptions& opts_;
  RunResult& result_;
  std::uint64_t run_;
};

void run_chain(const ExperimentConfig& cfg, RunContext& ctx, std::uint64_t run) {
  const auto repr = cfg.chain_features;
  const ChainModel model = chain_model(cfg.target_right, cfg.behaviour_right, repr, cfg.chain_gamma);
  const FixedPolicy behaviour{{1.0 - cfg.behaviour_right, cfg.behaviour_right}};

  EngineOptions eo = engine_options(cfg);
  eo.workers = 1;
  QuestionBank bank(chain_feature_count,
                    {GvfQuestion{0, FixedPolicy{{1.0 - cfg.target_right, cfg.target_right}}, cfg.chain_gamma, 0}}, eo);
  Horde horde(std::move(bank), eo);

  Rng rng = derive_rng(cfg.seed, run, behaviour_stream);
  Rng reset_rng = derive_rng(cfg.seed, run, reset_stream);
  std::optional<SampleMspbe> sample;
  if (cfg.sample_mspbe) sample.emplace(chain_feature_count, cfg.covariance_epsilon);

  ChainEnv env;
  std::uint64_t tick = 0;
  for (std::uint64_t episode = 1; episode <= cfg.episodes; ++episode) {
    env.begin_episode();
    horde.clear_traces();
    SparseFeatures phi = chain_state_features(env.state(), repr);
    while (!env.at_terminal()) {
      const auto b = sample_fixed(behaviour, rng);
      const ChainStep st = env.step(b.action);
      SparseFeatures phi_next = chain_state_features(st.next_state, repr);
      const double signals[] = {st.reward};
      const double gamma_next = st.terminal ? 0.0 : cfg.chain_gamma;
      horde.learn(tick++, {phi, b.action, b.probability, phi_next, signals, gamma_next});
      if (sample) sample->add_features(phi);
      phi = std::move(phi_next);
    }

    if (episode % cfg.log_interval == 0 || episode == cfg.reset_at) {
      const Demon& d = horde.bank()[0];
      const double truth = mspbe_true(model.mdp, model.target, d.learner.theta(), cfg.learning.lambda);
      double sampled = nan;
      if (sample && d.mspbe.has_vector()) {
        const auto q = d.mspbe.vector_trace().value();
        sampled = sample->evaluate(Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size())));
      }
      ctx.log_metrics(horde, episode, sampled, truth);
    }
    if (cfg.reset == ResetKind::theta && episode == cfg.reset_at) {
      horde.reset_primary(reset_rng, cfg.reset_low, cfg.reset_high);
    }
  }
  ctx.finish(horde, cfg.episodes);
}

void run_pen(const ExperimentConfig& cfg, const RunOptions& opts, RunContext& ctx, std::uint64_t run) {
  const TileCoder coder(tile_layout(cfg));
  const ActionSet actions = ActionSet::robot();
  const EngineOptions eo = engine_options(cfg);
  Horde horde(QuestionBank(coder.dimension(), build_questions(cfg), eo), eo);

  PenSimConfig sim;
  sim.noise = cfg.sensor_noise;
  sim.seed = derive_rng(cfg.seed, run, sensor_stream)();
  PenSimEnv env(sim);
  PersistentRandomBehaviour behaviour(actions.size(), cfg.repeat_probability);
  ExcursionScheduleConfig sc = cfg.schedule;
  sc.policy_count = actions.size();
  ExcursionSchedule schedule(sc);
  Rng rng = derive_rng(cfg.seed, run, behaviour_stream);
  Rng schedule_rng = derive_rng(cfg.seed, run, schedule_stream);
  Rng reset_rng = derive_rng(cfg.seed, run, reset_stream);

  std::optional<LogWriter> stream;
  if (opts.output_dir && cfg.record_stream) {
    const fs::path path = run_path(*opts.output_dir, cfg, run, "stream.csv");
    fs::create_directories(path.parent_path());
    stream.emplace(path, PenSimEnv::sensor_count, actions);
  }

  std::vector<double> obs(env.observation().begin(), env.observation().end());
  SparseFeatures phi = coder.encode(obs);
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t t = 0; t < cfg.steps; ++t) {
    if (cfg.reset == ResetKind::theta && t == cfg.reset_at) {
      horde.reset_primary(reset_rng, cfg.reset_low, cfg.reset_high);
    }
    const Phase phase = schedule.phase();
    Action action = 0;
    double prob = 1.0;
    double logged_prob = 0.0;
    switch (phase) {
      case Phase::learn: {
        const auto b = behaviour.sample(rng);
        action = b.action;
        prob = logged_prob = b.probability;
        break;
      }
      case Phase::test:
        action = schedule.excursion_action();
        break;
      case Phase::recenter:
        action = env.recenter_action();
        if (cfg.learn_during_recenter) logged_prob = 1.0;
        break;
    }
    if (stream) stream->write({t, static_cast<long>(action), logged_prob, obs});

    const auto next = env.step(action);
    std::vector<double> next_obs(next.begin(), next.end());
    SparseFeatures phi_next = coder.encode(next_obs);
    const TickInput in{phi, action, prob, phi_next, next_obs};
    if (phase == Phase::learn || (phase == Phase::recenter && cfg.learn_during_recenter)) {
      ctx.record(horde.learn(t, in));
    } else {
      ctx.record(horde.tick(t, phase, in));
    }

    const auto decision = schedule.advance(schedule_rng);
    if (decision.from == Phase::test && decision.changed()) ctx.excursions(horde.end_excursion());
    if (decision.from == Phase::learn && decision.to == Phase::test && cfg.clear_trace_on_excursion) {
      horde.clear_traces();
    }

    if ((t + 1) % cfg.log_interval == 0) ctx.log_metrics(horde, t + 1);
    obs = std::move(next_obs);
    phi = std::move(phi_next);
    ctx.pace(start, t + 1);
  }
  if (stream) {
    stream->write({cfg.steps, -1, 0.0, obs});
    stream->flush();
  }
  ctx.finish(horde, cfg.steps);
}

void run_replay(const ExperimentConfig& cfg, RunContext& ctx) {
  const TileCoder coder(tile_layout(cfg));
  LogReplay log(cfg.replay_path);
  const EngineOptions eo = engine_options(cfg);
  if (log.sensor_count() == 0) {
    Horde empty(QuestionBank(tile_layout(cfg).dimension(), build_questions(cfg), eo), eo);
    ctx.finish(empty, 0);
    return;
  }
  if (log.sensor_count() != PenSimEnv::sensor_count) {
    throw InputError("replay: log has " + std::to_string(log.sensor_count()) + " sensors, the feature layout needs " +
                     std::to_string(PenSimEnv::sensor_count));
  }
  if (log.actions().size() != ActionSet::robot().size()) throw InputError("replay: log action set does not match");
  Horde horde(QuestionBank(coder.dimension(), build_questions(cfg), eo), eo);
  Rng reset_rng = derive_rng(cfg.seed, 0, reset_stream);

  auto row = log.next();
  if (!row) {
    ctx.finish(horde, 0);
    return;
  }
  SparseFeatures phi = coder.encode(row->observation);
  std::uint64_t last = row->step;
  while (row->action >= 0) {
    auto next = log.next();
    if (!next) throw InputError("replay: log ends without a final observation row");
    const std::uint64_t t = row->step;
    if (cfg.reset == ResetKind::theta && t == cfg.reset_at) {
      horde.reset_primary(reset_rng, cfg.reset_low, cfg.reset_high);
    }
    SparseFeatures phi_next = coder.encode(next->observation);
    if (row->behaviour_prob > 0.0) {
      const TickInput in{phi, static_cast<Action>(row->action), row->behaviour_prob, phi_next, next->observation};
      ctx.record(horde.learn(t, in));
    }
    if ((t + 1) % cfg.log_interval == 0) ctx.log_metrics(horde, t + 1);
    phi = std::move(phi_next);
    last = next->step;
    row = std::move(next);
  }
  ctx.finish(horde, last);
}

}  // namespace

Rng derive_rng(std::uint64_t seed, std::uint64_t run, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run), static_cast<std::uint32_t>(run >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

std::size_t resolve_workers(std::uint64_t configured) {
  if (configured > 0) return static_cast<std::size_t>(configured);
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<GvfQuestion> build_questions(const ExperimentConfig& cfg) {
  const ActionSet actions = ActionSet::robot();
  if (cfg.questions == QuestionKind::random_gibbs) {
    Rng rng = derive_rng(cfg.policy_seed, 0, 0);
    return question_bank_gibbs(cfg.policy_count, cfg.gammas, cfg.sensors, tile_layout(cfg).dimension(), actions, rng,
                               cfg.nonzeros);
  }
  return question_bank_constant(cfg.gammas, cfg.sensors, actions);
}

EngineOptions engine_options(const ExperimentConfig& cfg) {
  EngineOptions eo;
  eo.workers = resolve_workers(cfg.workers);
  eo.learning = cfg.learning;
  eo.mspbe = {cfg.mspbe_tau, cfg.vector_estimator, cfg.rho_weighted_traces};
  eo.nmsre_tau = cfg.nmsre_tau;
  eo.return_horizon = cfg.return_horizon;
  eo.cycle_budget_ms = cfg.cycle_budget_ms;
  eo.initial_theta = cfg.initial_theta;
  return eo;
}

RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  if (auto problems = validate_config(cfg); !problems.empty()) throw ConfigValidationError(std::move(problems));

  RunResult result;
  ActionSet actions = ActionSet::robot();
  if (cfg.environment == EnvironmentKind::chain) {
    actions = ActionSet::chain();
    result.questions = {GvfQuestion{0, FixedPolicy{{1.0 - cfg.target_right, cfg.target_right}}, cfg.chain_gamma, 0}};
  } else {
    result.questions = build_questions(cfg);
  }

  if (opts.output_dir) {
    fs::create_directories(*opts.output_dir);
    auto out = open_out(*opts.output_dir / "config.ini");
    out << serialize_config(cfg);
    write_questions(*opts.output_dir / "questions.csv", result.questions, actions);
  }

  const std::uint64_t runs = cfg.environment == EnvironmentKind::replay ? 1 : cfg.runs;
  for (std::uint64_t run = 0; run < runs; ++run) {
    RunContext ctx(cfg, opts, result, run);
    switch (cfg.environment) {
      case EnvironmentKind::chain:
        run_chain(cfg, ctx, run);
        break;
      case EnvironmentKind::pen:
        run_pen(cfg, opts, ctx, run);
        break;
      case EnvironmentKind::replay:
        run_replay(cfg, ctx);
        break;
    }
  }

  if (opts.output_dir) {
    write_metrics(*opts.output_dir / "metrics.csv", result.metrics);
    write_excursions(*opts.output_dir / "excursions.csv", result.excursions);
    write_journal(*opts.output_dir / "journal.csv", result.journal);
  }
  return result;
}

BenchResult bench_engine(const ExperimentConfig& cfg, std::size_t ticks, std::optional<std::size_t> questions) {
  if (ticks == 0) throw ConfigError("bench: need at least one tick");
  ExperimentConfig c = cfg;
  if (questions) c.policy_count = *questions;
  const TileCoder coder(tile_layout(c));
  const EngineOptions eo = engine_options(c);
  Horde horde(QuestionBank(coder.dimension(), build_questions(c), eo), eo);

  PenSimConfig sim;
  sim.noise = c.sensor_noise;
  sim.seed = derive_rng(c.seed_set ? c.seed : 1, 0, sensor_stream)();
  PenSimEnv env(sim);
  PersistentRandomBehaviour behaviour(ActionSet::robot().size(), c.repeat_probability);
  Rng rng = derive_rng(c.seed_set ? c.seed : 1, 0, behaviour_stream);

  std::vector<std::vector<double>> obs{{env.observation().begin(), env.observation().end()}};
  std::vector<SparseFeatures> phi{coder.encode(obs.back())};
  std::vector<BehaviourSample> acts;
  for (std::size_t t = 0; t < ticks; ++t) {
    acts.push_back(behaviour.sample(rng));
    const auto next = env.step(acts.back().action);
    obs.emplace_back(next.begin(), next.end());
    phi.push_back(coder.encode(obs.back()));
  }

  std::vector<double> ms;
  std::size_t updates = 0;
  for (std::size_t t = 0; t < ticks; ++t) {
    const auto r = horde.learn(t, {phi[t], acts[t].action, acts[t].probability, phi[t + 1], obs[t + 1]});
    ms.push_back(r.duration_ms);
    updates += r.updated;
  }

  BenchResult b;
  b.questions = horde.bank().size();
  b.workers = horde.workers();
  b.ticks = ticks;
  b.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ticks);
  b.max_ms = *std::max_element(ms.begin(), ms.end());
  std::nth_element(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(ticks / 2), ms.end());
  b.median_ms = ms[ticks / 2];
  b.updates_per_tick = static_cast<double>(updates) / static_cast<double>(ticks);
  return b;
}

void write_metrics(const fs::path& path, const std::vector<MetricRow>& rows) {
  auto out = open_out(path);
  std::string buf = "run,step,question";
  for (auto name : metric::names) (buf += ',') += name;
  buf += '\n';
  for (const auto& r : rows) {
    buf += std::to_string(r.run);
    (buf += ',') += std::to_string(r.step);
    (buf += ',') += std::to_string(r.question);
    for (double v : r.values) append_field(buf, v);
    buf += '\n';
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

std::vector<MetricRow> read_metrics(const fs::path& path) {
  std::string header = "run,step,question";
  for (auto name : metric::names) (header += ',') += name;
  std::vector<MetricRow> rows;
  read_csv(path, header, 3 + metric::count, [&](const std::vector<std::string_view>& c, std::size_t line) {
    MetricRow r;
    r.run = parse_count(c[0], line);
    r.step = parse_count(c[1], line);
    r.question = static_cast<std::uint32_t>(parse_count(c[2], line));
    for (std::size_t k = 0; k < metric::count; ++k) r.values[k] = parse_field(c[3 + k], line);
    rows.push_back(r);
  });
  return rows;
}

void write_excursions(const fs::path& path, const std::vector<ExcursionRow>& rows) {
  auto out = open_out(path);
  std::string buf = "run,step,question,prediction,return\n";
  for (const auto& r : rows) {
    buf += std::to_string(r.run);
    (buf += ',') += std::to_string(r.record.step);
    (buf += ',') += std::to_string(r.record.question);
    append_field(buf, r.record.prediction);
    append_field(buf, r.record.sampled_return);
    buf += '\n';
  }
  out << buf;
}

std::vector<ExcursionRow> read_excursions(const fs::path& path) {
  std::vector<ExcursionRow> rows;
  read_csv(path, "run,step,question,prediction,return", 5,
           [&](const std::vector<std::string_view>& c, std::size_t line) {
             ExcursionRow r;
             r.run = parse_count(c[0], line);
             r.record.step = parse_count(c[1], line);
             r.record.question = static_cast<std::uint32_t>(parse_count(c[2], line));
             r.record.prediction = parse_field(c[3], line);
             r.record.sampled_return = parse_field(c[4], line);
             rows.push_back(r);
           });
  return rows;
}

void write_journal(const fs::path& path, const std::vector<JournalRow>& rows) {
  auto out = open_out(path);
  std::string buf = "run,step,phase,duration_ms,updated,skipped,diverged,overrun\n";
  for (const auto& [run, r] : rows) {
    buf += std::to_string(run);
    (buf += ',') += std::to_string(r.step);
    (buf += ',') += phase_name(r.phase);
    append_field(buf, r.duration_ms);
    (buf += ',') += std::to_string(r.updated);
    (buf += ',') += std::to_string(r.skipped);
    (buf += ',') += std::to_string(r.diverged);
    buf += r.overrun ? ",1\n" : ",0\n";
    if (buf.size() > (1u << 20)) {
      out << buf;
      buf.clear();
    }
  }
  out << buf;
}

void write_questions(const fs::path& path, const std::vector<GvfQuestion>& questions, const ActionSet& actions) {
  auto out = open_out(path);
  std::string buf = "id,target,gamma,cumulant\n";
  for (const auto& q : questions) {
    buf += std::to_string(q.id);
    (buf += ',') += target_name(q.target, actions);
    append_field(buf, q.gamma);
    (buf += ',') += std::to_string(q.reward_index);
    buf += '\n';
  }
  out << buf;
}

}  // namespace horde
