#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <Eigen/Dense>

#include "gen.hpp"
#include "horde/environments.hpp"
#include "horde/error.hpp"

using namespace horde;

namespace {

std::filesystem::path temp_file(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

double wrap(double a) {
  a = std::fmod(a, 2.0 * std::numbers::pi);
  return a < 0 ? a + 2.0 * std::numbers::pi : a;
}

}  // namespace

TEST_CASE("chain transitions") {
  ChainEnv env;
  CHECK(env.state() == 3);
  auto s = env.step(chain_action::right);
  CHECK(s.next_state == 4);
  CHECK(s.reward == 0.0);
  CHECK_FALSE(s.terminal);
  env.step(chain_action::right);
  s = chain_step(env, chain_action::right);
  CHECK(s.next_state == 6);
  CHECK(s.reward == 1.0);
  CHECK(s.terminal);
  CHECK_THROWS_AS(env.step(chain_action::left), ProtocolError);

  env.begin_episode();
  env.step(chain_action::left);
  env.step(chain_action::left);
  s = env.step(chain_action::left);
  CHECK(s.next_state == 0);
  CHECK(s.reward == 0.0);
  CHECK(s.terminal);
  CHECK(env.episode_steps() == 3);
  CHECK(chain_state_features(0, ChainRepresentation::inverted).empty());
  CHECK(chain_state_features(6, ChainRepresentation::inverted).dim() == 5);
  CHECK(chain_state_features(1, ChainRepresentation::inverted) == chain_features(0, ChainRepresentation::inverted));
}

TEST_CASE("chain model: DP values satisfy the Bellman system") {
  const auto m = chain_model(0.95, 0.2, ChainRepresentation::inverted);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(5, 5);
  const Eigen::VectorXd v = (eye - m.target.kernel).lu().solve(m.target.expected_reward);
  for (int s = 0; s < 5; ++s) {
    const double left = s > 0 ? v(s - 1) : 0.0;
    const double right = s < 4 ? v(s + 1) : 1.0;
    CHECK(v(s) == doctest::Approx(0.05 * left + 0.95 * right).epsilon(1e-12));
  }
  CHECK_THROWS_AS(chain_model(0.95, 0.0, ChainRepresentation::inverted), ConfigError);
}

TEST_CASE("pen: pose and sensors stay bounded under random actions") {
  PenSimEnv env({.noise = 0.05, .seed = 3});
  Rng rng(3);
  for (int t = 0; t < 20000; ++t) {
    const auto obs = env.step(gen::index(rng, 5));
    REQUIRE(obs.size() == 53);
    for (double x : obs) REQUIRE((x >= 0.0 && x <= 1.0));
    const auto& p = env.pose();
    REQUIRE((p.x >= 0.0 && p.x <= 2.0 && p.y >= 0.0 && p.y <= 2.0));
    REQUIRE((p.heading >= 0.0 && p.heading < 2.0 * std::numbers::pi));
  }
  CHECK_THROWS_AS(env.step(5), ConfigError);
}

TEST_CASE("pen: stopping lets the velocity proxies settle") {
  PenSimEnv env({.noise = 0.0});
  for (int t = 0; t < 20; ++t) env.step(robot_action::forward);
  for (int t = 0; t < 10; ++t) env.step(robot_action::rotate_cw);
  std::span<const double> obs;
  for (int t = 0; t < 200; ++t) obs = pen_step(env, robot_action::stop);
  for (std::size_t s : {30, 31, 32, 27, 28, 29}) CHECK(obs[s] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(obs[52] == doctest::Approx(0.0).scale(1e-6));
}

TEST_CASE("pen: driving into a wall clamps and saturates the proximity sensor") {
  PenSimEnv env({.noise = 0.0, .start = {1.0, 1.0, 0.0}});
  std::span<const double> obs;
  for (int t = 0; t < 100; ++t) obs = env.step(robot_action::forward);
  CHECK(env.pose().x == 2.0);
  CHECK(env.pose().y == doctest::Approx(1.0));
  CHECK(obs[0] > 0.99);
  CHECK(obs[4] < 0.01);
}

TEST_CASE("pen: rotation follows the closed-form kinematics") {
  const double rate = 0.15;
  PenSimEnv env({.angular_rate = rate, .noise = 0.0, .start = {0.6, 0.8, 1.0}});
  const double bearing = std::atan2(1.7 - 0.8, 1.7 - 0.6);
  const double r2 = (1.1 * 1.1) + (0.9 * 0.9);
  for (int t = 1; t <= 50; ++t) {
    const auto obs = env.step(robot_action::rotate_cw);
    const double h = wrap(1.0 - t * rate);
    CHECK(env.pose().heading == doctest::Approx(h).epsilon(1e-9));
    for (int k = 0; k < 8; ++k) {
      const double light = (0.5 + 0.5 * std::cos(bearing - (h + k * std::numbers::pi / 4.0))) / (1.0 + r2 / 2.0);
      CHECK(obs[8 + static_cast<std::size_t>(k)] == doctest::Approx(light).epsilon(1e-9));
    }
  }
  CHECK(env.pose().x == 0.6);
  CHECK(env.pose().heading == doctest::Approx(wrap(1.0 - 50 * rate)).epsilon(1e-9));
}

TEST_CASE("pen: recentring reaches the middle") {
  PenSimEnv env({.noise = 0.0, .start = {0.1, 1.8, 2.0}});
  for (int t = 0; t < 200; ++t) env.step(env.recenter_action());
  CHECK(std::hypot(env.pose().x - 1.0, env.pose().y - 1.0) < 0.06);
}

TEST_CASE("pen: identical seeds give identical streams") {
  PenSimEnv a({.seed = 8}), b({.seed = 8});
  for (int t = 0; t < 500; ++t) {
    const auto oa = a.step(static_cast<Action>(t % 5));
    const auto ob = b.step(static_cast<Action>(t % 5));
    REQUIRE(std::equal(oa.begin(), oa.end(), ob.begin()));
  }
}

TEST_CASE("schedule: phase lengths and mean interval") {
  ExcursionSchedule sched({.enabled = true, .mean_interval = 50.0, .test_length = 51, .recenter_length = 20});
  Rng rng(5);
  std::size_t phases = 0, learn_ticks = 0, learn_total = 0, other = 0, total = 0;
  std::size_t run = 0;
  Phase prev = sched.phase();
  while (phases < 100000) {
    const Phase p = sched.phase();
    ++total;
    if (p == Phase::learn) {
      ++learn_total;
    } else {
      ++other;
    }
    ++run;
    const auto d = schedule_next_phase(sched, rng);
    if (d.changed()) {
      // LEARN → TEST → RECENTER → LEARN, with fixed TEST and RECENTER lengths.
      if (d.from == Phase::learn) {
        CHECK(d.to == Phase::test);
        ++phases;
        learn_ticks += run;
      } else if (d.from == Phase::test) {
        CHECK(d.to == Phase::recenter);
        CHECK(run == 51);
      } else {
        CHECK(d.to == Phase::learn);
        CHECK(run == 20);
      }
      run = 0;
    }
    prev = p;
  }
  (void)prev;
  const double mean_learn = static_cast<double>(learn_ticks) / static_cast<double>(phases);
  CHECK(mean_learn >= 48.0);
  CHECK(mean_learn <= 52.0);
  const double non_learning = static_cast<double>(other) / static_cast<double>(total);
  CHECK(std::abs(non_learning - 0.58) < 0.15);
}

TEST_CASE("schedule: disabled schedule never tests") {
  ExcursionSchedule sched({.enabled = false});
  Rng rng(1);
  for (int t = 0; t < 10000; ++t) CHECK(sched.advance(rng).to == Phase::learn);
}

TEST_CASE("schedule: excursion policies are drawn uniformly") {
  ExcursionSchedule sched({.enabled = true, .mean_interval = 1.0, .test_length = 1, .recenter_length = 0});
  Rng rng(2);
  std::array<int, 5> counts{};
  for (int t = 0; t < 50000; ++t) {
    const auto d = sched.advance(rng);
    if (d.to == Phase::test && d.from == Phase::learn) counts[sched.excursion_action()]++;
  }
  for (int c : counts) CHECK(std::abs(c / 25000.0 - 0.2) < 0.02);
}

TEST_CASE("logs: writer output replays to the same rows") {
  const auto path = temp_file("horde_log_roundtrip.csv");
  Rng rng(12);
  std::vector<LogRow> rows;
  for (std::uint64_t t = 0; t < 300; ++t) {
    rows.push_back({t * 2, static_cast<long>(gen::index(rng, 5)), gen::uniform(rng), gen::vec(rng, 53, 0, 1)});
  }
  rows.push_back({600, -1, 0.0, gen::vec(rng, 53, 0, 1)});
  {
    LogWriter w(path, 53, ActionSet::robot());
    for (const auto& r : rows) w.write(r);
  }
  LogReplay replay(path);
  for (const auto& r : rows) {
    const auto got = replay_next(replay);
    REQUIRE(got.has_value());
    CHECK(*got == r);
  }
  CHECK_FALSE(replay.next().has_value());
  CHECK(replay.sensor_count() == 53);
  CHECK(replay.actions() == ActionSet::robot());
  std::filesystem::remove(path);
}

TEST_CASE("logs: empty file and malformed input") {
  const auto path = temp_file("horde_log_bad.csv");
  { std::ofstream(path).close(); }
  LogReplay empty(path);
  CHECK_FALSE(empty.next().has_value());

  auto expect_line = [&](const std::string& text, std::size_t line) {
    { std::ofstream(path) << text; }
    try {
      LogReplay r(path);
      while (r.next()) {
      }
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == line);
    }
  };
  const std::string head = "# horde-log v1\n# sensors=2 actions=a,b\nstep,action,behaviour_prob,s0,s1\n";
  expect_line("hello\n", 1);
  expect_line("# horde-log v1\n# nonsense\n", 2);
  expect_line(head + "0,0,0.5,0.1,0.2\n1,0,0.5,0.1\n", 5);
  expect_line(head + "0,0,0.5,0.1,0.2\n0,1,0.5,0.1,0.2\n", 5);
  expect_line(head + "0,2,0.5,0.1,0.2\n", 4);
  expect_line(head + "0,0,1.5,0.1,0.2\n", 4);
  expect_line(head + "0,0,0.5,x,0.2\n", 4);
  std::filesystem::remove(path);
}
