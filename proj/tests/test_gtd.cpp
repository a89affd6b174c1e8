#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Dense>

#include "gen.hpp"
#include "horde/config.hpp"
#include "horde/error.hpp"
#include "horde/experiment.hpp"
#include "horde/gtd.hpp"

using namespace horde;

namespace {

// Literal dense GTD(λ) from the pseudocode.
struct DenseGtd {
  std::vector<double> theta, w, e;
  double gamma;
  GtdParams p;

  DenseGtd(std::size_t n, double g, GtdParams params) : theta(n), w(n), e(n), gamma(g), p(params) {}

  double step(const std::vector<double>& phi, const std::vector<double>& phi_next, double r, double rho,
              double gamma_next) {
    const std::size_t n = theta.size();
    double v = 0.0, v_next = 0.0, phi_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v += theta[i] * phi[i];
      v_next += theta[i] * phi_next[i];
      phi_w += w[i] * phi[i];
    }
    const double delta = r + gamma_next * v_next - v;
    for (std::size_t i = 0; i < n; ++i) e[i] = rho * (phi[i] + gamma * p.lambda * e[i]);
    double e_w = 0.0;
    for (std::size_t i = 0; i < n; ++i) e_w += e[i] * w[i];
    for (std::size_t i = 0; i < n; ++i) {
      theta[i] += p.alpha_theta * (delta * e[i] - gamma_next * (1.0 - p.lambda) * e_w * phi_next[i]);
    }
    for (std::size_t i = 0; i < n; ++i) w[i] += p.alpha_w * (delta * e[i] - phi_w * phi[i]);
    return delta;
  }
};

void check_close(std::span<const double> a, const std::vector<double>& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (tol == 0.0) {
      CHECK(a[i] == b[i]);
    } else {
      CHECK(a[i] == doctest::Approx(b[i]).epsilon(tol).scale(1.0));
    }
  }
}

}  // namespace

TEST_CASE("gtd_step: hand-evaluated example") {
  GtdLearner l(2, 0.5, {0.1, 0.05, 0.0});
  l.mutable_theta()[0] = 1.0;
  const auto phi = SparseFeatures::binary(2, {0});
  const auto next = SparseFeatures::binary(2, {1});
  const auto res = l.step({phi, 0, next, 1.0, 0.5}, 2.0);
  CHECK(res.delta == 0.0);
  CHECK(l.trace()[0] == 2.0);
  CHECK(l.trace()[1] == 0.0);
  CHECK(l.theta()[0] == 1.0);
  CHECK(l.theta()[1] == 0.0);
  CHECK(l.w()[0] == 0.0);
  CHECK(l.w()[1] == 0.0);
}

TEST_CASE("gtd_step: zero start and zero reward") {
  GtdLearner l(6, 0.9, {0.1, 0.01, 0.9});
  const auto phi = SparseFeatures::binary(6, {1, 4});
  const auto next = SparseFeatures::binary(6, {0, 2});
  const auto res = l.step({phi, 0, next, 0.0, 0.5}, 1.5);
  CHECK(res.delta == 0.0);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(l.theta()[i] == 0.0);
    CHECK(l.w()[i] == 0.0);
    CHECK(l.trace()[i] == (i == 1 || i == 4 ? 1.5 : 0.0));
  }
}

TEST_CASE("gtd_step: ρ = 0 clears e, keeps θ and decays w along φ") {
  Rng rng(2);
  GtdLearner l(8, 0.8, {0.1, 0.05, 0.9});
  const auto a = SparseFeatures::binary(8, {0, 3, 5});
  const auto b = SparseFeatures::binary(8, {1, 3, 7});
  l.step({a, 0, b, 1.0, 0.5}, 2.0);
  l.step({b, 0, a, -0.5, 0.5}, 2.0);
  const std::vector<double> theta(l.theta().begin(), l.theta().end());
  std::vector<double> w(l.w().begin(), l.w().end());
  const double phi_w = w[1] + w[3] + w[7];

  GtdLearner copy = l;
  l.step({b, 0, a, 3.0, 0.5}, 0.0);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(l.trace()[i] == 0.0);
    CHECK(l.theta()[i] == theta[i]);
  }
  CHECK(l.trace_support().empty());
  for (auto i : {1, 3, 7}) w[static_cast<std::size_t>(i)] -= 0.05 * phi_w;
  for (std::size_t i = 0; i < 8; ++i) CHECK(l.w()[i] == w[i]);

  // The shortcut is the same state as the literal update with ρ = 0.
  DenseGtd d(8, 0.8, {0.1, 0.05, 0.9});
  d.theta = theta;
  d.w.assign(copy.w().begin(), copy.w().end());
  d.e.assign(copy.trace().begin(), copy.trace().end());
  d.step(b.to_dense(), a.to_dense(), 3.0, 0.0, 0.8);
  check_close(l.w(), d.w, 1e-15);
  check_close(l.theta(), d.theta, 0.0);

  copy.step_unmatched(b);
  for (std::size_t i = 0; i < 8; ++i) CHECK(copy.w()[i] == l.w()[i]);
}

TEST_CASE("gtd_step matches the dense reference on random transitions") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 3 + gen::index(rng, 30);
    const double gamma = gen::uniform(rng, 0.0, 0.99);
    const GtdParams p{gen::uniform(rng, 0.001, 0.1), gen::uniform(rng, 0.001, 0.1), gen::uniform(rng, 0.0, 1.0)};
    GtdLearner l(n, gamma, p);
    DenseGtd d(n, gamma, p);
    for (int t = 0; t < 200; ++t) {
      const auto phi = gen::weighted(rng, n, 1 + gen::index(rng, n));
      const auto next = gen::weighted(rng, n, gen::index(rng, n + 1));
      const double r = gen::uniform(rng, -1.0, 1.0);
      const double rho = gen::index(rng, 4) == 0 ? 0.0 : gen::uniform(rng, 0.1, 2.0);
      const std::optional<double> gn = gen::index(rng, 5) == 0 ? std::optional(0.0) : std::nullopt;
      const auto res = l.step({phi, 0, next, r, 0.5, gn}, rho);
      const double delta = d.step(phi.to_dense(), next.to_dense(), r, rho, gn.value_or(gamma));
      CHECK(res.delta == doctest::Approx(delta).epsilon(1e-10));
    }
    check_close(l.theta(), d.theta, 1e-9);
    check_close(l.w(), d.w, 1e-9);
    check_close(l.trace(), d.e, 1e-9);
  }
}

TEST_CASE("GTD reduces exactly to TD(0) with ρ = 1, λ = 0 and w frozen at 0") {
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 2 + gen::index(rng, 40);
    const double gamma = gen::uniform(rng, 0.0, 0.99);
    const double alpha = gen::uniform(rng, 0.01, 0.2);
    GtdLearner l(n, gamma, {alpha, 0.3, 0.0});
    std::vector<double> td(n, 0.0);
    for (int t = 0; t < 500; ++t) {
      const auto phi = trial % 2 ? gen::binary(rng, n, 1 + gen::index(rng, n)) : gen::weighted(rng, n, 1 + gen::index(rng, n));
      const auto next = gen::weighted(rng, n, gen::index(rng, n + 1));
      const double r = gen::uniform(rng, -1.0, 1.0);
      std::fill(l.mutable_w().begin(), l.mutable_w().end(), 0.0);
      l.step({phi, 0, next, r, 1.0}, 1.0);

      // Independent TD(0): θ ← θ + α(r + γθ⊤φ' − θ⊤φ)φ.
      const auto f = phi.to_dense();
      const auto f2 = next.to_dense();
      double v = 0.0, v2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v += td[i] * f[i];
        v2 += td[i] * f2[i];
      }
      const double step = alpha * (r + gamma * v2 - v);
      for (std::size_t i = 0; i < n; ++i) td[i] += step * f[i];
    }
    for (std::size_t i = 0; i < n; ++i) CHECK(l.theta()[i] == td[i]);
  }
}

TEST_CASE("gtd_step is deterministic") {
  Rng rng(12);
  GtdLearner a(20, 0.9, {0.05, 0.01, 0.7});
  for (int t = 0; t < 50; ++t) {
    const auto phi = gen::binary(rng, 20, 5);
    const auto next = gen::binary(rng, 20, 5);
    a.step({phi, 0, next, gen::uniform(rng), 0.5}, gen::uniform(rng, 0.0, 3.0));
  }
  GtdLearner b = a;
  const auto phi = gen::binary(rng, 20, 5);
  const auto next = gen::binary(rng, 20, 5);
  const auto ra = a.step({phi, 1, next, 0.3, 0.5}, 1.7);
  const auto rb = b.step({phi, 1, next, 0.3, 0.5}, 1.7);
  CHECK(ra.delta == rb.delta);
  CHECK(std::equal(a.theta().begin(), a.theta().end(), b.theta().begin()));
  CHECK(std::equal(a.w().begin(), a.w().end(), b.w().begin()));
}

TEST_CASE("predict examples") {
  Rng rng(1);
  GtdLearner l(6065, 0.5, {});
  const auto phi = gen::binary(rng, 6065, 457);
  CHECK(l.predict(phi) == 0.0);
  std::fill(l.mutable_theta().begin(), l.mutable_theta().end(), 1.0 / 457.0);
  CHECK(l.predict(phi) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("reset_primary") {
  Rng rng(4);
  GtdLearner l(10, 0.5, {0.1, 0.1, 0.5});
  const auto phi = SparseFeatures::binary(10, {2, 5});
  l.step({phi, 0, phi, 1.0, 0.5}, 1.0);
  l.step({phi, 0, phi, 1.0, 0.5}, 1.0);
  const std::vector<double> w(l.w().begin(), l.w().end());
  const std::vector<double> e(l.trace().begin(), l.trace().end());

  l.reset_primary(rng, 0.0, 0.0);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(l.theta()[i] == 0.0);
    CHECK(l.w()[i] == w[i]);
    CHECK(l.trace()[i] == e[i]);
  }
  l.reset_primary(rng, 0.0, 1.0);
  for (double x : l.theta()) CHECK((x >= 0.0 && x <= 1.0));

  GtdLearner a(10, 0.5, {}), b(10, 0.5, {});
  Rng r1(99), r2(99);
  a.reset_primary(r1, 0.0, 1.0);
  b.reset_primary(r2, 0.0, 1.0);
  CHECK(std::equal(a.theta().begin(), a.theta().end(), b.theta().begin()));
  CHECK_THROWS_AS(a.reset_primary(r1, 1.0, 0.0), ConfigError);
}

TEST_CASE("divergence guard flags runaway weights") {
  GtdLearner l(3, 0.99, {50.0, 1.0, 0.0});
  const auto a = SparseFeatures::binary(3, {0});
  const auto b = SparseFeatures::binary(3, {0, 1, 2});
  for (int t = 0; t < 200 && !l.diverged(); ++t) l.step({a, 0, b, 1.0, 0.5}, 3.0);
  CHECK(l.diverged());
}

TEST_CASE("gtd learner rejects bad parameters") {
  CHECK_THROWS_AS(GtdLearner(0, 0.5, {}), ConfigError);
  CHECK_THROWS_AS(GtdLearner(3, 1.5, {}), ConfigError);
  CHECK_THROWS_AS(GtdLearner(3, 0.5, {0.0, 0.1, 0.0}), ConfigError);
  CHECK_THROWS_AS(GtdLearner(3, 0.5, {0.1, 0.1, 1.5}), ConfigError);
  GtdLearner l(3, 0.5, {});
  const auto phi = SparseFeatures::binary(4, {0});
  CHECK_THROWS_AS(l.step({phi, 0, phi, 0.0, 0.5}, 1.0), ConfigError);
}

TEST_CASE("snapshots round-trip") {
  Rng rng(1);
  GtdLearner l(50, 0.5, {});
  for (auto& x : l.mutable_theta()) x = gen::uniform(rng, -1, 1);
  for (auto& x : l.mutable_w()) x = gen::uniform(rng, -1, 1);
  const auto path = std::filesystem::temp_directory_path() / "horde_snapshot_test.weights";
  write_snapshot(path, 42, l);
  CHECK(std::filesystem::file_size(path) == 4 + 4 + 8 + 2 * 50 * 8);
  const auto s = read_snapshot(path);
  CHECK(s.question_id == 42);
  CHECK(std::equal(s.theta.begin(), s.theta.end(), l.theta().begin()));
  CHECK(std::equal(s.w.begin(), s.w.end(), l.w().begin()));
  std::filesystem::resize_file(path, 40);
  CHECK_THROWS_AS(read_snapshot(path), ParseError);
  std::filesystem::remove(path);
}

TEST_CASE("chain: GTD converges to the fixed point computed by direct solve") {
  // Oracle: v_π = (I − P_π)⁻¹ r_π on the five non-terminal states, and with
  // full-rank features θ* = Φ⁻¹ v_π makes the MSPBE exactly zero.
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(5, 5);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(5);
  for (int s = 0; s < 5; ++s) {
    if (s < 4) P(s, s + 1) = 0.95;
    if (s > 0) P(s, s - 1) = 0.05;
  }
  r(4) = 0.95;
  const Eigen::VectorXd v = (Eigen::MatrixXd::Identity(5, 5) - P).lu().solve(r);
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Constant(5, 5, 0.5);
  Phi.diagonal().setZero();
  const Eigen::VectorXd theta_star = Phi.lu().solve(v);

  ExperimentConfig cfg = preset_config("paper-chain");
  cfg.reset = ResetKind::none;
  cfg.sample_mspbe = false;
  cfg.log_interval = 2000;
  const auto result = run_experiment(cfg);
  REQUIRE(result.final_theta.size() == 100);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(5);
  for (const auto& run : result.final_theta) {
    for (int i = 0; i < 5; ++i) {
      CHECK(std::isfinite(run[0][static_cast<std::size_t>(i)]));
      mean(i) += run[0][static_cast<std::size_t>(i)] / 100.0;
    }
  }
  CHECK((mean - theta_star).lpNorm<Eigen::Infinity>() < 0.05);
  CHECK(result.quarantined == 0);
}
