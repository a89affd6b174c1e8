#include "horde/gtd.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "horde/error.hpp"

namespace horde {

GtdLearner::GtdLearner(std::size_t dim, double gamma, GtdParams params)
    : gamma_(gamma),
      params_(params),
      theta_(dim, 0.0),
      w_(dim, 0.0),
      e_(dim, 0.0),
      in_support_(dim, 0) {
  if (dim == 0) throw ConfigError("GTD learner needs a positive feature dimension");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("GTD learner: gamma must lie in [0, 1]");
  if (!(params.alpha_theta > 0.0)) throw ConfigError("GTD learner: alpha_theta must be positive");
  if (!(params.alpha_w > 0.0)) throw ConfigError("GTD learner: alpha_w must be positive");
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) throw ConfigError("GTD learner: lambda must lie in [0, 1]");
  support_.reserve(64);
}

void GtdLearner::clear_trace() {
  for (auto i : support_) {
    e_[i] = 0.0;
    in_support_[i] = 0;
  }
  support_.clear();
}

void GtdLearner::step_unmatched(const SparseFeatures& phi) {
  clear_trace();
  const double phi_w = dot_sparse(w_, phi);
  const double scale = params_.alpha_w * phi_w;
  const auto idx = phi.indices();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double& wi = w_[idx[k]];
    wi -= scale * phi.value(k);
    check_bounds(wi);
  }
}

GtdLearner::StepResult GtdLearner::step(const Transition& tr, double rho) {
  if (tr.phi.dim() != dim() || tr.phi_next.dim() != dim()) throw ConfigError("GTD step: feature dimension mismatch");
  if (!(rho >= 0.0)) throw ConfigError("GTD step: importance ratio must be non-negative");

  const double gamma_next = tr.gamma_next.value_or(gamma_);
  const double delta = tr.reward + gamma_next * dot_sparse(theta_, tr.phi_next) - dot_sparse(theta_, tr.phi);

  if (rho == 0.0) {
    step_unmatched(tr.phi);
    return {delta, 0.0};
  }

  const double phi_w = dot_sparse(w_, tr.phi);

  // e ← ρ(φ + γλe)
  const double decay = rho * gamma_ * params_.lambda;
  if (decay == 0.0) {
    clear_trace();
  } else {
    for (auto i : support_) e_[i] *= decay;
  }
  const auto idx = tr.phi.indices();
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto i = idx[k];
    e_[i] += rho * tr.phi.value(k);
    if (!in_support_[i]) {
      in_support_[i] = 1;
      support_.push_back(i);
    }
  }

  double e_dot_w = 0.0;
  for (auto i : support_) e_dot_w += e_[i] * w_[i];

  const double step_theta = params_.alpha_theta * delta;
  const double step_w = params_.alpha_w * delta;
  for (auto i : support_) {
    theta_[i] += step_theta * e_[i];
    w_[i] += step_w * e_[i];
    check_bounds(theta_[i]);
    check_bounds(w_[i]);
  }

  const double correction = params_.alpha_theta * gamma_next * (1.0 - params_.lambda) * e_dot_w;
  if (correction != 0.0) {
    const auto next = tr.phi_next.indices();
    for (std::size_t k = 0; k < next.size(); ++k) {
      double& th = theta_[next[k]];
      th -= correction * tr.phi_next.value(k);
      check_bounds(th);
    }
  }

  const double decay_w = params_.alpha_w * phi_w;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    double& wi = w_[idx[k]];
    wi -= decay_w * tr.phi.value(k);
    check_bounds(wi);
  }
  if (!std::isfinite(delta)) diverged_ = true;
  return {delta, e_dot_w};
}

void GtdLearner::reset_primary(Rng& rng, double low, double high) {
  if (!(low <= high)) throw ConfigError("reset_primary: low must not exceed high");
  if (low == high) {
    std::fill(theta_.begin(), theta_.end(), low);
    return;
  }
  std::uniform_real_distribution<double> dist(low, high);
  for (auto& x : theta_) x = dist(rng);
}

namespace {

constexpr char snapshot_magic[4] = {'H', 'G', 'V', 'F'};

static_assert(std::endian::native == std::endian::little, "snapshot I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  return value;
}

}  // namespace

void write_snapshot(const std::filesystem::path& path, std::uint32_t question_id, const GtdLearner& learner) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write snapshot " + path.string());
  out.write(snapshot_magic, 4);
  put(out, question_id);
  put(out, static_cast<std::uint64_t>(learner.dim()));
  out.write(reinterpret_cast<const char*>(learner.theta().data()),
            static_cast<std::streamsize>(learner.dim() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(learner.w().data()),
            static_cast<std::streamsize>(learner.dim() * sizeof(double)));
}

WeightSnapshot read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read snapshot " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, snapshot_magic, 4) != 0) throw ParseError("not a weight snapshot", 0);
  WeightSnapshot snap;
  snap.question_id = get<std::uint32_t>(in);
  const auto n = get<std::uint64_t>(in);
  snap.theta.resize(n);
  snap.w.resize(n);
  in.read(reinterpret_cast<char*>(snap.theta.data()), static_cast<std::streamsize>(n * sizeof(double)));
  in.read(reinterpret_cast<char*>(snap.w.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("truncated weight snapshot", 0);
  return snap;
}

}  // namespace horde
