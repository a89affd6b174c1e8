#include "horde/features.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "horde/error.hpp"

namespace horde {

SparseFeatures SparseFeatures::binary(std::size_t dim, std::vector<FeatureIndex> indices) {
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim) {
      throw ConfigError("feature index " + std::to_string(indices[k]) + " out of range " + std::to_string(dim));
    }
    if (k > 0 && indices[k] <= indices[k - 1]) throw ConfigError("feature indices must be strictly ascending");
  }
  SparseFeatures f;
  f.dim_ = dim;
  f.indices_ = std::move(indices);
  return f;
}

SparseFeatures SparseFeatures::weighted(std::size_t dim, std::vector<FeatureIndex> indices,
                                        std::vector<double> values) {
  if (indices.size() != values.size()) throw ConfigError("feature indices and values differ in length");
  SparseFeatures f = binary(dim, std::move(indices));
  f.values_ = std::move(values);
  return f;
}

std::vector<double> SparseFeatures::to_dense() const {
  std::vector<double> out(dim_, 0.0);
  for (std::size_t k = 0; k < indices_.size(); ++k) out[indices_[k]] += value(k);
  return out;
}

double dot_sparse(std::span<const double> weights, const SparseFeatures& feats) {
  if (weights.size() != feats.dim()) throw ConfigError("dot_sparse: dimension mismatch");
  double sum = 0.0;
  const auto idx = feats.indices();
  if (feats.is_binary()) {
    for (auto i : idx) sum += weights[i];
  } else {
    for (std::size_t k = 0; k < idx.size(); ++k) sum += weights[idx[k]] * feats.value(k);
  }
  return sum;
}

void axpy_sparse(double scale, const SparseFeatures& feats, std::span<double> weights) {
  const auto idx = feats.indices();
  for (std::size_t k = 0; k < idx.size(); ++k) weights[idx[k]] += scale * feats.value(k);
}

std::size_t TilingGroup::block_size() const noexcept {
  std::size_t cells = 1;
  for (std::size_t d = 0; d < inputs.size(); ++d) cells *= tiles;
  return tilings * cells;
}

std::size_t TileCoderConfig::dimension() const noexcept {
  std::size_t n = include_bias ? 1 : 0;
  for (const auto& g : groups) n += g.block_size();
  return n;
}

std::size_t TileCoderConfig::active_count() const noexcept {
  std::size_t k = include_bias ? 1 : 0;
  for (const auto& g : groups) k += g.tilings;
  return k;
}

void TileCoderConfig::validate() const {
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    if (!(ranges[i].max > ranges[i].min)) {
      throw ConfigError("tile coder: input " + std::to_string(i) + " has an empty range");
    }
  }
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& grp = groups[g];
    const std::string where = "tile coder group " + std::to_string(g);
    if (grp.inputs.empty() || grp.inputs.size() > 2) throw ConfigError(where + ": needs 1 or 2 inputs");
    if (grp.tilings < 1) throw ConfigError(where + ": needs at least one tiling");
    if (grp.tiles < 1) throw ConfigError(where + ": needs at least one tile");
    for (auto in : grp.inputs) {
      if (in >= ranges.size()) throw ConfigError(where + ": input " + std::to_string(in) + " out of range");
    }
  }
  if (dimension() == 0) throw ConfigError("tile coder: zero-dimensional feature space");
}

TileCoder::TileCoder(TileCoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t off = 0;
  offsets_.reserve(cfg_.groups.size());
  for (const auto& g : cfg_.groups) {
    offsets_.push_back(off);
    off += g.block_size();
  }
  dim_ = cfg_.dimension();
  active_ = cfg_.active_count();
}

SparseFeatures TileCoder::encode(std::span<const double> obs) const {
  if (obs.size() != cfg_.ranges.size()) {
    throw ConfigError("tile_code: observation has " + std::to_string(obs.size()) + " inputs, config expects " +
                      std::to_string(cfg_.ranges.size()));
  }
  std::vector<double> unit(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (std::isnan(obs[i])) throw InputError("tile_code: NaN at input " + std::to_string(i));
    const auto& r = cfg_.ranges[i];
    unit[i] = std::clamp((obs[i] - r.min) / (r.max - r.min), 0.0, 1.0);
  }

  std::vector<FeatureIndex> active;
  active.reserve(active_);
  for (std::size_t g = 0; g < cfg_.groups.size(); ++g) {
    const auto& grp = cfg_.groups[g];
    const auto tiles = static_cast<long>(grp.tiles);
    const std::size_t cells = grp.block_size() / grp.tilings;
    for (std::size_t t = 0; t < grp.tilings; ++t) {
      const double shift = static_cast<double>(t) / static_cast<double>(grp.tilings);
      std::size_t cell = 0;
      std::size_t stride = 1;
      for (auto in : grp.inputs) {
        long c = static_cast<long>(std::floor(unit[in] * static_cast<double>(tiles) + shift));
        c = std::clamp(c, 0L, tiles - 1);
        cell += static_cast<std::size_t>(c) * stride;
        stride *= grp.tiles;
      }
      active.push_back(static_cast<FeatureIndex>(offsets_[g] + t * cells + cell));
    }
  }
  if (cfg_.include_bias) active.push_back(static_cast<FeatureIndex>(dim_ - 1));
  return SparseFeatures::binary(dim_, std::move(active));
}

namespace {

TileCoderConfig unit_ranges(std::size_t sensors) {
  TileCoderConfig cfg;
  cfg.ranges.assign(sensors, InputRange{0.0, 1.0});
  return cfg;
}

}  // namespace

TileCoderConfig robot_tile_layout(std::size_t sensors) {
  if (sensors < 2) throw ConfigError("robot_tile_layout needs at least two sensors");
  auto cfg = unit_ranges(sensors);
  for (std::size_t s = 0; s < sensors; ++s) cfg.groups.push_back({{s}, 4, 10});
  // Neighbouring pairs first, then pairs half-way around the sensor list.
  std::size_t pairs = 0;
  for (std::size_t s = 0; s < sensors && pairs < 60; ++s, ++pairs) {
    cfg.groups.push_back({{s, (s + 1) % sensors}, 4, 4});
  }
  for (std::size_t s = 0; pairs < 60; ++s, ++pairs) {
    cfg.groups.push_back({{s % sensors, (s + sensors / 2) % sensors}, 4, 4});
  }
  cfg.groups.push_back({{0}, 4, 26});
  return cfg;
}

TileCoderConfig compact_tile_layout(std::size_t sensors) {
  auto cfg = unit_ranges(sensors);
  for (std::size_t s = 0; s < sensors; ++s) cfg.groups.push_back({{s}, 4, 10});
  return cfg;
}

SparseFeatures chain_features(std::size_t state_index, ChainRepresentation repr) {
  if (state_index >= chain_feature_count) {
    throw ConfigError("chain_features: state " + std::to_string(state_index) + " is not a non-terminal state");
  }
  if (repr == ChainRepresentation::tabular) {
    return SparseFeatures::binary(chain_feature_count, {static_cast<FeatureIndex>(state_index)});
  }
  std::vector<FeatureIndex> idx;
  std::vector<double> val;
  for (std::size_t i = 0; i < chain_feature_count; ++i) {
    if (i == state_index) continue;
    idx.push_back(static_cast<FeatureIndex>(i));
    val.push_back(0.5);
  }
  return SparseFeatures::weighted(chain_feature_count, std::move(idx), std::move(val));
}

}  // namespace horde
