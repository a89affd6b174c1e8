#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace horde {

using FeatureIndex = std::uint32_t;

// Sparse feature vector: the indices of the nonzero components of an
// n-dimensional vector. Tile-coder output is binary (every listed component
// is 1); the chain representation carries explicit values.
class SparseFeatures {
public:
  SparseFeatures() = default;

  static SparseFeatures binary(std::size_t dim, std::vector<FeatureIndex> indices);
  static SparseFeatures weighted(std::size_t dim, std::vector<FeatureIndex> indices,
                                 std::vector<double> values);
  // Zero vector of the given dimension (features of an absorbing state).
  static SparseFeatures zero(std::size_t dim) { return binary(dim, {}); }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return indices_.size(); }
  bool empty() const noexcept { return indices_.empty(); }
  bool is_binary() const noexcept { return values_.empty(); }

  std::span<const FeatureIndex> indices() const noexcept { return indices_; }
  FeatureIndex index(std::size_t k) const noexcept { return indices_[k]; }
  double value(std::size_t k) const noexcept { return values_.empty() ? 1.0 : values_[k]; }

  std::vector<double> to_dense() const;

  friend bool operator==(const SparseFeatures&, const SparseFeatures&) = default;

private:
  std::size_t dim_ = 0;
  std::vector<FeatureIndex> indices_;
  std::vector<double> values_;
};

// Dense weight vector (θ, w, e) sharing the feature dimension.
using DenseWeights = std::vector<double>;

// Sum of w_i * φ_i over the active components of φ.
double dot_sparse(std::span<const double> weights, const SparseFeatures& feats);

// w += scale * φ
void axpy_sparse(double scale, const SparseFeatures& feats, std::span<double> weights);

struct InputRange {
  double min = 0.0;
  double max = 1.0;
};

// A block of tilings over one input or a pair of inputs.
struct TilingGroup {
  std::vector<std::size_t> inputs;  // size 1 or 2
  std::size_t tilings = 1;
  std::size_t tiles = 1;            // per dimension

  std::size_t block_size() const noexcept;
};

struct TileCoderConfig {
  std::vector<InputRange> ranges;  // one per raw input
  std::vector<TilingGroup> groups;
  bool include_bias = true;

  std::size_t dimension() const noexcept;
  std::size_t active_count() const noexcept;
  // Throws ConfigError describing the first structural problem.
  void validate() const;
};

// Tile coder over a validated configuration. Groups occupy consecutive index
// blocks in declaration order; the bias feature, when enabled, is the last
// index (n - 1).
class TileCoder {
public:
  explicit TileCoder(TileCoderConfig cfg);

  const TileCoderConfig& config() const noexcept { return cfg_; }
  std::size_t dimension() const noexcept { return dim_; }
  std::size_t active_count() const noexcept { return active_; }

  SparseFeatures encode(std::span<const double> obs) const;

private:
  TileCoderConfig cfg_;
  std::vector<std::size_t> offsets_;
  std::size_t dim_;
  std::size_t active_;
};

inline SparseFeatures tile_code(std::span<const double> obs, const TileCoder& coder) {
  return coder.encode(obs);
}

// Layout over `sensors` inputs in [0, 1] that yields 6065 features with 457
// active (456 tilings plus bias) when sensors == 53:
//   - every sensor: 4 tilings of 10 tiles
//   - 60 sensor pairs: 4 tilings of 4x4 tiles
//   - sensor 0 again at fine resolution: 4 tilings of 26 tiles
TileCoderConfig robot_tile_layout(std::size_t sensors = 53);

// Single-sensor tilings only (4 tilings of 10 tiles each, plus bias).
TileCoderConfig compact_tile_layout(std::size_t sensors = 53);

enum class ChainRepresentation { inverted, tabular };

inline constexpr std::size_t chain_feature_count = 5;

// Features of non-terminal chain state `state_index` in [0, 5). The inverted
// representation puts 0 at the state's own component and 1/2 elsewhere.
SparseFeatures chain_features(std::size_t state_index,
                              ChainRepresentation repr = ChainRepresentation::inverted);

}  // namespace horde
