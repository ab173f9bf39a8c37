// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "paragate/common/error.hpp"

namespace paragate::nn {

enum class NnErrorKind { ShapeMismatch, BadConfig, CheckpointFormat };
using NnError = KindedError<NnErrorKind>;

/// Row-major dense matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double* row(std::size_t i) { return data.data() + i * cols; }
  [[nodiscard]] const double* row(std::size_t i) const { return data.data() + i * cols; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  [[nodiscard]] double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.assign(r * c, 0.0);
  }
  bool operator==(const Matrix&) const = default;
};

/// C += A * B
void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c);
/// C += A^T * B
void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c);
/// C += A * B^T
void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c);
Matrix transpose(const Matrix& a);

enum class ParamGroup : std::uint8_t { Embed, Aggregator, Gru, Readout };
const char* group_name(ParamGroup g);

struct Tensor {
  std::string name;
  ParamGroup group = ParamGroup::Readout;
  Matrix value;
  Matrix grad;
  Matrix m;  // Adam first moment
  Matrix v;  // Adam second moment
};

/// Which groups an optimizer step (and backward) may touch.
struct FreezeMask {
  bool embed = false;
  bool aggregator = false;
  bool gru = false;
  bool readout = false;
  [[nodiscard]] bool frozen(ParamGroup g) const;
  static FreezeMask none() { return {}; }
  /// Attention projections and the input embedding stay fixed.
  static FreezeMask aggregator_and_embed() { return {true, true, false, false}; }
};

struct TrainConfig {
  std::size_t node_dim = 0;   // F, input features per node
  std::size_t edge_dim = 0;   // E, features per message edge
  std::size_t latent = 128;   // D
  std::size_t hidden = 256;   // H
  std::size_t layers = 8;     // K
  bool shared = true;         // one aggregator/GRU for all layers
  bool bidirectional = true;  // messages also flow sink -> driver
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 50;
  std::size_t batch = 8;           // subgraphs per optimizer step
  std::size_t subgraph_size = 2048;
  std::size_t patience = 10;
  std::uint64_t seed = 1;

  /// Small widths for single-core runs.
  static TrainConfig desk();
  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::ordered_json to_json(const TrainConfig& c);
TrainConfig config_from_json(const nlohmann::json& j);

/// Parameters of one layer's aggregator + GRU.
struct LayerSlots {
  std::size_t wq, wk, wv, we;
  std::size_t wi, bi, wh, bh;  // GRU, gate blocks ordered r, z, n
};

/// All learnable tensors, addressed by slot index.
class ParamSet {
 public:
  ParamSet() = default;
  /// Fan-in scaled uniform init from `cfg.seed`.
  explicit ParamSet(const TrainConfig& cfg);

  [[nodiscard]] const TrainConfig& config() const { return cfg_; }
  std::vector<Tensor>& tensors() { return t_; }
  [[nodiscard]] const std::vector<Tensor>& tensors() const { return t_; }
  Tensor& at(std::size_t slot) { return t_[slot]; }
  [[nodiscard]] const Tensor& at(std::size_t slot) const { return t_[slot]; }
  [[nodiscard]] const Tensor* find(const std::string& name) const;
  Tensor* find(const std::string& name);

  std::size_t embed_w = 0, embed_b = 0;
  std::vector<LayerSlots> layer;  // one entry when shared
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, w3 = 0, b3 = 0;

  [[nodiscard]] const LayerSlots& layer_for(std::size_t k) const { return layer[cfg_.shared ? 0 : k]; }
  void zero_grad();
  [[nodiscard]] std::size_t count() const;
  /// FNV-1a over the value bytes of every tensor in `group`.
  [[nodiscard]] std::uint64_t group_hash(ParamGroup group) const;
  [[nodiscard]] bool all_finite() const;

 private:
  std::size_t add(const std::string& name, ParamGroup g, std::size_t r, std::size_t c);
  TrainConfig cfg_;
  std::vector<Tensor> t_;
};

class Adam {
 public:
  explicit Adam(const TrainConfig& cfg) : lr_(cfg.lr), b1_(cfg.beta1), b2_(cfg.beta2), eps_(cfg.eps) {}
  /// One update from the populated gradients; frozen groups are untouched.
  void step(ParamSet& p, const FreezeMask& mask);
  [[nodiscard]] std::uint64_t steps() const { return t_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_, b1_, b2_, eps_;
  std::uint64_t t_ = 0;
};

/// Binary checkpoint: magic "PGCK", version, task tag, JSON metadata
/// (config, schema, extras), then named tensors. Optimizer state is not kept.
struct Checkpoint {
  std::string task;
  nlohmann::ordered_json meta;  // "config" is filled on write
  ParamSet params;
};
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string checkpoint_bytes(const Checkpoint& c);
Checkpoint checkpoint_from_bytes(const std::string& bytes);
void write_checkpoint(const std::string& path, const Checkpoint& c);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace paragate::nn
