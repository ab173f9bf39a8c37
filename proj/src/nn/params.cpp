// SPDX-License-Identifier: Apache-2.0
#include "paragate/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "paragate/nn/kernels.hpp"

namespace paragate::nn {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw NnError(NnErrorKind::ShapeMismatch, what);
}

}  // namespace

void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols, "matmul shape mismatch");
  if (a.rows == 0 || b.cols == 0 || a.cols == 0) return;
  kernels::gemm_nn(a.rows, b.cols, a.cols, a.data.data(), a.cols, b.data.data(), b.cols, c.data.data(), c.cols);
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) t.data[j * a.rows + i] = a.data[i * a.cols + j];
  }
  return t;
}

void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols, "matmul_tn shape mismatch");
  matmul_acc(transpose(a), b, c);
}

void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows, "matmul_nt shape mismatch");
  matmul_acc(a, transpose(b), c);
}

const char* group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::Embed:
      return "embed";
    case ParamGroup::Aggregator:
      return "aggregator";
    case ParamGroup::Gru:
      return "gru";
    case ParamGroup::Readout:
      return "readout";
  }
  return "?";
}

bool FreezeMask::frozen(ParamGroup g) const {
  switch (g) {
    case ParamGroup::Embed:
      return embed;
    case ParamGroup::Aggregator:
      return aggregator;
    case ParamGroup::Gru:
      return gru;
    case ParamGroup::Readout:
      return readout;
  }
  return false;
}

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.latent = 32;
  c.hidden = 64;
  c.layers = 4;
  c.lr = 3e-3;
  c.epochs = 30;
  c.batch = 4;
  c.subgraph_size = 1024;
  return c;
}

void TrainConfig::validate() const {
  auto bad = [](const std::string& w) { throw NnError(NnErrorKind::BadConfig, w); };
  if (node_dim == 0 || edge_dim == 0) bad("feature widths must be positive");
  if (latent == 0 || hidden == 0) bad("latent and hidden widths must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) bad("learning rate must be finite and non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(eps > 0.0)) bad("bad Adam moments");
  if (batch == 0) bad("batch must be at least 1");
  if (subgraph_size < 32) bad("subgraph size must be at least 32");
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"node_dim", c.node_dim}, {"edge_dim", c.edge_dim}, {"latent", c.latent},
          {"hidden", c.hidden},     {"layers", c.layers},     {"shared", c.shared},
          {"bidirectional", c.bidirectional}, {"lr", c.lr}, {"beta1", c.beta1},
          {"beta2", c.beta2},       {"eps", c.eps},           {"epochs", c.epochs},
          {"batch", c.batch},       {"subgraph_size", c.subgraph_size},
          {"patience", c.patience}, {"seed", c.seed}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.node_dim = j.at("node_dim").get<std::size_t>();
  c.edge_dim = j.at("edge_dim").get<std::size_t>();
  c.latent = j.at("latent").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::size_t>();
  c.layers = j.at("layers").get<std::size_t>();
  c.shared = j.at("shared").get<bool>();
  c.bidirectional = j.at("bidirectional").get<bool>();
  c.lr = j.at("lr").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.eps = j.at("eps").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.batch = j.at("batch").get<std::size_t>();
  c.subgraph_size = j.at("subgraph_size").get<std::size_t>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

std::size_t ParamSet::add(const std::string& name, ParamGroup g, std::size_t r, std::size_t c) {
  Tensor t;
  t.name = name;
  t.group = g;
  t.value.resize(r, c);
  t.grad.resize(r, c);
  t.m.resize(r, c);
  t.v.resize(r, c);
  t_.push_back(std::move(t));
  return t_.size() - 1;
}

ParamSet::ParamSet(const TrainConfig& cfg) : cfg_(cfg) {
  cfg.validate();
  const std::size_t F = cfg.node_dim, E = cfg.edge_dim, D = cfg.latent, H = cfg.hidden;
  embed_w = add("embed.W", ParamGroup::Embed, F, D);
  embed_b = add("embed.b", ParamGroup::Embed, 1, D);
  const std::size_t copies = cfg.shared ? 1 : cfg.layers;
  for (std::size_t k = 0; k < copies; ++k) {
    const std::string p = cfg.shared ? "" : "layer" + std::to_string(k) + ".";
    LayerSlots s{};
    s.wq = add(p + "agg.Wq", ParamGroup::Aggregator, D, D);
    s.wk = add(p + "agg.Wk", ParamGroup::Aggregator, D, D);
    s.wv = add(p + "agg.Wv", ParamGroup::Aggregator, D, D);
    s.we = add(p + "agg.We", ParamGroup::Aggregator, E, D);
    s.wi = add(p + "gru.Wi", ParamGroup::Gru, D, 3 * D);
    s.bi = add(p + "gru.bi", ParamGroup::Gru, 1, 3 * D);
    s.wh = add(p + "gru.Wh", ParamGroup::Gru, D, 3 * D);
    s.bh = add(p + "gru.bh", ParamGroup::Gru, 1, 3 * D);
    layer.push_back(s);
  }
  w1 = add("mlp.W1", ParamGroup::Readout, D, H);
  b1 = add("mlp.b1", ParamGroup::Readout, 1, H);
  w2 = add("mlp.W2", ParamGroup::Readout, H, H);
  b2 = add("mlp.b2", ParamGroup::Readout, 1, H);
  w3 = add("mlp.W3", ParamGroup::Readout, H, 1);
  b3 = add("mlp.b3", ParamGroup::Readout, 1, 1);

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)); biases share their weight's fan-in.
  std::mt19937_64 rng(cfg.seed);
  auto fill = [&](std::size_t slot, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& x : t_[slot].value.data) x = u(rng);
  };
  fill(embed_w, F);
  fill(embed_b, F);
  for (const auto& s : layer) {
    fill(s.wq, D);
    fill(s.wk, D);
    fill(s.wv, D);
    fill(s.we, E);
    fill(s.wi, D);
    fill(s.bi, D);
    fill(s.wh, D);
    fill(s.bh, D);
  }
  fill(w1, D);
  fill(b1, D);
  fill(w2, H);
  fill(b2, H);
  fill(w3, H);
  fill(b3, H);
}

const Tensor* ParamSet::find(const std::string& name) const {
  for (const auto& t : t_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

Tensor* ParamSet::find(const std::string& name) {
  for (auto& t : t_) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void ParamSet::zero_grad() {
  for (auto& t : t_) t.grad.zero();
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& t : t_) n += t.value.data.size();
  return n;
}

std::uint64_t ParamSet::group_hash(ParamGroup group) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& t : t_) {
    if (t.group != group) continue;
    mix(t.name.data(), t.name.size());
    mix(t.value.data.data(), t.value.data.size() * sizeof(double));
  }
  return h;
}

bool ParamSet::all_finite() const {
  for (const auto& t : t_) {
    for (double x : t.value.data) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

void Adam::step(ParamSet& p, const FreezeMask& mask) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (auto& t : p.tensors()) {
    if (mask.frozen(t.group)) continue;
    for (std::size_t i = 0; i < t.value.data.size(); ++i) {
      const double g = t.grad.data[i];
      double& m = t.m.data[i];
      double& v = t.v.data[i];
      m = b1_ * m + (1.0 - b1_) * g;
      v = b2_ * v + (1.0 - b2_) * g * g;
      t.value.data[i] -= lr_ * (m / c1) / (std::sqrt(v / c2) + eps_);
    }
  }
}

namespace {

template <class T>
void put(std::string& out, T v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_str(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Cursor {
 public:
  explicit Cursor(const std::string& b) : b_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void doubles(double* dst, std::size_t n) {
    need(n * sizeof(double));
    std::memcpy(dst, b_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  [[nodiscard]] bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > b_.size() - pos_) throw NnError(NnErrorKind::CheckpointFormat, "checkpoint truncated");
  }
  const std::string& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const Checkpoint& c) {
  std::string out = "PGCK";
  put<std::uint32_t>(out, kCheckpointVersion);
  put_str(out, c.task);
  auto meta = c.meta;
  meta["config"] = to_json(c.params.config());
  put_str(out, meta.dump());
  const auto& ts = c.params.tensors();
  put<std::uint64_t>(out, ts.size());
  for (const auto& t : ts) {
    put_str(out, t.name);
    put<std::uint64_t>(out, t.value.rows);
    put<std::uint64_t>(out, t.value.cols);
    out.append(reinterpret_cast<const char*>(t.value.data.data()), t.value.data.size() * sizeof(double));
  }
  return out;
}

Checkpoint checkpoint_from_bytes(const std::string& bytes) {
  if (bytes.size() < 8 || bytes.compare(0, 4, "PGCK") != 0) {
    throw NnError(NnErrorKind::CheckpointFormat, "not a checkpoint (bad magic)");
  }
  Cursor cur(bytes);
  cur.get<std::uint32_t>();  // magic
  const auto version = cur.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw NnError(NnErrorKind::CheckpointFormat, "unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.task = cur.str();
  try {
    const std::string text = cur.str();
    c.params = ParamSet(config_from_json(nlohmann::json::parse(text).at("config")));
    c.meta = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw NnError(NnErrorKind::CheckpointFormat, std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto n = cur.get<std::uint64_t>();
  if (n != c.params.tensors().size()) throw NnError(NnErrorKind::CheckpointFormat, "tensor count mismatch");
  for (auto& t : c.params.tensors()) {
    const auto name = cur.str();
    const auto r = cur.get<std::uint64_t>();
    const auto k = cur.get<std::uint64_t>();
    if (name != t.name || r != t.value.rows || k != t.value.cols) {
      throw NnError(NnErrorKind::CheckpointFormat, "tensor '" + name + "' does not match the configured layout");
    }
    cur.doubles(t.value.data.data(), t.value.data.size());
  }
  if (!cur.done()) throw NnError(NnErrorKind::CheckpointFormat, "trailing bytes after tensors");
  return c;
}

void write_checkpoint(const std::string& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  const auto b = checkpoint_bytes(c);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
  if (!out) throw NnError(NnErrorKind::CheckpointFormat, "cannot write " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NnError(NnErrorKind::CheckpointFormat, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_bytes(ss.str());
}

}  // namespace paragate::nn
