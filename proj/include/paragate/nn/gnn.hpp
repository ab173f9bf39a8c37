// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "paragate/nn/params.hpp"

namespace paragate::nn {

/// Incoming message edges grouped by destination (CSR).
struct MessageGraph {
  std::size_t num_nodes = 0;
  std::vector<std::uint32_t> row_ptr;  // num_nodes + 1
  std::vector<std::uint32_t> src;      // source node per message edge
  Matrix feat;                         // message edge features, one row per edge
  [[nodiscard]] std::size_t num_edges() const { return src.size(); }
  [[nodiscard]] std::size_t edge_dim() const { return feat.cols; }
};

/// Groups directed edges by destination, keeping input order within a group.
/// With `bidirectional`, each edge also yields its reverse and a trailing
/// feature column marks reversed edges.
MessageGraph make_message_graph(std::size_t num_nodes, const std::vector<std::uint32_t>& src,
                                const std::vector<std::uint32_t>& dst, const Matrix& edge_feat, bool bidirectional);

struct AggCache {
  Matrix q, k, v;
  Matrix qe;                  // q * We^T, one row per node
  std::vector<double> alpha;  // per message edge
  Matrix ebar;                // attention-weighted edge features per node
};

/// alpha_t = softmax over in-edges of q_i . (k_j + e_t We); msg_i = sum alpha_t (v_j + e_t We).
/// Nodes without in-edges get a zero message.
Matrix aggregate(const Matrix& h, const MessageGraph& g, const ParamSet& p, const LayerSlots& s, AggCache* cache);
/// Accumulates into dh and, unless `frozen`, into the aggregator gradients.
void aggregate_backward(const Matrix& h, const MessageGraph& g, ParamSet& p, const LayerSlots& s, const AggCache& c,
                        const Matrix& dmsg, Matrix& dh, bool frozen);

struct GruCache {
  Matrix r, z, n;
  Matrix hn;  // h Wh_n + bh_n
};

/// r = sig(x Wi_r + bi_r + h Wh_r + bh_r), z likewise,
/// n = tanh(x Wi_n + bi_n + r * (h Wh_n + bh_n)), h' = (1 - z) n + z h, with x = msg.
Matrix gru_update(const Matrix& h, const Matrix& msg, const ParamSet& p, const LayerSlots& s, GruCache* cache);
/// dh accumulates; dmsg is overwritten.
void gru_backward(const Matrix& h, const Matrix& msg, ParamSet& p, const LayerSlots& s, const GruCache& c,
                  const Matrix& dnew, Matrix& dh, Matrix& dmsg, bool frozen);

struct ReadoutCache {
  Matrix in, z1, a1, z2, a2;
};
/// D -> H -> H -> 1 with ReLU, applied to each row of `h`.
std::vector<double> readout(const Matrix& h, const ParamSet& p, ReadoutCache* cache);
/// Gradient w.r.t. the readout input. Parameter gradients accumulate unless frozen.
Matrix readout_backward(ParamSet& p, const ReadoutCache& c, const std::vector<double>& dy, bool frozen);
/// Gradient w.r.t. the readout input only.
Matrix readout_input_grad(const ParamSet& p, const ReadoutCache& c, const std::vector<double>& dy);

struct Tape {
  Matrix x;
  std::vector<Matrix> h;  // h[0] embed .. h[K]
  std::vector<Matrix> msg;
  std::vector<AggCache> agg;
  std::vector<GruCache> gru;
  std::vector<std::uint32_t> rows;
  ReadoutCache head;
};

/// Embed, K rounds of aggregate + GRU over all nodes, readout on `rows`.
/// The tape is filled only when given.
std::vector<double> forward(const ParamSet& p, const Matrix& x, const MessageGraph& g,
                            const std::vector<std::uint32_t>& rows, Tape* tape);
/// Final-layer node embeddings only (no readout).
Matrix embed_and_propagate(const ParamSet& p, const Matrix& x, const MessageGraph& g);

/// Accumulates parameter gradients for output gradients `dy` (one per row).
/// Frozen groups receive no gradient.
void backward(ParamSet& p, const MessageGraph& g, const Tape& tape, const std::vector<double>& dy,
              const FreezeMask& mask = {});

/// Mean squared error over `pred` vs `target`, and its gradient.
double mse(const std::vector<double>& pred, const std::vector<double>& target, std::vector<double>* grad);

}  // namespace paragate::nn
