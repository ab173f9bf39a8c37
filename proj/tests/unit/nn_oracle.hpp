// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "paragate/nn/gnn.hpp"

// Loop-level reference evaluation of the network, no kernels.
namespace testutil {

using paragate::nn::LayerSlots;
using paragate::nn::Matrix;
using paragate::nn::MessageGraph;
using paragate::nn::ParamSet;

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Matrix naive_mul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

// Dense attention: scores over all (i, t) pairs with t an edge into i.
inline Matrix naive_aggregate(const Matrix& h, const MessageGraph& g, const ParamSet& p, const LayerSlots& s,
                       std::vector<double>* alpha_out) {
  const Matrix q = naive_mul(h, p.at(s.wq).value);
  const Matrix k = naive_mul(h, p.at(s.wk).value);
  const Matrix v = naive_mul(h, p.at(s.wv).value);
  const Matrix ew = naive_mul(g.feat, p.at(s.we).value);  // per edge, D wide
  const std::size_t D = h.cols;
  Matrix msg(h.rows, D);
  std::vector<double> alpha(g.num_edges(), 0.0);
  for (std::size_t i = 0; i < h.rows; ++i) {
    std::vector<std::size_t> in;
    for (std::size_t t = 0; t < g.num_edges(); ++t) {
      const bool into = t >= g.row_ptr[i] && t < g.row_ptr[i + 1];
      if (into) in.push_back(t);
    }
    if (in.empty()) continue;
    std::vector<double> sc;
    for (auto t : in) {
      double d = 0.0;
      for (std::size_t c = 0; c < D; ++c) d += q(i, c) * (k(g.src[t], c) + ew(t, c));
      sc.push_back(d);
    }
    const double mx = *std::max_element(sc.begin(), sc.end());
    double z = 0.0;
    for (auto& v2 : sc) z += (v2 = std::exp(v2 - mx));
    for (std::size_t u = 0; u < in.size(); ++u) {
      const double a = sc[u] / z;
      alpha[in[u]] = a;
      for (std::size_t c = 0; c < D; ++c) msg(i, c) += a * (v(g.src[in[u]], c) + ew(in[u], c));
    }
  }
  if (alpha_out) *alpha_out = alpha;
  return msg;
}

inline Matrix naive_gru(const Matrix& h, const Matrix& x, const ParamSet& p, const LayerSlots& s) {
  const std::size_t D = h.cols;
  const Matrix gi = naive_mul(x, p.at(s.wi).value);
  const Matrix gh = naive_mul(h, p.at(s.wh).value);
  const auto& bi = p.at(s.bi).value;
  const auto& bh = p.at(s.bh).value;
  Matrix out(h.rows, D);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t d = 0; d < D; ++d) {
      const double r = sigmoid(gi(i, d) + bi(0, d) + gh(i, d) + bh(0, d));
      const double z = sigmoid(gi(i, D + d) + bi(0, D + d) + gh(i, D + d) + bh(0, D + d));
      const double n = std::tanh(gi(i, 2 * D + d) + bi(0, 2 * D + d) + r * (gh(i, 2 * D + d) + bh(0, 2 * D + d)));
      out(i, d) = (1.0 - z) * n + z * h(i, d);
    }
  return out;
}

inline std::vector<double> naive_readout(const Matrix& h, const ParamSet& p) {
  auto layer = [&](const Matrix& in, std::size_t w, std::size_t b, bool relu) {
    Matrix z = naive_mul(in, p.at(w).value);
    for (std::size_t i = 0; i < z.rows; ++i)
      for (std::size_t j = 0; j < z.cols; ++j) {
        z(i, j) += p.at(b).value(0, j);
        if (relu) z(i, j) = std::max(z(i, j), 0.0);
      }
    return z;
  };
  return layer(layer(layer(h, p.w1, p.b1, true), p.w2, p.b2, true), p.w3, p.b3, false).data;
}

inline Matrix naive_embed(const Matrix& x, const ParamSet& p) {
  Matrix h = naive_mul(x, p.at(p.embed_w).value);
  for (std::size_t i = 0; i < h.rows; ++i)
    for (std::size_t j = 0; j < h.cols; ++j) h(i, j) += p.at(p.embed_b).value(0, j);
  return h;
}

inline std::vector<double> naive_forward(const ParamSet& p, const Matrix& x, const MessageGraph& g,
                                  const std::vector<std::uint32_t>& rows) {
  Matrix h = naive_embed(x, p);
  for (std::size_t k = 0; k < p.config().layers; ++k) {
    const auto& s = p.layer_for(k);
    h = naive_gru(h, naive_aggregate(h, g, p, s, nullptr), p, s);
  }
  Matrix sel(rows.size(), h.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(h.row(rows[r]), h.cols, sel.row(r));
  return naive_readout(sel, p);
}

}  // namespace testutil
