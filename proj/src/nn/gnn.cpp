// SPDX-License-Identifier: Apache-2.0
#include "paragate/nn/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "paragate/nn/kernels.hpp"

namespace paragate::nn {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void add_row_bias(Matrix& m, const Matrix& b) {
  for (std::size_t i = 0; i < m.rows; ++i) kernels::axpy(m.cols, 1.0, b.data.data(), m.row(i));
}

void col_sum_acc(const Matrix& m, Matrix& out) {
  for (std::size_t i = 0; i < m.rows; ++i) kernels::axpy(m.cols, 1.0, m.row(i), out.data.data());
}

void check_shape(bool ok, const char* what) {
  if (!ok) throw NnError(NnErrorKind::ShapeMismatch, what);
}

}  // namespace

MessageGraph make_message_graph(std::size_t num_nodes, const std::vector<std::uint32_t>& src,
                                const std::vector<std::uint32_t>& dst, const Matrix& edge_feat, bool bidirectional) {
  check_shape(src.size() == dst.size() && edge_feat.rows == src.size(), "edge arrays disagree");
  const std::size_t m = src.size();
  const std::size_t in_dim = edge_feat.cols;
  const std::size_t out_dim = in_dim + (bidirectional ? 1 : 0);
  struct Item {
    std::uint32_t from, to, edge;
    bool reversed;
  };
  std::vector<Item> items;
  items.reserve(bidirectional ? 2 * m : m);
  for (std::uint32_t k = 0; k < m; ++k) {
    check_shape(src[k] < num_nodes && dst[k] < num_nodes, "edge endpoint out of range");
    items.push_back({src[k], dst[k], k, false});
    if (bidirectional) items.push_back({dst[k], src[k], k, true});
  }
  std::stable_sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.to < b.to; });
  MessageGraph g;
  g.num_nodes = num_nodes;
  g.row_ptr.assign(num_nodes + 1, 0);
  g.src.resize(items.size());
  g.feat.resize(items.size(), out_dim);
  for (std::size_t t = 0; t < items.size(); ++t) {
    const auto& it = items[t];
    ++g.row_ptr[it.to + 1];
    g.src[t] = it.from;
    std::copy_n(edge_feat.row(it.edge), in_dim, g.feat.row(t));
    if (bidirectional) g.feat(t, in_dim) = it.reversed ? 1.0 : 0.0;
  }
  for (std::size_t i = 0; i < num_nodes; ++i) g.row_ptr[i + 1] += g.row_ptr[i];
  return g;
}

Matrix aggregate(const Matrix& h, const MessageGraph& g, const ParamSet& p, const LayerSlots& s, AggCache* cache) {
  const std::size_t N = h.rows, D = h.cols, E = g.edge_dim();
  const Matrix& Wq = p.at(s.wq).value;
  const Matrix& Wk = p.at(s.wk).value;
  const Matrix& Wv = p.at(s.wv).value;
  const Matrix& We = p.at(s.we).value;
  check_shape(N == g.num_nodes && D == Wq.rows && E == We.rows, "aggregate: shape mismatch");

  AggCache local;
  AggCache& c = cache ? *cache : local;
  c.q.resize(N, D);
  c.k.resize(N, D);
  c.v.resize(N, D);
  matmul_acc(h, Wq, c.q);
  matmul_acc(h, Wk, c.k);
  matmul_acc(h, Wv, c.v);
  c.qe.resize(N, E);
  matmul_nt_acc(c.q, We, c.qe);
  c.alpha.assign(g.num_edges(), 0.0);
  c.ebar.resize(N, E);

  Matrix msg(N, D);
  for (std::size_t i = 0; i < N; ++i) {
    const std::uint32_t lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
    if (lo == hi) continue;
    double smax = -std::numeric_limits<double>::infinity();
    for (std::uint32_t t = lo; t < hi; ++t) {
      const double sc = kernels::dot(D, c.q.row(i), c.k.row(g.src[t])) + kernels::dot(E, c.qe.row(i), g.feat.row(t));
      c.alpha[t] = sc;
      smax = std::max(smax, sc);
    }
    double z = 0.0;
    for (std::uint32_t t = lo; t < hi; ++t) {
      c.alpha[t] = std::exp(c.alpha[t] - smax);
      z += c.alpha[t];
    }
    double total = 0.0;
    for (std::uint32_t t = lo; t < hi; ++t) {
      c.alpha[t] /= z;
      total += c.alpha[t];
      kernels::axpy(D, c.alpha[t], c.v.row(g.src[t]), msg.row(i));
      kernels::axpy(E, c.alpha[t], g.feat.row(t), c.ebar.row(i));
    }
    if (!(std::fabs(total - 1.0) <= 1e-9)) {
      throw NnError(NnErrorKind::ShapeMismatch, "attention weights of node " + std::to_string(i) + " do not sum to 1");
    }
  }
  matmul_acc(c.ebar, We, msg);
  return msg;
}

void aggregate_backward(const Matrix& h, const MessageGraph& g, ParamSet& p, const LayerSlots& s, const AggCache& c,
                        const Matrix& dmsg, Matrix& dh, bool frozen) {
  const std::size_t N = h.rows, D = h.cols, E = g.edge_dim();
  const Matrix& We = p.at(s.we).value;
  Matrix debar(N, E);
  matmul_nt_acc(dmsg, We, debar);

  Matrix dq(N, D), dk(N, D), dv(N, D), dqe(N, E);
  std::vector<double> dalpha;
  for (std::size_t i = 0; i < N; ++i) {
    const std::uint32_t lo = g.row_ptr[i], hi = g.row_ptr[i + 1];
    if (lo == hi) continue;
    dalpha.assign(hi - lo, 0.0);
    double mean = 0.0;
    for (std::uint32_t t = lo; t < hi; ++t) {
      const double da = kernels::dot(D, dmsg.row(i), c.v.row(g.src[t])) + kernels::dot(E, debar.row(i), g.feat.row(t));
      dalpha[t - lo] = da;
      mean += c.alpha[t] * da;
    }
    for (std::uint32_t t = lo; t < hi; ++t) {
      const std::uint32_t j = g.src[t];
      const double a = c.alpha[t];
      const double ds = a * (dalpha[t - lo] - mean);
      kernels::axpy(D, a, dmsg.row(i), dv.row(j));
      kernels::axpy(D, ds, c.k.row(j), dq.row(i));
      kernels::axpy(D, ds, c.q.row(i), dk.row(j));
      kernels::axpy(E, ds, g.feat.row(t), dqe.row(i));
    }
  }
  matmul_acc(dqe, We, dq);
  if (!frozen) {
    Matrix& gWe = p.at(s.we).grad;
    matmul_tn_acc(c.ebar, dmsg, gWe);
    matmul_tn_acc(dqe, c.q, gWe);
    matmul_tn_acc(h, dq, p.at(s.wq).grad);
    matmul_tn_acc(h, dk, p.at(s.wk).grad);
    matmul_tn_acc(h, dv, p.at(s.wv).grad);
  }
  matmul_nt_acc(dq, p.at(s.wq).value, dh);
  matmul_nt_acc(dk, p.at(s.wk).value, dh);
  matmul_nt_acc(dv, p.at(s.wv).value, dh);
}

Matrix gru_update(const Matrix& h, const Matrix& msg, const ParamSet& p, const LayerSlots& s, GruCache* cache) {
  const std::size_t N = h.rows, D = h.cols;
  check_shape(msg.rows == N && msg.cols == D && p.at(s.wi).value.rows == D, "gru_update: shape mismatch");
  Matrix gi(N, 3 * D), gh(N, 3 * D);
  matmul_acc(msg, p.at(s.wi).value, gi);
  add_row_bias(gi, p.at(s.bi).value);
  matmul_acc(h, p.at(s.wh).value, gh);
  add_row_bias(gh, p.at(s.bh).value);

  GruCache local;
  GruCache& c = cache ? *cache : local;
  c.r.resize(N, D);
  c.z.resize(N, D);
  c.n.resize(N, D);
  c.hn.resize(N, D);
  Matrix out(N, D);
  for (std::size_t i = 0; i < N; ++i) {
    const double* a = gi.row(i);
    const double* b = gh.row(i);
    for (std::size_t d = 0; d < D; ++d) {
      const double r = sigmoid(a[d] + b[d]);
      const double z = sigmoid(a[D + d] + b[D + d]);
      const double hn = b[2 * D + d];
      const double n = std::tanh(a[2 * D + d] + r * hn);
      c.r(i, d) = r;
      c.z(i, d) = z;
      c.n(i, d) = n;
      c.hn(i, d) = hn;
      out(i, d) = (1.0 - z) * n + z * h(i, d);
    }
  }
  return out;
}

void gru_backward(const Matrix& h, const Matrix& msg, ParamSet& p, const LayerSlots& s, const GruCache& c,
                  const Matrix& dnew, Matrix& dh, Matrix& dmsg, bool frozen) {
  const std::size_t N = h.rows, D = h.cols;
  Matrix dgi(N, 3 * D), dgh(N, 3 * D);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t d = 0; d < D; ++d) {
      const double g = dnew(i, d);
      const double r = c.r(i, d), z = c.z(i, d), n = c.n(i, d);
      dh(i, d) += g * z;
      const double dz = g * (h(i, d) - n);
      const double dan = g * (1.0 - z) * (1.0 - n * n);
      const double dar = dan * c.hn(i, d) * r * (1.0 - r);
      const double daz = dz * z * (1.0 - z);
      dgi(i, d) = dar;
      dgi(i, D + d) = daz;
      dgi(i, 2 * D + d) = dan;
      dgh(i, d) = dar;
      dgh(i, D + d) = daz;
      dgh(i, 2 * D + d) = dan * r;
    }
  }
  if (!frozen) {
    matmul_tn_acc(msg, dgi, p.at(s.wi).grad);
    col_sum_acc(dgi, p.at(s.bi).grad);
    matmul_tn_acc(h, dgh, p.at(s.wh).grad);
    col_sum_acc(dgh, p.at(s.bh).grad);
  }
  dmsg.resize(N, D);
  matmul_nt_acc(dgi, p.at(s.wi).value, dmsg);
  matmul_nt_acc(dgh, p.at(s.wh).value, dh);
}

std::vector<double> readout(const Matrix& h, const ParamSet& p, ReadoutCache* cache) {
  const std::size_t R = h.rows, H = p.config().hidden;
  check_shape(h.cols == p.at(p.w1).value.rows, "readout: shape mismatch");
  ReadoutCache local;
  ReadoutCache& c = cache ? *cache : local;
  c.in = h;
  c.z1.resize(R, H);
  matmul_acc(h, p.at(p.w1).value, c.z1);
  add_row_bias(c.z1, p.at(p.b1).value);
  c.a1 = c.z1;
  for (double& v : c.a1.data) v = std::max(v, 0.0);
  c.z2.resize(R, H);
  matmul_acc(c.a1, p.at(p.w2).value, c.z2);
  add_row_bias(c.z2, p.at(p.b2).value);
  c.a2 = c.z2;
  for (double& v : c.a2.data) v = std::max(v, 0.0);
  Matrix y(R, 1);
  matmul_acc(c.a2, p.at(p.w3).value, y);
  const double b3 = p.at(p.b3).value.data[0];
  for (double& v : y.data) v += b3;
  return y.data;
}

namespace {

// Parameter gradients go to `acc` when given.
Matrix readout_backward_impl(const ParamSet& p, const ReadoutCache& c, const std::vector<double>& dy, ParamSet* acc) {
  const std::size_t R = c.in.rows, H = p.config().hidden;
  check_shape(dy.size() == R, "readout_backward: gradient size mismatch");
  Matrix dz3(R, 1);
  dz3.data = dy;
  Matrix da2(R, H);
  matmul_nt_acc(dz3, p.at(p.w3).value, da2);
  for (std::size_t k = 0; k < da2.data.size(); ++k) {
    if (c.z2.data[k] <= 0.0) da2.data[k] = 0.0;
  }
  Matrix da1(R, H);
  matmul_nt_acc(da2, p.at(p.w2).value, da1);
  for (std::size_t k = 0; k < da1.data.size(); ++k) {
    if (c.z1.data[k] <= 0.0) da1.data[k] = 0.0;
  }
  Matrix din(R, c.in.cols);
  matmul_nt_acc(da1, p.at(p.w1).value, din);
  if (acc) {
    matmul_tn_acc(c.a2, dz3, acc->at(p.w3).grad);
    for (double v : dy) acc->at(p.b3).grad.data[0] += v;
    matmul_tn_acc(c.a1, da2, acc->at(p.w2).grad);
    col_sum_acc(da2, acc->at(p.b2).grad);
    matmul_tn_acc(c.in, da1, acc->at(p.w1).grad);
    col_sum_acc(da1, acc->at(p.b1).grad);
  }
  return din;
}

}  // namespace

Matrix readout_backward(ParamSet& p, const ReadoutCache& c, const std::vector<double>& dy, bool frozen) {
  return readout_backward_impl(p, c, dy, frozen ? nullptr : &p);
}

Matrix readout_input_grad(const ParamSet& p, const ReadoutCache& c, const std::vector<double>& dy) {
  return readout_backward_impl(p, c, dy, nullptr);
}

namespace {

Matrix embed(const ParamSet& p, const Matrix& x) {
  check_shape(x.cols == p.at(p.embed_w).value.rows, "forward: node feature width does not match the model");
  Matrix h(x.rows, p.config().latent);
  matmul_acc(x, p.at(p.embed_w).value, h);
  add_row_bias(h, p.at(p.embed_b).value);
  return h;
}

}  // namespace

Matrix embed_and_propagate(const ParamSet& p, const Matrix& x, const MessageGraph& g) {
  check_shape(x.rows == g.num_nodes, "forward: node count mismatch");
  Matrix h = embed(p, x);
  for (std::size_t k = 0; k < p.config().layers; ++k) {
    const auto& s = p.layer_for(k);
    Matrix msg = aggregate(h, g, p, s, nullptr);
    h = gru_update(h, msg, p, s, nullptr);
  }
  return h;
}

std::vector<double> forward(const ParamSet& p, const Matrix& x, const MessageGraph& g,
                            const std::vector<std::uint32_t>& rows, Tape* tape) {
  check_shape(x.rows == g.num_nodes, "forward: node count mismatch");
  const std::size_t K = p.config().layers;
  Matrix h;
  if (tape) {
    tape->x = x;
    tape->h.assign(1, embed(p, x));
    tape->msg.assign(K, Matrix{});
    tape->agg.assign(K, AggCache{});
    tape->gru.assign(K, GruCache{});
    for (std::size_t k = 0; k < K; ++k) {
      const auto& s = p.layer_for(k);
      tape->msg[k] = aggregate(tape->h[k], g, p, s, &tape->agg[k]);
      tape->h.push_back(gru_update(tape->h[k], tape->msg[k], p, s, &tape->gru[k]));
    }
    tape->rows = rows;
  } else {
    h = embed_and_propagate(p, x, g);
  }
  const Matrix& hk = tape ? tape->h.back() : h;
  Matrix sel(rows.size(), hk.cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    check_shape(rows[r] < hk.rows, "forward: readout row out of range");
    std::copy_n(hk.row(rows[r]), hk.cols, sel.row(r));
  }
  return readout(sel, p, tape ? &tape->head : nullptr);
}

void backward(ParamSet& p, const MessageGraph& g, const Tape& tape, const std::vector<double>& dy,
              const FreezeMask& mask) {
  const std::size_t K = p.config().layers;
  const Matrix dsel = readout_backward(p, tape.head, dy, mask.readout);
  if (mask.embed && mask.aggregator && mask.gru) return;  // nothing below the readout learns
  Matrix dh(g.num_nodes, p.config().latent);
  for (std::size_t r = 0; r < tape.rows.size(); ++r) kernels::axpy(dh.cols, 1.0, dsel.row(r), dh.row(tape.rows[r]));
  Matrix dmsg;
  for (std::size_t k = K; k-- > 0;) {
    const auto& s = p.layer_for(k);
    Matrix dprev(g.num_nodes, dh.cols);
    gru_backward(tape.h[k], tape.msg[k], p, s, tape.gru[k], dh, dprev, dmsg, mask.gru);
    aggregate_backward(tape.h[k], g, p, s, tape.agg[k], dmsg, dprev, mask.aggregator);
    dh = std::move(dprev);
  }
  if (!mask.embed) {
    matmul_tn_acc(tape.x, dh, p.at(p.embed_w).grad);
    col_sum_acc(dh, p.at(p.embed_b).grad);
  }
}

double mse(const std::vector<double>& pred, const std::vector<double>& target, std::vector<double>* grad) {
  check_shape(pred.size() == target.size(), "mse: size mismatch");
  if (grad) grad->assign(pred.size(), 0.0);
  if (pred.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(pred.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    loss += d * d;
    if (grad) (*grad)[i] = 2.0 * d * inv;
  }
  return loss * inv;
}

}  // namespace paragate::nn
