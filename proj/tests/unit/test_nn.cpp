// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "paragate/nn/gnn.hpp"
#include "paragate/nn/kernels.hpp"
#include "nn_oracle.hpp"

using namespace paragate::nn;
using namespace testutil;

namespace {

struct Fixture {
  TrainConfig cfg;
  Matrix x;
  std::vector<std::uint32_t> src, dst;
  Matrix ef;
};

Fixture random_fixture(std::size_t nodes, std::size_t edges, std::uint64_t seed, bool shared = true) {
  Fixture f;
  f.cfg = TrainConfig::desk();
  f.cfg.node_dim = 5;
  f.cfg.edge_dim = 5;  // 4 raw columns + the reverse flag
  f.cfg.latent = 6;
  f.cfg.hidden = 7;
  f.cfg.layers = 3;
  f.cfg.shared = shared;
  f.cfg.seed = seed;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  f.x.resize(nodes, 5);
  for (auto& v : f.x.data) v = nd(rng);
  for (std::size_t k = 0; k < edges; ++k) {
    f.src.push_back(static_cast<std::uint32_t>(rng() % nodes));
    f.dst.push_back(static_cast<std::uint32_t>(rng() % nodes));
  }
  f.ef.resize(edges, 4);
  for (auto& v : f.ef.data) v = nd(rng);
  return f;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace

TEST_CASE("scalar and AVX2 kernels agree") {
  if (!kernels::cpu_has_avx2()) return;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd;
  for (std::size_t trial = 0; trial < 40; ++trial) {
    const std::size_t m = 1 + rng() % 37, n = 1 + rng() % 41, k = 1 + rng() % 53;
    std::vector<double> a(m * k), b(k * n), c1(m * n), c2;
    for (auto& v : a) v = nd(rng);
    for (auto& v : b) v = nd(rng);
    for (auto& v : c1) v = nd(rng);
    c2 = c1;
    kernels::scalar::gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
    kernels::avx2::gemm_nn(m, n, k, a.data(), k, b.data(), n, c2.data(), n);
    for (std::size_t i = 0; i < c1.size(); ++i) {
      CHECK(c2[i] == doctest::Approx(c1[i]).epsilon(1e-12).scale(1.0));
    }
    const std::size_t len = 1 + rng() % 200;
    std::vector<double> x(len), y(len);
    for (auto& v : x) v = nd(rng);
    for (auto& v : y) v = nd(rng);
    const double d1 = kernels::scalar::dot(len, x.data(), y.data());
    const double d2 = kernels::avx2::dot(len, x.data(), y.data());
    CHECK(std::abs(d1 - d2) <= 1e-12 * (1.0 + std::abs(d1)) * static_cast<double>(len));
    auto y1 = y, y2 = y;
    kernels::scalar::axpy(len, 0.37, x.data(), y1.data());
    kernels::avx2::axpy(len, 0.37, x.data(), y2.data());
    for (std::size_t i = 0; i < len; ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-14).scale(1.0));
  }
}

TEST_CASE("full forward matches under either kernel set") {
  if (!kernels::cpu_has_avx2()) return;
  const auto saved = kernels::active_isa();
  const auto f = random_fixture(30, 60, 4);
  const ParamSet p(f.cfg);
  const auto g = make_message_graph(30, f.src, f.dst, f.ef, true);
  std::vector<std::uint32_t> rows(30);
  std::iota(rows.begin(), rows.end(), 0u);
  kernels::force_isa(kernels::Isa::Scalar);
  const auto y1 = forward(p, f.x, g, rows, nullptr);
  kernels::force_isa(kernels::Isa::Avx2);
  const auto y2 = forward(p, f.x, g, rows, nullptr);
  kernels::force_isa(saved);
  for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y2[i] == doctest::Approx(y1[i]).epsilon(1e-10));
}

TEST_CASE("message graph groups by destination and adds reversed edges") {
  Matrix ef(2, 1);
  ef(0, 0) = 7.0;
  ef(1, 0) = 8.0;
  const auto g = make_message_graph(3, {0, 1}, {1, 2}, ef, true);
  CHECK(g.num_edges() == 4);
  CHECK(g.edge_dim() == 2);
  CHECK(g.row_ptr == std::vector<std::uint32_t>{0, 1, 3, 4});
  // Node 1 receives 0->1 forward and 2->1 reversed.
  CHECK(g.src[1] == 0);
  CHECK(g.feat(1, 1) == 0.0);
  CHECK(g.src[2] == 2);
  CHECK(g.feat(2, 0) == 8.0);
  CHECK(g.feat(2, 1) == 1.0);
  const auto one = make_message_graph(3, {0, 1}, {1, 2}, ef, false);
  CHECK(one.num_edges() == 2);
  CHECK(one.edge_dim() == 1);
}

TEST_CASE("attention: single in-edge gets weight 1, twins split evenly") {
  auto f = random_fixture(3, 0, 2);
  Matrix h(3, f.cfg.latent);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (auto& v : h.data) v = nd(rng);

  Matrix ef(1, 4);
  for (auto& v : ef.data) v = nd(rng);
  const auto single = make_message_graph(3, {0}, {1}, ef, false);
  TrainConfig c1 = f.cfg;
  c1.edge_dim = 4;
  const ParamSet p1(c1);
  AggCache cache;
  const Matrix msg = aggregate(h, single, p1, p1.layer_for(0), &cache);
  CHECK(cache.alpha[0] == 1.0);
  for (std::size_t d = 0; d < h.cols; ++d) CHECK(msg(0, d) == 0.0);  // no in-edges

  // Two identical sources with identical edge features.
  Matrix h2 = h;
  std::copy_n(h.row(0), h.cols, h2.row(2));
  Matrix ef2(2, 4);
  std::copy_n(ef.row(0), 4, ef2.row(0));
  std::copy_n(ef.row(0), 4, ef2.row(1));
  const auto twins = make_message_graph(3, {0, 2}, {1, 1}, ef2, false);
  aggregate(h2, twins, p1, p1.layer_for(0), &cache);
  CHECK(cache.alpha[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cache.alpha[1] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("attention matches the dense oracle on random graphs") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const std::size_t n = 2 + seed % 19;
    const auto f = random_fixture(n, 3 * n, seed);
    const ParamSet p(f.cfg);
    const auto g = make_message_graph(n, f.src, f.dst, f.ef, true);
    Matrix h(n, f.cfg.latent);
    std::mt19937_64 rng(seed + 1000);
    std::normal_distribution<double> nd;
    for (auto& v : h.data) v = nd(rng);
    AggCache cache;
    const Matrix got = aggregate(h, g, p, p.layer_for(0), &cache);
    std::vector<double> alpha;
    const Matrix want = naive_aggregate(h, g, p, p.layer_for(0), &alpha);
    CHECK(max_abs_diff(got, want) <= 1e-10);
    for (std::size_t t = 0; t < alpha.size(); ++t) CHECK(std::abs(cache.alpha[t] - alpha[t]) <= 1e-10);
    for (std::size_t i = 0; i < n; ++i) {
      if (g.row_ptr[i] == g.row_ptr[i + 1]) continue;
      double sum = 0.0;
      for (auto t = g.row_ptr[i]; t < g.row_ptr[i + 1]; ++t) sum += cache.alpha[t];
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("GRU: zero weights give the closed form, saturated update gate keeps h") {
  auto f = random_fixture(4, 0, 3);
  ParamSet p(f.cfg);
  const auto& s = p.layer_for(0);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  Matrix h(4, f.cfg.latent), x(4, f.cfg.latent);
  for (auto& v : h.data) v = nd(rng);
  for (auto& v : x.data) v = nd(rng);
  for (auto slot : {s.wi, s.bi, s.wh, s.bh}) p.at(slot).value.zero();
  // r = z = 1/2, n = tanh(0) = 0, so h' = h / 2.
  const Matrix out = gru_update(h, x, p, s, nullptr);
  for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(out.data[i] == doctest::Approx(0.5 * h.data[i]));

  const std::size_t D = f.cfg.latent;
  for (std::size_t d = 0; d < D; ++d) p.at(s.bi).value(0, D + d) = 50.0;
  const Matrix keep = gru_update(h, x, p, s, nullptr);
  for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(std::abs(keep.data[i] - h.data[i]) < 1e-12);
  for (std::size_t d = 0; d < D; ++d) p.at(s.bi).value(0, D + d) = -50.0;
  const Matrix fresh = gru_update(h, x, p, s, nullptr);
  for (std::size_t i = 0; i < h.data.size(); ++i) CHECK(std::abs(fresh.data[i]) < 1e-12);  // n = 0
}

TEST_CASE("GRU matches a naive loop") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto f = random_fixture(9, 0, seed);
    const ParamSet p(f.cfg);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix h(9, f.cfg.latent), x(9, f.cfg.latent);
    for (auto& v : h.data) v = nd(rng);
    for (auto& v : x.data) v = nd(rng);
    const auto& s = p.layer_for(0);
    CHECK(max_abs_diff(gru_update(h, x, p, s, nullptr), naive_gru(h, x, p, s)) <= 1e-12);
  }
}

TEST_CASE("forward matches the naive composition") {
  for (bool shared : {true, false}) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto f = random_fixture(12, 20, seed, shared);
      const ParamSet p(f.cfg);
      const auto g = make_message_graph(12, f.src, f.dst, f.ef, true);
      const std::vector<std::uint32_t> rows = {0, 3, 4, 11};
      const auto got = forward(p, f.x, g, rows, nullptr);
      const auto want = naive_forward(p, f.x, g, rows);
      for (std::size_t i = 0; i < rows.size(); ++i) CHECK(std::abs(got[i] - want[i]) <= 1e-10);
      Tape t;
      CHECK(forward(p, f.x, g, rows, &t) == got);
    }
  }
}

TEST_CASE("zero layers is the readout of the embedding") {
  auto f = random_fixture(8, 10, 6);
  f.cfg.layers = 0;
  const ParamSet p(f.cfg);
  const auto g = make_message_graph(8, f.src, f.dst, f.ef, true);
  const std::vector<std::uint32_t> rows = {1, 2, 7};
  const auto y = forward(p, f.x, g, rows, nullptr);
  const Matrix h = naive_embed(f.x, p);
  Matrix sel(3, h.cols);
  for (std::size_t r = 0; r < 3; ++r) std::copy_n(h.row(rows[r]), h.cols, sel.row(r));
  const auto want = naive_readout(sel, p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(y[i] - want[i]) <= 1e-12);
}

TEST_CASE("relabelling nodes permutes the outputs") {
  const std::size_t n = 15;
  const auto f = random_fixture(n, 30, 8);
  const ParamSet p(f.cfg);
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
  Matrix xp(n, f.x.cols);
  for (std::size_t i = 0; i < n; ++i) std::copy_n(f.x.row(i), f.x.cols, xp.row(perm[i]));
  std::vector<std::uint32_t> sp, dp;
  for (std::size_t k = 0; k < f.src.size(); ++k) {
    sp.push_back(perm[f.src[k]]);
    dp.push_back(perm[f.dst[k]]);
  }
  const auto g = make_message_graph(n, f.src, f.dst, f.ef, true);
  const auto gp = make_message_graph(n, sp, dp, f.ef, true);
  std::vector<std::uint32_t> rows(n), rows_p(n);
  std::iota(rows.begin(), rows.end(), 0u);
  for (std::size_t i = 0; i < n; ++i) rows_p[i] = perm[i];
  const auto y = forward(p, f.x, g, rows, nullptr);
  const auto yp = forward(p, xp, gp, rows_p, nullptr);
  for (std::size_t i = 0; i < n; ++i) CHECK(yp[i] == doctest::Approx(y[i]).epsilon(1e-10));
}

TEST_CASE("backward agrees with central differences") {
  for (bool shared : {true, false}) {
    const std::size_t n = 10;
    const auto f = random_fixture(n, 14, 3, shared);
    ParamSet p(f.cfg);
    const auto g = make_message_graph(n, f.src, f.dst, f.ef, true);
    const std::vector<std::uint32_t> rows = {0, 2, 3, 5, 7, 9};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> nd;
    std::vector<double> target(rows.size());
    for (auto& v : target) v = nd(rng);
    auto loss = [&] { return mse(forward(p, f.x, g, rows, nullptr), target, nullptr); };
    Tape t;
    std::vector<double> dy;
    mse(forward(p, f.x, g, rows, &t), target, &dy);
    p.zero_grad();
    backward(p, g, t, dy);
    for (int grp = 0; grp < 4; ++grp) {
      double num = 0.0, den = 0.0, na = 0.0;
      for (auto& T : p.tensors()) {
        if (static_cast<int>(T.group) != grp) continue;
        for (std::size_t k = 0; k < T.value.data.size(); ++k) {
          const double o = T.value.data[k];
          T.value.data[k] = o + 1e-5;
          const double lp = loss();
          T.value.data[k] = o - 1e-5;
          const double lm = loss();
          T.value.data[k] = o;
          const double fd = (lp - lm) / 2e-5;
          num += (fd - T.grad.data[k]) * (fd - T.grad.data[k]);
          den += fd * fd;
          na += T.grad.data[k] * T.grad.data[k];
        }
      }
      INFO("group " << group_name(static_cast<ParamGroup>(grp)) << " shared " << shared);
      CHECK(na > 0.0);
      CHECK(std::sqrt(num) / std::max(std::sqrt(den), std::sqrt(na)) < 1e-6);
    }
  }
}

TEST_CASE("zero output gradient gives zero parameter gradients; frozen groups get none") {
  const auto f = random_fixture(10, 14, 9);
  ParamSet p(f.cfg);
  const auto g = make_message_graph(10, f.src, f.dst, f.ef, true);
  const std::vector<std::uint32_t> rows = {1, 4, 6};
  Tape t;
  forward(p, f.x, g, rows, &t);
  p.zero_grad();
  backward(p, g, t, std::vector<double>(3, 0.0));
  for (const auto& T : p.tensors())
    for (double v : T.grad.data) CHECK(v == 0.0);

  p.zero_grad();
  backward(p, g, t, {1.0, -2.0, 0.5}, FreezeMask::aggregator_and_embed());
  for (const auto& T : p.tensors()) {
    const bool frozen = T.group == ParamGroup::Aggregator || T.group == ParamGroup::Embed;
    double norm = 0.0;
    for (double v : T.grad.data) norm += v * v;
    if (frozen) {
      CHECK(norm == 0.0);
    }
  }
  double live = 0.0;
  for (const auto& T : p.tensors())
    if (T.group == ParamGroup::Gru)
      for (double v : T.grad.data) live += v * v;
  CHECK(live > 0.0);
}

TEST_CASE("Adam: frozen groups never move, quadratic probe descends, zero lr is a no-op") {
  auto f = random_fixture(10, 14, 12);
  ParamSet p(f.cfg);
  const auto g = make_message_graph(10, f.src, f.dst, f.ef, true);
  const std::vector<std::uint32_t> rows = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<double> target(rows.size(), 0.3);
  const auto agg_hash = p.group_hash(ParamGroup::Aggregator);
  const auto embed_hash = p.group_hash(ParamGroup::Embed);
  const auto mask = FreezeMask::aggregator_and_embed();
  Adam opt(f.cfg);
  double first = -1.0, prev = 0.0;
  for (int step = 0; step < 100; ++step) {
    Tape t;
    std::vector<double> dy;
    const double l = mse(forward(p, f.x, g, rows, &t), target, &dy);
    if (first < 0.0) first = l;
    prev = l;
    p.zero_grad();
    backward(p, g, t, dy, mask);
    opt.step(p, mask);
  }
  CHECK(p.group_hash(ParamGroup::Aggregator) == agg_hash);
  CHECK(p.group_hash(ParamGroup::Embed) == embed_hash);
  CHECK(prev < 0.01 * first);

  // Quadratic probe: one scalar parameter, loss (w - 2)^2. With a steady
  // gradient sign each step moves about lr.
  TrainConfig qc = f.cfg;
  qc.lr = 0.01;
  ParamSet q(qc);
  auto& b3 = q.at(q.b3);
  b3.value.data[0] = -1.0;
  Adam qa(qc);
  FreezeMask only_readout{true, true, true, false};
  double dist = 3.0;
  for (int step = 0; step < 100; ++step) {
    q.zero_grad();
    b3.grad.data[0] = 2.0 * (b3.value.data[0] - 2.0);
    qa.step(q, only_readout);
    const double d = std::abs(b3.value.data[0] - 2.0);
    CHECK(d <= dist + 1e-12);
    dist = d;
  }
  CHECK(dist == doctest::Approx(2.0).epsilon(0.05));

  TrainConfig zc = f.cfg;
  zc.lr = 0.0;
  ParamSet z(zc);
  const auto before = z.tensors();
  Adam za(zc);
  for (auto& T : z.tensors())
    for (auto& v : T.grad.data) v = 1.0;
  za.step(z, FreezeMask::none());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(z.tensors()[i].value == before[i].value);
}

TEST_CASE("checkpoint round trip is exact") {
  const auto f = random_fixture(5, 5, 21);
  Checkpoint c;
  c.task = "cap";
  c.meta["note"] = "x";
  c.params = ParamSet(f.cfg);
  const auto bytes = checkpoint_bytes(c);
  const auto back = checkpoint_from_bytes(bytes);
  CHECK(back.task == "cap");
  CHECK(back.params.config() == f.cfg);
  REQUIRE(back.params.tensors().size() == c.params.tensors().size());
  for (std::size_t i = 0; i < back.params.tensors().size(); ++i) {
    CHECK(back.params.tensors()[i].name == c.params.tensors()[i].name);
    CHECK(back.params.tensors()[i].value == c.params.tensors()[i].value);
  }
  CHECK(checkpoint_bytes(back) == bytes);
  CHECK_THROWS_AS(checkpoint_from_bytes("XXXX" + bytes.substr(4)), NnError);
  CHECK_THROWS_AS(checkpoint_from_bytes(bytes.substr(0, bytes.size() / 2)), NnError);

  const auto path = (std::filesystem::temp_directory_path() / "paragate_nn.pgck").string();
  write_checkpoint(path, c);
  CHECK(checkpoint_bytes(read_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("bad configs are refused") {
  TrainConfig c = TrainConfig::desk();
  c.node_dim = 0;
  c.edge_dim = 3;
  CHECK_THROWS_AS(c.validate(), NnError);
  c.node_dim = 4;
  c.lr = -1.0;
  CHECK_THROWS_AS(c.validate(), NnError);
  c.lr = 1e-3;
  CHECK_NOTHROW(c.validate());
  CHECK(config_from_json(to_json(c)) == c);
}
