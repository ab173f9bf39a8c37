// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "paragate/graph/pingraph.hpp"

using namespace paragate;
using graph::EdgeKind;

namespace {

graph::PinGraph graph_of(const netlist::Netlist& n) {
  return graph::build_pingraph(n, sta::analyze(n, nullptr, {}, {}, sta::Annotation::None));
}

std::size_t count_kind(const graph::PinGraph& g, EdgeKind k) {
  return static_cast<std::size_t>(std::count(g.kind.begin(), g.kind.end(), k));
}

}  // namespace

TEST_CASE("two-cell chain: one node per pin, arcs along nets and cells") {
  const auto n = testutil::chain();
  const auto g = graph_of(n);
  g.check();
  // a, y ports plus u1:A, u1:Y, u2:A, u2:Y.
  CHECK(g.num_nodes == 6);
  CHECK(count_kind(g, EdgeKind::NetArc) == 3);
  CHECK(count_kind(g, EdgeKind::CellArc) == 2);
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    const auto& s = n.pins()[g.src[k]];
    if (g.kind[k] == EdgeKind::NetArc) {
      CHECK(s.is_driver());
    } else {
      CHECK(s.kind == netlist::PinKind::CellInput);
    }
  }
}

TEST_CASE("node count equals pin count, edge count equals sinks plus arcs") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto gen = testutil::generated(700, seed);
    const auto& n = gen.netlist;
    const auto g = graph_of(n);
    g.check();
    CHECK(g.num_nodes == n.pins().size());
    std::size_t sinks = 0, arcs = 0;
    for (const auto& net : n.nets()) sinks += net.sinks.size();
    for (netlist::InstId c = 0; c < n.cells().size(); ++c) arcs += n.cell_def(c).arcs.size();
    CHECK(count_kind(g, EdgeKind::NetArc) == sinks);
    CHECK(count_kind(g, EdgeKind::CellArc) == arcs);
  }
}

TEST_CASE("fanout feature counts sinks") {
  const char* text = R"(module f (a, y1, y2, y3, y4, y5, y6, y7);
  input a;
  output y1, y2, y3, y4, y5, y6, y7;
  wire h;
  BUF_X2 d (.A(a), .Y(h));
  INV_X1 s1 (.A(h), .Y(y1));
  INV_X1 s2 (.A(h), .Y(y2));
  INV_X1 s3 (.A(h), .Y(y3));
  INV_X1 s4 (.A(h), .Y(y4));
  INV_X1 s5 (.A(h), .Y(y5));
  INV_X1 s6 (.A(h), .Y(y6));
  INV_X1 s7 (.A(h), .Y(y7));
endmodule
)";
  const auto n = netlist::parse_netlist(text, testutil::desk());
  const auto g = graph_of(n);
  const auto drv = *n.find_pin("d:Y");
  CHECK(g.feat(drv, graph::kFanout) == 7.0);
  CHECK(g.feat(drv, graph::kDirOut) == 1.0);
  CHECK(g.feat(*n.find_pin("s1:A"), graph::kDirIn) == 1.0);
}

TEST_CASE("cap labels are log10 fF on driver nodes only") {
  const auto n = testutil::chain();
  auto g = graph_of(n);
  const auto doc = spef::make_pspef(n, {{"a", 1.0}, {"n1", 100.0}, {"y", 0.01}});
  graph::attach_cap_labels(g, n, doc);
  CHECK(g.num_labeled() == 3);
  CHECK(g.y[*n.find_pin("a")] == doctest::Approx(0.0));
  CHECK(g.y[*n.find_pin("u1:Y")] == doctest::Approx(2.0));
  CHECK(g.y[*n.find_pin("u2:Y")] == doctest::Approx(-2.0));
  CHECK(g.mask[*n.find_pin("u2:A")] == 0);

  const auto gen = testutil::generated(900, 4);
  auto h = graph_of(gen.netlist);
  graph::attach_cap_labels(h, gen.netlist, gen.golden);
  CHECK(h.num_labeled() == gen.manifest.nets.size());
  for (const auto& r : gen.manifest.nets) {
    const auto drv = gen.netlist.nets()[*gen.netlist.find_net(r.name)].driver();
    CHECK(h.y[drv] == doctest::Approx(std::log10(r.cap_ff)).epsilon(1e-12));
  }
}

TEST_CASE("labels naming an unknown net are rejected") {
  const auto n = testutil::chain();
  auto g = graph_of(n);
  auto doc = spef::make_pspef(n, {{"a", 1.0}, {"n1", 1.0}, {"y", 1.0}});
  doc.dnets[0].net = "ghost";
  CHECK_THROWS_AS(graph::attach_cap_labels(g, n, doc), graph::GraphError);
}

TEST_CASE("decompose: partition counts, cover, halo masks") {
  const auto gen = testutil::generated(40, 3);
  auto g = graph_of(gen.netlist);
  graph::attach_cap_labels(g, gen.netlist, gen.golden);
  REQUIRE(g.num_nodes > 100);

  SUBCASE("a graph at or below the target is returned whole") {
    const auto parts = graph::decompose(g, g.num_nodes);
    REQUIRE(parts.size() == 1);
    CHECK(parts[0].num_core == g.num_nodes);
    CHECK(parts[0].graph.num_edges() == g.num_edges());
  }
  SUBCASE("core nodes partition the graph; parts number ceil(N/target)") {
    for (std::size_t target : {32u, 50u, 64u, 100u}) {
      const auto parts = graph::decompose(g, target);
      const std::size_t want = (g.num_nodes + target - 1) / target;
      CHECK(parts.size() >= want);
      CHECK(parts.size() <= want + 1);
      std::vector<int> seen(g.num_nodes, 0);
      std::size_t labeled = 0;
      for (const auto& p : parts) {
        p.graph.check();
        CHECK(p.num_core <= target);
        for (std::size_t i = 0; i < p.graph.num_nodes; ++i) {
          const auto o = p.graph.origin[i];
          if (i < p.num_core) {
            ++seen[o];
            CHECK(p.graph.mask[i] == g.mask[o]);
          } else {
            CHECK(p.graph.mask[i] == 0);
          }
        }
        labeled += p.graph.num_labeled();
      }
      CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
      CHECK(labeled == g.num_labeled());
    }
  }
  SUBCASE("100 nodes at target 50 give two parts") {
    graph::PinGraph line;
    line.num_nodes = 100;
    line.node_dim = 1;
    line.edge_dim = 1;
    line.node_names = {"x"};
    line.edge_names = {"e"};
    line.x.assign(100, 0.0);
    line.y.assign(100, 0.0);
    line.mask.assign(100, 0);
    for (std::uint32_t i = 0; i < 100; ++i) line.origin.push_back(i);
    for (std::uint32_t i = 0; i + 1 < 100; ++i) {
      line.src.push_back(i);
      line.dst.push_back(i + 1);
      line.kind.push_back(EdgeKind::NetArc);
      line.e.push_back(1.0);
    }
    line.check();
    const auto parts = graph::decompose(line, 50);
    REQUIRE(parts.size() == 2);
    CHECK(parts[0].num_core == 50);
    CHECK(parts[1].num_core == 50);
    CHECK(parts[0].graph.num_nodes == 51);  // one halo node across the cut
  }
  SUBCASE("tiny targets are refused") { CHECK_THROWS_AS(graph::decompose(g, 4), graph::GraphError); }
}

TEST_CASE("normalize: zero mean, constant columns to zero, names kept") {
  const auto gen = testutil::generated(600, 2);
  auto g = graph_of(gen.netlist);
  const auto names = g.node_names;
  graph::FeatureSchema schema;
  graph::normalize(g, schema, true);
  CHECK(g.normalized);
  CHECK(g.node_names == names);
  CHECK(schema.node_names == names);
  for (std::size_t c = 0; c < g.node_dim; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < g.num_nodes; ++i) mean += g.feat(i, c);
    mean /= static_cast<double>(g.num_nodes);
    CHECK(std::abs(mean) < 1e-9);
  }
  // A constant column maps to 0.
  graph::PinGraph flat = graph_of(testutil::chain());
  for (std::size_t i = 0; i < flat.num_nodes; ++i) flat.x[i * flat.node_dim + graph::kDrive] = 3.5;
  graph::FeatureSchema s2;
  graph::normalize(flat, s2, true);
  for (std::size_t i = 0; i < flat.num_nodes; ++i) CHECK(flat.feat(i, graph::kDrive) == 0.0);
  CHECK(s2.node_std[graph::kDrive] >= graph::kMinStd);
}

TEST_CASE("schema mismatch is refused") {
  auto g = graph_of(testutil::chain());
  graph::FeatureSchema s;
  graph::normalize(g, s, true);
  auto h = graph_of(testutil::chain());
  s.node_names[0] = "other";
  CHECK_THROWS_AS(graph::apply_schema(h, s), graph::GraphError);
}

TEST_CASE("schema and graph files round-trip exactly") {
  const auto gen = testutil::generated(500, 6);
  auto g = graph_of(gen.netlist);
  graph::attach_cap_labels(g, gen.netlist, gen.golden);
  graph::FeatureSchema s;
  graph::normalize(g, s, true);
  CHECK(graph::schema_from_json(graph::schema_json(s)) == s);

  const auto dir = (std::filesystem::temp_directory_path() / "paragate_graph_io").string();
  std::filesystem::remove_all(dir);
  graph::write_graph(dir, g, &s);
  const auto back = graph::read_graph(dir);
  CHECK(back.num_nodes == g.num_nodes);
  CHECK(back.x == g.x);
  CHECK(back.e == g.e);
  CHECK(back.src == g.src);
  CHECK(back.dst == g.dst);
  CHECK(back.kind == g.kind);
  CHECK(back.y == g.y);
  CHECK(back.mask == g.mask);
  CHECK(back.origin == g.origin);
  CHECK(back.node_names == g.node_names);
  CHECK(back.normalized == g.normalized);
  std::filesystem::remove_all(dir);
}

TEST_CASE("stats: arc counts and connected components") {
  const auto g = graph_of(testutil::chain());
  const auto s = graph::graph_stats(g);
  CHECK(s.nodes == 6);
  CHECK(s.net_arcs == 3);
  CHECK(s.cell_arcs == 2);
  CHECK(s.components == 1);
  CHECK(s.feat_min.size() == g.node_dim);
}
