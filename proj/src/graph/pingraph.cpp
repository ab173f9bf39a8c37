// SPDX-License-Identifier: Apache-2.0
#include "paragate/graph/pingraph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace paragate::graph {

using netlist::kNone;
using netlist::NetId;
using netlist::PinId;
using netlist::PinKind;

const std::vector<std::string>& node_feature_names() {
  static const std::vector<std::string> names = {"dir_in", "dir_out", "drive",   "pin_cap",       "fanin",        "fanout",
                                                 "depth",  "arrival", "slew",    "is_sequential", "is_primary_io"};
  return names;
}

const std::vector<std::string>& edge_feature_names() {
  static const std::vector<std::string> names = {"is_net_arc", "is_cell_arc", "arc_d0", "arc_k_load"};
  return names;
}

std::size_t PinGraph::num_labeled() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void PinGraph::check() const {
  auto fail = [](const std::string& why) { throw GraphError(GraphErrorKind::FormatError, "inconsistent graph: " + why); };
  if (x.size() != num_nodes * node_dim) fail("node feature block size");
  if (node_names.size() != node_dim || edge_names.size() != edge_dim) fail("feature name count");
  const std::size_t m = src.size();
  if (dst.size() != m || kind.size() != m || e.size() != m * edge_dim) fail("edge arrays");
  if (y.size() != num_nodes || mask.size() != num_nodes || origin.size() != num_nodes) fail("per-node arrays");
  for (std::size_t i = 0; i < m; ++i) {
    if (src[i] >= num_nodes || dst[i] >= num_nodes) fail("edge endpoint out of range");
  }
  for (double v : x) {
    if (!std::isfinite(v)) fail("non-finite node feature");
  }
  for (double v : e) {
    if (!std::isfinite(v)) fail("non-finite edge feature");
  }
}

PinGraph build_pingraph(const netlist::Netlist& n, const sta::TimingPowerReport& report) {
  if (report.pins.size() != n.pins().size()) {
    throw GraphError(GraphErrorKind::ReportMismatch, "report covers " + std::to_string(report.pins.size()) +
                                                         " pins, netlist has " + std::to_string(n.pins().size()));
  }
  const auto lv = netlist::levelize(n);
  PinGraph g;
  g.design = n.module_name();
  g.num_nodes = n.pins().size();
  g.node_dim = kNumNodeFeatures;
  g.edge_dim = kNumEdgeFeatures;
  g.node_names = node_feature_names();
  g.edge_names = edge_feature_names();
  g.x.assign(g.num_nodes * g.node_dim, 0.0);
  g.y.assign(g.num_nodes, 0.0);
  g.mask.assign(g.num_nodes, 0);
  g.origin.resize(g.num_nodes);
  std::iota(g.origin.begin(), g.origin.end(), 0u);
  const double max_level = std::max<double>(1.0, lv.max_level);

  for (PinId p = 0; p < g.num_nodes; ++p) {
    const auto& pin = n.pins()[p];
    double* f = &g.x[p * g.node_dim];
    f[pin.is_driver() ? kDirOut : kDirIn] = 1.0;
    f[kPinCap] = n.pin_capacitance(p);
    if (!pin.is_port()) {
      const auto& def = n.cell_def(pin.inst);
      f[kDrive] = def.drive_strength;
      f[kFanin] = static_cast<double>(def.input_count());
      f[kIsSequential] = def.is_sequential ? 1.0 : 0.0;
    } else {
      f[kIsPrimaryIo] = 1.0;
    }
    if (pin.net != kNone) f[kFanout] = static_cast<double>(n.nets()[pin.net].sinks.size());
    f[kDepth] = lv.level[p] / max_level;
    f[kArrival] = report.pins[p].arrival_ps;
    f[kSlew] = report.pins[p].slew_ps;
  }

  auto add_edge = [&](PinId s, PinId d, EdgeKind k, double d0, double kl) {
    g.src.push_back(s);
    g.dst.push_back(d);
    g.kind.push_back(k);
    const std::size_t base = g.e.size();
    g.e.resize(base + g.edge_dim, 0.0);
    g.e[base + (k == EdgeKind::NetArc ? kIsNetArc : kIsCellArc)] = 1.0;
    g.e[base + kArcD0] = d0;
    g.e[base + kArcKLoad] = kl;
  };
  for (const auto& net : n.nets()) {
    const PinId d = net.driver();
    if (d == kNone) continue;
    for (PinId s : net.sinks) add_edge(d, s, EdgeKind::NetArc, 0.0, 0.0);
  }
  for (netlist::InstId i = 0; i < n.cells().size(); ++i) {
    const auto& inst = n.cells()[i];
    for (const auto& arc : n.cell_def(i).arcs) {
      add_edge(inst.pins[arc.from_pin], inst.pins[arc.to_pin], EdgeKind::CellArc, arc.d0, arc.k_load);
    }
  }
  return g;
}

void attach_cap_labels(PinGraph& g, const netlist::Netlist& n, const spef::SpefDocument& doc) {
  if (g.num_nodes != n.pins().size()) {
    throw GraphError(GraphErrorKind::ReportMismatch, "graph was not built from this netlist");
  }
  std::fill(g.y.begin(), g.y.end(), 0.0);
  std::fill(g.mask.begin(), g.mask.end(), std::uint8_t{0});
  for (const auto& d : doc.dnets) {
    const auto net = n.find_net(d.net);
    if (!net) throw GraphError(GraphErrorKind::UnmatchedNet, "D_NET '" + d.net + "' is not in the netlist");
    const PinId drv = n.nets()[*net].driver();
    if (drv == kNone) throw GraphError(GraphErrorKind::UnmatchedNet, "net '" + d.net + "' has no driver node");
    if (!(d.total_cap_ff > 0.0)) {
      throw GraphError(GraphErrorKind::UnmatchedNet, "net '" + d.net + "' has a non-positive cap");
    }
    g.y[drv] = std::log10(d.total_cap_ff);
    g.mask[drv] = 1;
  }
}

std::vector<SubGraph> decompose(const PinGraph& g, std::size_t target_size) {
  if (target_size < 32) throw GraphError(GraphErrorKind::BadArgument, "decompose target size must be at least 32");
  std::vector<SubGraph> out;
  if (g.num_nodes <= target_size) {
    out.push_back({g, g.num_nodes, 0});
    return out;
  }
  // Undirected adjacency in CSR form, neighbours in edge order.
  std::vector<std::uint32_t> deg(g.num_nodes + 1, 0);
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    ++deg[g.src[i] + 1];
    ++deg[g.dst[i] + 1];
  }
  std::partial_sum(deg.begin(), deg.end(), deg.begin());
  std::vector<std::uint32_t> adj(deg.back());
  {
    std::vector<std::uint32_t> fill(deg.begin(), deg.end() - 1);
    for (std::size_t i = 0; i < g.num_edges(); ++i) {
      adj[fill[g.src[i]]++] = g.dst[i];
      adj[fill[g.dst[i]]++] = g.src[i];
    }
  }

  std::vector<std::uint32_t> part(g.num_nodes, kNone);
  std::uint32_t next_seed = 0;
  std::uint32_t current = 0;
  std::size_t filled = 0;
  std::deque<std::uint32_t> queue;
  std::size_t assigned = 0;
  while (assigned < g.num_nodes) {
    if (queue.empty()) {
      while (part[next_seed] != kNone) ++next_seed;
      part[next_seed] = current;
      queue.push_back(next_seed);
      ++assigned;
      if (++filled == target_size) {
        ++current;
        filled = 0;
        queue.clear();
        continue;
      }
    }
    const std::uint32_t v = queue.front();
    queue.pop_front();
    for (std::uint32_t k = deg[v]; k < deg[v + 1] && filled < target_size; ++k) {
      const std::uint32_t w = adj[k];
      if (part[w] != kNone) continue;
      part[w] = current;
      queue.push_back(w);
      ++assigned;
      ++filled;
    }
    if (filled == target_size) {
      ++current;
      filled = 0;
      queue.clear();
    }
  }
  const std::uint32_t num_parts = filled > 0 ? current + 1 : current;

  std::vector<std::vector<std::uint32_t>> cores(num_parts);
  for (std::uint32_t v = 0; v < g.num_nodes; ++v) cores[part[v]].push_back(v);

  std::vector<std::uint32_t> local(g.num_nodes, kNone);
  for (std::uint32_t p = 0; p < num_parts; ++p) {
    std::vector<std::uint32_t> nodes = cores[p];
    std::vector<std::uint32_t> halo;
    for (std::uint32_t v : cores[p]) {
      for (std::uint32_t k = deg[v]; k < deg[v + 1]; ++k) {
        if (part[adj[k]] != p) halo.push_back(adj[k]);
      }
    }
    std::sort(halo.begin(), halo.end());
    halo.erase(std::unique(halo.begin(), halo.end()), halo.end());
    nodes.insert(nodes.end(), halo.begin(), halo.end());
    for (std::uint32_t i = 0; i < nodes.size(); ++i) local[nodes[i]] = i;

    SubGraph sg;
    sg.id = p;
    sg.num_core = cores[p].size();
    PinGraph& s = sg.graph;
    s.design = g.design;
    s.num_nodes = nodes.size();
    s.node_dim = g.node_dim;
    s.edge_dim = g.edge_dim;
    s.node_names = g.node_names;
    s.edge_names = g.edge_names;
    s.normalized = g.normalized;
    s.x.resize(s.num_nodes * s.node_dim);
    s.y.resize(s.num_nodes);
    s.mask.assign(s.num_nodes, 0);
    s.origin.resize(s.num_nodes);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::uint32_t v = nodes[i];
      std::copy_n(&g.x[v * g.node_dim], g.node_dim, &s.x[i * s.node_dim]);
      s.y[i] = g.y[v];
      if (i < sg.num_core) s.mask[i] = g.mask[v];
      s.origin[i] = g.origin[v];
    }
    for (std::size_t k = 0; k < g.num_edges(); ++k) {
      const std::uint32_t a = local[g.src[k]], b = local[g.dst[k]];
      if (a == kNone || b == kNone) continue;
      s.src.push_back(a);
      s.dst.push_back(b);
      s.kind.push_back(g.kind[k]);
      s.e.insert(s.e.end(), g.e.begin() + static_cast<std::ptrdiff_t>(k * g.edge_dim),
                 g.e.begin() + static_cast<std::ptrdiff_t>((k + 1) * g.edge_dim));
    }
    for (std::uint32_t v : nodes) local[v] = kNone;
    out.push_back(std::move(sg));
  }
  return out;
}

namespace {

void column_stats(const std::vector<const std::vector<double>*>& blocks, std::size_t dim, std::vector<double>& mean,
                  std::vector<double>& stdev) {
  mean.assign(dim, 0.0);
  stdev.assign(dim, 0.0);
  std::size_t rows = 0;
  for (const auto* b : blocks) {
    const std::size_t r = b->size() / std::max<std::size_t>(dim, 1);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t c = 0; c < dim; ++c) mean[c] += (*b)[i * dim + c];
    }
    rows += r;
  }
  if (rows == 0) {
    std::fill(stdev.begin(), stdev.end(), 1.0);
    return;
  }
  for (double& m : mean) m /= static_cast<double>(rows);
  for (const auto* b : blocks) {
    const std::size_t r = b->size() / std::max<std::size_t>(dim, 1);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = (*b)[i * dim + c] - mean[c];
        stdev[c] += d * d;
      }
    }
  }
  for (double& s : stdev) s = std::max(kMinStd, std::sqrt(s / static_cast<double>(rows)));
}

}  // namespace

FeatureSchema fit_schema(const std::vector<const PinGraph*>& corpus) {
  if (corpus.empty()) throw GraphError(GraphErrorKind::BadArgument, "cannot fit a schema on an empty corpus");
  FeatureSchema s;
  s.node_names = corpus.front()->node_names;
  s.edge_names = corpus.front()->edge_names;
  std::vector<const std::vector<double>*> xs, es;
  for (const auto* g : corpus) {
    if (g->node_names != s.node_names || g->edge_names != s.edge_names) {
      throw GraphError(GraphErrorKind::SchemaMismatch, "corpus graphs disagree on feature columns");
    }
    if (g->normalized) throw GraphError(GraphErrorKind::SchemaMismatch, "graph '" + g->design + "' is already normalized");
    xs.push_back(&g->x);
    es.push_back(&g->e);
  }
  column_stats(xs, s.node_names.size(), s.node_mean, s.node_std);
  column_stats(es, s.edge_names.size(), s.edge_mean, s.edge_std);
  return s;
}

void apply_schema(PinGraph& g, const FeatureSchema& s) {
  if (g.node_names != s.node_names || g.edge_names != s.edge_names) {
    throw GraphError(GraphErrorKind::SchemaMismatch, "graph features do not match the schema");
  }
  if (g.normalized) throw GraphError(GraphErrorKind::SchemaMismatch, "graph '" + g.design + "' is already normalized");
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (std::size_t c = 0; c < g.node_dim; ++c) {
      double& v = g.x[i * g.node_dim + c];
      v = (v - s.node_mean[c]) / s.node_std[c];
    }
  }
  for (std::size_t i = 0; i < g.num_edges(); ++i) {
    for (std::size_t c = 0; c < g.edge_dim; ++c) {
      double& v = g.e[i * g.edge_dim + c];
      v = (v - s.edge_mean[c]) / s.edge_std[c];
    }
  }
  g.normalized = true;
}

void normalize(PinGraph& g, FeatureSchema& schema, bool fit) {
  if (fit) schema = fit_schema({&g});
  apply_schema(g, schema);
}

GraphStats graph_stats(const PinGraph& g) {
  GraphStats s;
  s.nodes = g.num_nodes;
  for (auto k : g.kind) (k == EdgeKind::NetArc ? s.net_arcs : s.cell_arcs)++;
  s.labeled = g.num_labeled();
  s.feat_min.assign(g.node_dim, g.num_nodes ? 1e300 : 0.0);
  s.feat_max.assign(g.node_dim, g.num_nodes ? -1e300 : 0.0);
  s.feat_mean.assign(g.node_dim, 0.0);
  for (std::size_t i = 0; i < g.num_nodes; ++i) {
    for (std::size_t c = 0; c < g.node_dim; ++c) {
      const double v = g.feat(i, c);
      s.feat_min[c] = std::min(s.feat_min[c], v);
      s.feat_max[c] = std::max(s.feat_max[c], v);
      s.feat_mean[c] += v;
    }
  }
  if (g.num_nodes) {
    for (double& m : s.feat_mean) m /= static_cast<double>(g.num_nodes);
  }
  // Weakly connected components by union-find.
  std::vector<std::uint32_t> parent(g.num_nodes);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (std::size_t k = 0; k < g.num_edges(); ++k) {
    const auto a = find(g.src[k]), b = find(g.dst[k]);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  for (std::uint32_t v = 0; v < g.num_nodes; ++v) s.components += find(v) == v;
  return s;
}

}  // namespace paragate::graph
