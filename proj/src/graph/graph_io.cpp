// SPDX-License-Identifier: Apache-2.0
#include <cstring>
#include <filesystem>
#include <fstream>

#include "json.hpp"
#include "paragate/graph/pingraph.hpp"

namespace paragate::graph {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

class Writer {
 public:
  explicit Writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw GraphError(GraphErrorKind::FormatError, "cannot write " + path);
  }
  void magic(const char* m) { out_.write(m, 4); }
  template <class T>
  void scalar(T v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  template <class T>
  void array(const std::vector<T>& v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw GraphError(GraphErrorKind::FormatError, "write failed: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw GraphError(GraphErrorKind::FormatError, "cannot read " + path);
  }
  void magic(const char* m) {
    char buf[4];
    in_.read(buf, 4);
    if (!in_ || std::memcmp(buf, m, 4) != 0) throw GraphError(GraphErrorKind::FormatError, path_ + ": bad magic");
  }
  template <class T>
  T scalar() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in_) throw GraphError(GraphErrorKind::FormatError, path_ + ": truncated");
    return v;
  }
  template <class T>
  std::vector<T> array(std::uint64_t n) {
    if (n > (std::uint64_t{1} << 34) / sizeof(T)) throw GraphError(GraphErrorKind::FormatError, path_ + ": implausible size");
    std::vector<T> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
    if (!in_) throw GraphError(GraphErrorKind::FormatError, path_ + ": truncated");
    return v;
  }

 private:
  std::string path_;
  std::ifstream in_;
};

ordered_json schema_to_json(const FeatureSchema& s) {
  ordered_json j;
  j["node_features"] = s.node_names;
  j["edge_features"] = s.edge_names;
  j["node_mean"] = s.node_mean;
  j["node_std"] = s.node_std;
  j["edge_mean"] = s.edge_mean;
  j["edge_std"] = s.edge_std;
  return j;
}

FeatureSchema schema_from(const json& j) {
  FeatureSchema s;
  s.node_names = j.at("node_features").get<std::vector<std::string>>();
  s.edge_names = j.at("edge_features").get<std::vector<std::string>>();
  s.node_mean = j.at("node_mean").get<std::vector<double>>();
  s.node_std = j.at("node_std").get<std::vector<double>>();
  s.edge_mean = j.at("edge_mean").get<std::vector<double>>();
  s.edge_std = j.at("edge_std").get<std::vector<double>>();
  if (s.node_mean.size() != s.node_names.size() || s.node_std.size() != s.node_names.size() ||
      s.edge_mean.size() != s.edge_names.size() || s.edge_std.size() != s.edge_names.size()) {
    throw GraphError(GraphErrorKind::SchemaMismatch, "schema statistics do not match the feature list");
  }
  return s;
}

}  // namespace

std::string schema_json(const FeatureSchema& s) { return schema_to_json(s).dump(2) + "\n"; }

FeatureSchema schema_from_json(const std::string& text) {
  try {
    return schema_from(json::parse(text));
  } catch (const json::exception& e) {
    throw GraphError(GraphErrorKind::SchemaMismatch, std::string("bad schema: ") + e.what());
  }
}

void write_graph(const std::string& dir, const PinGraph& g, const FeatureSchema* schema) {
  g.check();
  std::filesystem::create_directories(dir);
  {
    Writer w(dir + "/nodes.bin");
    w.magic("PGN1");
    w.scalar<std::uint64_t>(g.num_nodes);
    w.scalar<std::uint64_t>(g.node_dim);
    w.array(g.origin);
    w.array(g.x);
    w.finish();
  }
  {
    Writer w(dir + "/edges.bin");
    w.magic("PGE1");
    w.scalar<std::uint64_t>(g.num_edges());
    w.scalar<std::uint64_t>(g.edge_dim);
    w.array(g.src);
    w.array(g.dst);
    std::vector<std::uint8_t> k(g.kind.size());
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<std::uint8_t>(g.kind[i]);
    w.array(k);
    w.array(g.e);
    w.finish();
  }
  {
    Writer w(dir + "/labels.bin");
    w.magic("PGL1");
    w.scalar<std::uint64_t>(g.num_nodes);
    w.array(g.y);
    w.array(g.mask);
    w.finish();
  }
  ordered_json j;
  j["design"] = g.design;
  j["nodes"] = g.num_nodes;
  j["edges"] = g.num_edges();
  j["node_features"] = g.node_names;
  j["edge_features"] = g.edge_names;
  j["normalized"] = g.normalized;
  if (schema) j["schema"] = schema_to_json(*schema);
  std::ofstream(dir + "/schema.json") << j.dump(2) << "\n";
}

PinGraph read_graph(const std::string& dir) {
  PinGraph g;
  json j;
  try {
    std::ifstream in(dir + "/schema.json");
    if (!in) throw GraphError(GraphErrorKind::FormatError, "missing " + dir + "/schema.json");
    j = json::parse(in);
    g.design = j.at("design").get<std::string>();
    g.node_names = j.at("node_features").get<std::vector<std::string>>();
    g.edge_names = j.at("edge_features").get<std::vector<std::string>>();
    g.normalized = j.at("normalized").get<bool>();
  } catch (const json::exception& e) {
    throw GraphError(GraphErrorKind::FormatError, dir + "/schema.json: " + e.what());
  }
  {
    Reader r(dir + "/nodes.bin");
    r.magic("PGN1");
    g.num_nodes = r.scalar<std::uint64_t>();
    g.node_dim = r.scalar<std::uint64_t>();
    g.origin = r.array<std::uint32_t>(g.num_nodes);
    g.x = r.array<double>(g.num_nodes * g.node_dim);
  }
  {
    Reader r(dir + "/edges.bin");
    r.magic("PGE1");
    const auto m = r.scalar<std::uint64_t>();
    g.edge_dim = r.scalar<std::uint64_t>();
    g.src = r.array<std::uint32_t>(m);
    g.dst = r.array<std::uint32_t>(m);
    const auto k = r.array<std::uint8_t>(m);
    g.kind.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      if (k[i] > 1) throw GraphError(GraphErrorKind::FormatError, "bad edge kind in " + dir);
      g.kind[i] = static_cast<EdgeKind>(k[i]);
    }
    g.e = r.array<double>(m * g.edge_dim);
  }
  {
    Reader r(dir + "/labels.bin");
    r.magic("PGL1");
    const auto n = r.scalar<std::uint64_t>();
    if (n != g.num_nodes) throw GraphError(GraphErrorKind::FormatError, "label count differs from node count");
    g.y = r.array<double>(n);
    g.mask = r.array<std::uint8_t>(n);
  }
  g.check();
  return g;
}

std::string stats_json(const PinGraph& g, const GraphStats& s) {
  ordered_json j;
  j["design"] = g.design;
  j["nodes"] = s.nodes;
  j["net_arcs"] = s.net_arcs;
  j["cell_arcs"] = s.cell_arcs;
  j["labeled"] = s.labeled;
  j["components"] = s.components;
  ordered_json f = ordered_json::object();
  for (std::size_t c = 0; c < g.node_dim; ++c) {
    f[g.node_names[c]] = {{"min", s.feat_min[c]}, {"max", s.feat_max[c]}, {"mean", s.feat_mean[c]}};
  }
  j["features"] = f;
  return j.dump(2) + "\n";
}

}  // namespace paragate::graph
