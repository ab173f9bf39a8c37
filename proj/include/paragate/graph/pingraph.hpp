// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paragate/common/error.hpp"
#include "paragate/netlist/netlist.hpp"
#include "paragate/spef/spef.hpp"
#include "paragate/sta/sta.hpp"

namespace paragate::graph {

enum class GraphErrorKind { ReportMismatch, UnmatchedNet, SchemaMismatch, FormatError, BadArgument };
using GraphError = KindedError<GraphErrorKind>;

enum class EdgeKind : std::uint8_t { NetArc = 0, CellArc = 1 };

/// Node feature columns of a freshly built graph.
enum NodeFeature : std::size_t {
  kDirIn,
  kDirOut,
  kDrive,
  kPinCap,
  kFanin,
  kFanout,
  kDepth,
  kArrival,
  kSlew,
  kIsSequential,
  kIsPrimaryIo,
  kNumNodeFeatures
};
enum EdgeFeature : std::size_t { kIsNetArc, kIsCellArc, kArcD0, kArcKLoad, kNumEdgeFeatures };

const std::vector<std::string>& node_feature_names();
const std::vector<std::string>& edge_feature_names();

/// Pin-level directed graph. Dense row-major feature blocks.
struct PinGraph {
  std::string design;
  std::size_t num_nodes = 0;
  std::size_t node_dim = 0;
  std::size_t edge_dim = 0;
  std::vector<std::string> node_names;  // feature column names
  std::vector<std::string> edge_names;
  std::vector<double> x;                // num_nodes * node_dim
  std::vector<std::uint32_t> src;
  std::vector<std::uint32_t> dst;
  std::vector<EdgeKind> kind;
  std::vector<double> e;                // num_edges * edge_dim
  std::vector<double> y;                // per node, meaningful where mask is set
  std::vector<std::uint8_t> mask;
  /// Id of each node in the graph it was cut from (the pin id for full graphs).
  std::vector<std::uint32_t> origin;
  bool normalized = false;

  [[nodiscard]] std::size_t num_edges() const { return src.size(); }
  [[nodiscard]] double feat(std::size_t node, std::size_t col) const { return x[node * node_dim + col]; }
  [[nodiscard]] std::size_t num_labeled() const;
  /// Throws FormatError if array sizes disagree or indices are out of range.
  void check() const;
};

/// One node per pin (ports included), net-arcs driver->sink, cell-arcs
/// input->output along library timing arcs. `report` is the pre-layout run.
PinGraph build_pingraph(const netlist::Netlist& n, const sta::TimingPowerReport& report);

/// Driver nodes get log10(total cap in fF). Clears all other labels.
void attach_cap_labels(PinGraph& g, const netlist::Netlist& n, const spef::SpefDocument& doc);

struct SubGraph {
  PinGraph graph;            // core nodes first, then halo; halo masks cleared
  std::size_t num_core = 0;
  std::uint32_t id = 0;
};

/// BFS partitions of `target_size` nodes (the last may be smaller) with a
/// 1-hop halo. A graph no larger than the target comes back whole.
std::vector<SubGraph> decompose(const PinGraph& g, std::size_t target_size);

struct FeatureSchema {
  std::vector<std::string> node_names;
  std::vector<std::string> edge_names;
  std::vector<double> node_mean, node_std;
  std::vector<double> edge_mean, edge_std;
  bool operator==(const FeatureSchema&) const = default;
};

inline constexpr double kMinStd = 1e-6;

/// Pooled z-score statistics over a corpus.
FeatureSchema fit_schema(const std::vector<const PinGraph*>& corpus);
/// Applies the schema; with fit, recomputes it from `g` first.
void normalize(PinGraph& g, FeatureSchema& schema, bool fit);
void apply_schema(PinGraph& g, const FeatureSchema& schema);

std::string schema_json(const FeatureSchema& s);
FeatureSchema schema_from_json(const std::string& text);

/// Columnar binary layout: nodes.bin, edges.bin, labels.bin and graph.json.
void write_graph(const std::string& dir, const PinGraph& g, const FeatureSchema* schema = nullptr);
PinGraph read_graph(const std::string& dir);

struct GraphStats {
  std::size_t nodes = 0;
  std::size_t net_arcs = 0;
  std::size_t cell_arcs = 0;
  std::size_t labeled = 0;
  std::size_t components = 0;
  std::vector<double> feat_min, feat_max, feat_mean;
};
GraphStats graph_stats(const PinGraph& g);
std::string stats_json(const PinGraph& g, const GraphStats& s);

}  // namespace paragate::graph
