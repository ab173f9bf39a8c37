// SPDX-License-Identifier: Apache-2.0
#include "paragate/models/models.hpp"

#include <algorithm>
#include <cmath>

namespace paragate::models {

using netlist::kNone;
using netlist::PinId;

const char* task_name(Task t) {
  switch (t) {
    case Task::Cap: return "cap";
    case Task::AT: return "at";
    case Task::Power: return "power";
  }
  return "?";
}

Task task_from_name(const std::string& s) {
  if (s == "cap") return Task::Cap;
  if (s == "at") return Task::AT;
  if (s == "power") return Task::Power;
  throw ModelError(ModelErrorKind::BadTask, "unknown task '" + s + "'");
}

TaskModel make_model(Task task, const graph::FeatureSchema& schema, nn::TrainConfig cfg) {
  cfg.node_dim = schema.node_names.size();
  cfg.edge_dim = schema.edge_names.size() + (cfg.bidirectional ? 1 : 0);
  TaskModel m;
  m.task = task;
  m.schema = schema;
  m.params = nn::ParamSet(cfg);
  return m;
}

nn::Checkpoint to_checkpoint(const TaskModel& m) {
  nn::Checkpoint c;
  c.task = task_name(m.task);
  c.meta["schema"] = nlohmann::ordered_json::parse(graph::schema_json(m.schema));
  c.params = m.params;
  return c;
}

TaskModel from_checkpoint(const nn::Checkpoint& c) {
  TaskModel m;
  m.task = task_from_name(c.task);
  if (!c.meta.contains("schema")) throw ModelError(ModelErrorKind::SchemaMismatch, "checkpoint carries no feature schema");
  m.schema = graph::schema_from_json(c.meta.at("schema").dump());
  m.params = c.params;
  const auto& cfg = m.params.config();
  const std::size_t edge = m.schema.edge_names.size() + (cfg.bidirectional ? 1 : 0);
  if (cfg.node_dim != m.schema.node_names.size() || cfg.edge_dim != edge) {
    throw ModelError(ModelErrorKind::SchemaMismatch, "checkpoint schema width does not match its embed layer");
  }
  return m;
}

void save_model(const std::string& path, const TaskModel& m) { nn::write_checkpoint(path, to_checkpoint(m)); }

TaskModel load_model(const std::string& path) { return from_checkpoint(nn::read_checkpoint(path)); }

nn::Matrix node_matrix(const graph::PinGraph& g) {
  nn::Matrix x(g.num_nodes, g.node_dim);
  x.data = g.x;
  return x;
}

nn::MessageGraph message_graph(const graph::PinGraph& g, bool bidirectional) {
  nn::Matrix e(g.num_edges(), g.edge_dim);
  e.data = g.e;
  return nn::make_message_graph(g.num_nodes, g.src, g.dst, e, bidirectional);
}

std::vector<std::uint32_t> labeled_rows(const graph::PinGraph& g) {
  std::vector<std::uint32_t> rows;
  for (std::uint32_t i = 0; i < g.num_nodes; ++i) {
    if (g.mask[i]) rows.push_back(i);
  }
  return rows;
}

std::vector<double> predict(const TaskModel& m, const graph::PinGraph& g, const std::vector<std::uint32_t>& rows) {
  if (g.node_names != m.schema.node_names || g.edge_names != m.schema.edge_names) {
    throw ModelError(ModelErrorKind::SchemaMismatch,
                     "graph '" + g.design + "' features do not match the " + task_name(m.task) + " model");
  }
  if (g.normalized) throw ModelError(ModelErrorKind::SchemaMismatch, "graph '" + g.design + "' is already normalized");
  graph::PinGraph local = g;
  graph::apply_schema(local, m.schema);
  const auto mg = message_graph(local, m.params.config().bidirectional);
  return nn::forward(m.params, node_matrix(local), mg, rows, nullptr);
}

std::unordered_map<std::string, double> predict_caps(const TaskModel& m, const graph::PinGraph& g,
                                                     const netlist::Netlist& n) {
  if (m.task != Task::Cap) throw ModelError(ModelErrorKind::BadTask, "predict_caps needs a cap model");
  if (g.num_nodes != n.pins().size()) {
    throw ModelError(ModelErrorKind::SchemaMismatch, "graph was not built from netlist '" + n.module_name() + "'");
  }
  std::vector<std::uint32_t> rows;
  std::vector<std::size_t> nets;
  for (std::size_t k = 0; k < n.nets().size(); ++k) {
    const PinId d = n.nets()[k].driver();
    if (d == kNone) continue;
    rows.push_back(d);
    nets.push_back(k);
  }
  const auto out = predict(m, g, rows);
  std::unordered_map<std::string, double> caps;
  caps.reserve(nets.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    double c = std::pow(10.0, out[r]);
    if (!std::isfinite(c)) c = out[r] > 0 ? kMaxCapFf : kMinCapFf;
    caps[n.nets()[nets[r]].name] = std::clamp(c, kMinCapFf, kMaxCapFf);
  }
  return caps;
}

std::vector<PinId> at_mask_pins(const netlist::Netlist& n) {
  std::vector<PinId> pins;
  for (netlist::InstId i = 0; i < n.cells().size(); ++i) {
    const auto& def = n.cell_def(i);
    if (!def.is_sequential) continue;
    for (std::size_t k = 0; k < def.pins.size(); ++k) {
      const auto& pd = def.pins[k];
      if (pd.direction == netlist::PinDirection::Input && !pd.is_clock) pins.push_back(n.cells()[i].pins[k]);
    }
  }
  return pins;
}

std::vector<PinId> power_mask_pins(const netlist::Netlist& n) {
  std::vector<PinId> pins;
  pins.reserve(n.cells().size());
  for (netlist::InstId i = 0; i < n.cells().size(); ++i) pins.push_back(n.cells()[i].pins[n.cell_def(i).output_pin()]);
  return pins;
}

CalibLabels calib_targets(Task task, const netlist::Netlist& n, const sta::TimingPowerReport& truth,
                          const sta::TimingPowerReport& raw) {
  CalibLabels out;
  if (task == Task::AT) {
    if (truth.pins.size() != n.pins().size() || raw.pins.size() != n.pins().size()) {
      throw ModelError(ModelErrorKind::MissingPin, "timing report does not cover every pin");
    }
    out.pins = at_mask_pins(n);
    for (PinId p : out.pins) {
      out.truth.push_back(truth.pins[p].arrival_ps);
      out.raw.push_back(raw.pins[p].arrival_ps);
    }
  } else if (task == Task::Power) {
    if (truth.cells.size() != n.cells().size() || raw.cells.size() != n.cells().size()) {
      throw ModelError(ModelErrorKind::MissingPin, "power report does not cover every cell");
    }
    out.pins = power_mask_pins(n);
    for (std::size_t c = 0; c < n.cells().size(); ++c) {
      out.truth.push_back(truth.cells[c].total_nw);
      out.raw.push_back(raw.cells[c].total_nw);
    }
  } else {
    throw ModelError(ModelErrorKind::BadTask, "calibration targets exist for at and power only");
  }
  const double floor = task == Task::AT ? kRawFloorPs : kRawFloorNw;
  out.label.resize(out.pins.size());
  for (std::size_t k = 0; k < out.pins.size(); ++k) out.label[k] = out.truth[k] / std::max(out.raw[k], floor);
  return out;
}

graph::PinGraph build_dual_graph(const netlist::Netlist& n, const sta::TimingPowerReport& pre,
                                 const sta::TimingPowerReport& post,
                                 const std::unordered_map<std::string, double>& caps) {
  if (post.pins.size() != n.pins().size() || post.cells.size() != n.cells().size()) {
    throw ModelError(ModelErrorKind::MissingPin, "post-annotation report does not cover the design");
  }
  const graph::PinGraph base = graph::build_pingraph(n, pre);
  static const std::vector<std::string> extra = {"post_arrival",  "post_slew",    "cell_switching",
                                                 "cell_internal", "cell_leakage", "log_pred_cap"};
  graph::PinGraph g = base;
  g.node_dim = base.node_dim + extra.size();
  g.node_names.insert(g.node_names.end(), extra.begin(), extra.end());
  g.x.assign(g.num_nodes * g.node_dim, 0.0);
  std::vector<double> net_cap(n.nets().size(), 0.0);
  for (std::size_t k = 0; k < n.nets().size(); ++k) {
    const auto it = caps.find(n.nets()[k].name);
    net_cap[k] = std::log10(std::clamp(it == caps.end() ? kMinCapFf : it->second, kMinCapFf, kMaxCapFf));
  }
  for (PinId p = 0; p < g.num_nodes; ++p) {
    double* f = &g.x[p * g.node_dim];
    std::copy_n(&base.x[p * base.node_dim], base.node_dim, f);
    double* q = f + base.node_dim;
    const auto& pin = n.pins()[p];
    q[0] = post.pins[p].arrival_ps;
    q[1] = post.pins[p].slew_ps;
    if (!pin.is_port()) {
      const auto& cp = post.cells[pin.inst];
      q[2] = cp.switching_nw;
      q[3] = cp.internal_nw;
      q[4] = cp.leakage_nw;
    }
    q[5] = pin.net == kNone ? std::log10(kMinCapFf) : net_cap[pin.net];
  }
  return g;
}

void attach_calib_labels(graph::PinGraph& g, const CalibLabels& labels) {
  std::fill(g.y.begin(), g.y.end(), 0.0);
  std::fill(g.mask.begin(), g.mask.end(), std::uint8_t{0});
  for (std::size_t k = 0; k < labels.pins.size(); ++k) {
    if (labels.pins[k] >= g.num_nodes) throw ModelError(ModelErrorKind::MissingPin, "label pin outside the graph");
    g.y[labels.pins[k]] = labels.label[k];
    g.mask[labels.pins[k]] = 1;
  }
}

sta::TimingPowerReport apply_ratios(Task task, const netlist::Netlist& n, const sta::TimingPowerReport& raw,
                                    const std::vector<double>& ratio) {
  sta::TimingPowerReport out = raw;
  if (task == Task::AT) {
    const auto pins = at_mask_pins(n);
    if (ratio.size() != pins.size()) throw ModelError(ModelErrorKind::MissingPin, "ratio count differs from AT mask");
    for (std::size_t k = 0; k < pins.size(); ++k) out.pins[pins[k]].arrival_ps = ratio[k] * raw.pins[pins[k]].arrival_ps;
  } else if (task == Task::Power) {
    if (ratio.size() != raw.cells.size()) throw ModelError(ModelErrorKind::MissingPin, "ratio count differs from cells");
    out.total_power_nw = 0.0;
    for (std::size_t c = 0; c < raw.cells.size(); ++c) {
      auto& cp = out.cells[c];
      const double r = ratio[c];
      cp.switching_nw *= r;
      cp.internal_nw *= r;
      cp.leakage_nw *= r;
      cp.total_nw = r * raw.cells[c].total_nw;
      out.total_power_nw += cp.total_nw;
    }
  } else {
    throw ModelError(ModelErrorKind::BadTask, "cap models do not calibrate reports");
  }
  return out;
}

sta::TimingPowerReport apply_calibration(const TaskModel& m, const graph::PinGraph& dual, const netlist::Netlist& n,
                                         const sta::TimingPowerReport& raw) {
  if (m.task == Task::Cap) throw ModelError(ModelErrorKind::BadTask, "cap models do not calibrate reports");
  if (dual.num_nodes != n.pins().size()) {
    throw ModelError(ModelErrorKind::SchemaMismatch, "graph was not built from netlist '" + n.module_name() + "'");
  }
  const auto pins = m.task == Task::AT ? at_mask_pins(n) : power_mask_pins(n);
  const std::vector<std::uint32_t> rows(pins.begin(), pins.end());
  return apply_ratios(m.task, n, raw, predict(m, dual, rows));
}

}  // namespace paragate::models
