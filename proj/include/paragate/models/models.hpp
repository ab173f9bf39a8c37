// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "paragate/graph/pingraph.hpp"
#include "paragate/nn/gnn.hpp"

namespace paragate::models {

enum class ModelErrorKind { SchemaMismatch, MissingPin, BadTask };
using ModelError = KindedError<ModelErrorKind>;

enum class Task { Cap, AT, Power };
const char* task_name(Task t);
Task task_from_name(const std::string& s);

/// Lower clamp on raw values before taking ratios: 1 ps for AT, 1 nW for power.
inline constexpr double kRawFloorPs = 1.0;
inline constexpr double kRawFloorNw = 1.0;
inline constexpr double kMinCapFf = 1e-3;
inline constexpr double kMaxCapFf = 1e4;

struct TaskModel {
  Task task = Task::Cap;
  nn::ParamSet params;
  graph::FeatureSchema schema;
};

/// Fresh model whose input widths follow `schema` (edge width grows by one
/// when messages are bidirectional).
TaskModel make_model(Task task, const graph::FeatureSchema& schema, nn::TrainConfig cfg);

nn::Checkpoint to_checkpoint(const TaskModel& m);
TaskModel from_checkpoint(const nn::Checkpoint& c);
void save_model(const std::string& path, const TaskModel& m);
TaskModel load_model(const std::string& path);

nn::Matrix node_matrix(const graph::PinGraph& g);
nn::MessageGraph message_graph(const graph::PinGraph& g, bool bidirectional);
/// Node ids with a label, ascending.
std::vector<std::uint32_t> labeled_rows(const graph::PinGraph& g);

/// Raw model outputs on `rows`. `g` must not be normalized; the model's
/// schema is applied to a copy.
std::vector<double> predict(const TaskModel& m, const graph::PinGraph& g, const std::vector<std::uint32_t>& rows);

/// Net name -> predicted capacitance (fF), 10^output clamped to [1e-3, 1e4].
/// `g` is the full pin graph of `n`.
std::unordered_map<std::string, double> predict_caps(const TaskModel& m, const graph::PinGraph& g,
                                                     const netlist::Netlist& n);

/// Data pins of sequential cells.
std::vector<netlist::PinId> at_mask_pins(const netlist::Netlist& n);
/// The output pin of every cell instance, in instance order.
std::vector<netlist::PinId> power_mask_pins(const netlist::Netlist& n);

struct CalibLabels {
  std::vector<netlist::PinId> pins;
  std::vector<double> truth;
  std::vector<double> raw;
  std::vector<double> label;  // truth / max(raw, floor)
};
/// Ratio targets on the task's mask pins.
CalibLabels calib_targets(Task task, const netlist::Netlist& n, const sta::TimingPowerReport& truth,
                          const sta::TimingPowerReport& raw);

/// Pre-annotation graph plus post-annotation columns: arrival, slew, the
/// owning cell's power triple and log10 of the predicted net cap.
graph::PinGraph build_dual_graph(const netlist::Netlist& n, const sta::TimingPowerReport& pre,
                                 const sta::TimingPowerReport& post,
                                 const std::unordered_map<std::string, double>& caps);
/// Sets mask and ratio labels on a dual graph.
void attach_calib_labels(graph::PinGraph& g, const CalibLabels& labels);

/// corrected = prediction * raw on masked pins; other values pass through.
sta::TimingPowerReport apply_calibration(const TaskModel& m, const graph::PinGraph& dual, const netlist::Netlist& n,
                                         const sta::TimingPowerReport& raw);
/// Same, from precomputed per-pin ratios (parallel to the task's mask pins).
sta::TimingPowerReport apply_ratios(Task task, const netlist::Netlist& n, const sta::TimingPowerReport& raw,
                                    const std::vector<double>& ratio);

}  // namespace paragate::models
