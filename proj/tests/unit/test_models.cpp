// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "helpers.hpp"
#include "paragate/models/models.hpp"

using namespace paragate;
using models::Task;

namespace {

struct Design {
  synth::GeneratedDesign gen;
  sta::TimingPowerReport pre, golden;
  graph::PinGraph g;
};

Design design(std::size_t cells, std::uint64_t seed) {
  Design d{testutil::generated(cells, seed), {}, {}, {}};
  const auto& n = d.gen.netlist;
  d.pre = sta::analyze(n, nullptr, {}, {}, sta::Annotation::None);
  d.golden = sta::analyze(n, &d.gen.golden, {}, {}, sta::Annotation::GoldenSpef);
  d.g = graph::build_pingraph(n, d.pre);
  return d;
}

nn::TrainConfig small() {
  auto c = nn::TrainConfig::desk();
  c.latent = 8;
  c.hidden = 8;
  c.layers = 2;
  return c;
}

// Readout weights zeroed so the output is the final bias everywhere.
void make_constant(models::TaskModel& m, double value) {
  auto& p = m.params;
  for (auto slot : {p.w1, p.b1, p.w2, p.b2, p.w3}) p.at(slot).value.zero();
  p.at(p.b3).value.data[0] = value;
}

graph::FeatureSchema schema_of(graph::PinGraph g) {
  graph::FeatureSchema s;
  graph::normalize(g, s, true);
  return s;
}

}  // namespace

TEST_CASE("a zero readout predicts 1 fF on every net") {
  const auto d = design(300, 1);
  auto m = models::make_model(Task::Cap, schema_of(d.g), small());
  make_constant(m, 0.0);
  const auto caps = models::predict_caps(m, d.g, d.gen.netlist);
  CHECK(caps.size() == d.gen.netlist.nets().size());
  for (const auto& [net, c] : caps) CHECK(c == 1.0);
}

TEST_CASE("predicted caps are positive and clamped") {
  const auto d = design(300, 2);
  const auto m = models::make_model(Task::Cap, schema_of(d.g), small());
  for (const auto& [net, c] : models::predict_caps(m, d.g, d.gen.netlist)) {
    CHECK(c >= models::kMinCapFf);
    CHECK(c <= models::kMaxCapFf);
  }
  auto big = m;
  make_constant(big, 9.0);
  for (const auto& [net, c] : models::predict_caps(big, d.g, d.gen.netlist)) CHECK(c == models::kMaxCapFf);
}

TEST_CASE("mask pins: flip-flop data pins and cell outputs in instance order") {
  const auto d = design(400, 3);
  const auto& n = d.gen.netlist;
  const auto at = models::at_mask_pins(n);
  CHECK(at.size() == d.gen.manifest.dffs);
  for (auto p : at) {
    CHECK(n.is_sequential(n.pins()[p].inst));
    CHECK(n.pin_name(p).substr(n.pin_name(p).size() - 2) == ":D");
  }
  const auto pw = models::power_mask_pins(n);
  REQUIRE(pw.size() == n.cells().size());
  for (std::size_t c = 0; c < pw.size(); ++c) {
    CHECK(n.pins()[pw[c]].inst == c);
    CHECK(n.pins()[pw[c]].kind == netlist::PinKind::CellOutput);
  }
}

TEST_CASE("calibration targets are truth over raw") {
  const auto d = design(400, 4);
  const auto& n = d.gen.netlist;
  const auto same = models::calib_targets(Task::AT, n, d.golden, d.golden);
  for (std::size_t k = 0; k < same.label.size(); ++k) {
    if (same.raw[k] >= models::kRawFloorPs) CHECK(same.label[k] == 1.0);
  }
  auto doubled = d.golden;
  for (auto& c : doubled.cells) c.total_nw *= 2.0;
  const auto pw = models::calib_targets(Task::Power, n, doubled, d.golden);
  for (std::size_t k = 0; k < pw.label.size(); ++k) {
    if (pw.raw[k] >= models::kRawFloorNw) CHECK(pw.label[k] == 2.0);
  }
  CHECK_THROWS_AS(models::calib_targets(Task::Cap, n, d.golden, d.golden), models::ModelError);
}

TEST_CASE("calibration targets recomputed from report files") {
  const auto d = design(400, 5);
  const auto& n = d.gen.netlist;
  const auto raw = sta::analyze(n, nullptr, {}, {}, sta::Annotation::None);
  const auto tmp = std::filesystem::temp_directory_path() / "paragate_models_reports";
  std::filesystem::remove_all(tmp);
  sta::write_report((tmp / "truth").string(), n, d.golden);
  sta::write_report((tmp / "raw").string(), n, raw);
  const auto t2 = sta::read_report((tmp / "truth").string(), n);
  const auto r2 = sta::read_report((tmp / "raw").string(), n);
  for (Task task : {Task::AT, Task::Power}) {
    const auto a = models::calib_targets(task, n, d.golden, raw);
    const auto b = models::calib_targets(task, n, t2, r2);
    REQUIRE(a.label.size() == b.label.size());
    for (std::size_t k = 0; k < a.label.size(); ++k) CHECK(std::abs(a.label[k] - b.label[k]) <= 1e-12 * a.label[k]);
  }
  std::filesystem::remove_all(tmp);
}

TEST_CASE("unit-ratio calibration is a no-op, 1.5 scales masked values") {
  const auto d = design(400, 6);
  const auto& n = d.gen.netlist;
  const auto raw = sta::analyze(n, nullptr, {}, {}, sta::Annotation::None);
  const auto caps = d.gen.golden.cap_map();
  const auto dual = models::build_dual_graph(n, d.pre, raw, caps);
  auto schema = schema_of(dual);
  for (Task task : {Task::AT, Task::Power}) {
    auto m = models::make_model(task, schema, small());
    make_constant(m, 1.0);
    const auto same = models::apply_calibration(m, dual, n, raw);
    for (std::size_t p = 0; p < raw.pins.size(); ++p) CHECK(same.pins[p].arrival_ps == raw.pins[p].arrival_ps);
    for (std::size_t c = 0; c < raw.cells.size(); ++c) CHECK(same.cells[c].total_nw == raw.cells[c].total_nw);
    CHECK(same.total_power_nw == doctest::Approx(raw.total_power_nw).epsilon(1e-14));

    make_constant(m, 1.5);
    const auto scaled = models::apply_calibration(m, dual, n, raw);
    if (task == Task::AT) {
      std::vector<char> masked(raw.pins.size(), 0);
      for (auto p : models::at_mask_pins(n)) masked[p] = 1;
      for (std::size_t p = 0; p < raw.pins.size(); ++p) {
        CHECK(scaled.pins[p].arrival_ps == (masked[p] ? 1.5 * raw.pins[p].arrival_ps : raw.pins[p].arrival_ps));
      }
    } else {
      double sum = 0.0;
      for (std::size_t c = 0; c < raw.cells.size(); ++c) {
        CHECK(scaled.cells[c].total_nw == 1.5 * raw.cells[c].total_nw);
        sum += scaled.cells[c].total_nw;
      }
      CHECK(scaled.total_power_nw == sum);
      CHECK(scaled.total_power_nw == doctest::Approx(1.5 * raw.total_power_nw).epsilon(1e-12));
    }
  }
  auto capm = models::make_model(Task::Cap, schema, small());
  CHECK_THROWS_AS(models::apply_calibration(capm, dual, n, raw), models::ModelError);
}

TEST_CASE("dual graph labels sit on the mask pins") {
  const auto d = design(300, 7);
  const auto& n = d.gen.netlist;
  auto dual = models::build_dual_graph(n, d.pre, d.pre, d.gen.golden.cap_map());
  CHECK(dual.num_nodes == n.pins().size());
  CHECK(dual.node_dim > d.g.node_dim);
  const auto labels = models::calib_targets(Task::AT, n, d.golden, d.pre);
  models::attach_calib_labels(dual, labels);
  CHECK(dual.num_labeled() == labels.pins.size());
  for (std::size_t k = 0; k < labels.pins.size(); ++k) CHECK(dual.y[labels.pins[k]] == labels.label[k]);
}

TEST_CASE("model files round-trip; a foreign schema is refused") {
  const auto d = design(200, 8);
  const auto m = models::make_model(Task::AT, schema_of(d.g), small());
  const auto path = (std::filesystem::temp_directory_path() / "paragate_model.pgck").string();
  models::save_model(path, m);
  const auto back = models::load_model(path);
  CHECK(back.task == Task::AT);
  CHECK(back.schema == m.schema);
  CHECK(nn::checkpoint_bytes(models::to_checkpoint(back)) == nn::checkpoint_bytes(models::to_checkpoint(m)));
  std::filesystem::remove(path);

  auto other = d.g;
  other.node_names[0] = "renamed";
  CHECK_THROWS(models::predict(m, other, models::labeled_rows(other)));
  CHECK(models::task_from_name(models::task_name(Task::Power)) == Task::Power);
  CHECK_THROWS_AS(models::task_from_name("slack"), models::ModelError);
}
