// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "helpers.hpp"
#include "paragate/pipeline/pipeline.hpp"

using namespace paragate;
using models::Task;
namespace fs = std::filesystem;

namespace {

bool throws_kind(pipeline::PipelineErrorKind kind, const auto& f) {
  try {
    f();
  } catch (const pipeline::PipelineError& e) {
    return e.kind() == kind;
  }
  return false;
}

nn::TrainConfig small() {
  auto c = nn::TrainConfig::desk();
  c.latent = 8;
  c.hidden = 8;
  c.layers = 2;
  c.subgraph_size = 256;
  c.epochs = 3;
  return c;
}

void make_constant(models::TaskModel& m, double value) {
  auto& p = m.params;
  for (auto slot : {p.w1, p.b1, p.w2, p.b2, p.w3}) p.at(slot).value.zero();
  p.at(p.b3).value.data[0] = value;
}

graph::FeatureSchema fitted(graph::PinGraph g) {
  graph::FeatureSchema s;
  graph::normalize(g, s, true);
  return s;
}

// Random cap model, unit-ratio calibrators.
pipeline::FlowModels identity_models(const netlist::Netlist& n) {
  const auto pre = sta::analyze(n, nullptr, {}, {}, sta::Annotation::None);
  const auto g = graph::build_pingraph(n, pre);
  pipeline::FlowModels m;
  m.cap = models::make_model(Task::Cap, fitted(g), small());
  const auto dual = models::build_dual_graph(n, pre, pre, {});
  const auto ds = fitted(dual);
  m.at = models::make_model(Task::AT, ds, small());
  m.power = models::make_model(Task::Power, ds, small());
  make_constant(*m.at, 1.0);
  make_constant(*m.power, 1.0);
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("exact surrogate reproduces the timing engine") {
  const auto chain3 = netlist::parse_netlist(R"(module c (a, y);
  input a;
  output y;
  wire n1, n2;
  INV_X1 u1 (.A(a), .Y(n1));
  NAND2_X1 u2 (.A(n1), .B(a), .Y(n2));
  BUF_X2 u3 (.A(n2), .Y(y));
endmodule
)",
                                             testutil::desk());
  const std::unordered_map<std::string, double> caps = {{"a", 0.7}, {"n1", 2.5}, {"n2", 1.25}, {"y", 4.0}};
  auto check = [](const netlist::Netlist& n, const std::unordered_map<std::string, double>& c) {
    const auto doc = spef::make_pspef(n, c);
    const auto ref = sta::run_sta(n, &doc, {});
    const auto got = pipeline::propagate(pipeline::exact_surrogate(), n, c, {});
    for (std::size_t p = 0; p < n.pins().size(); ++p) {
      CHECK(got[p].arrival_ps == doctest::Approx(ref.pins[p].arrival_ps).epsilon(1e-12));
      CHECK(got[p].slew_ps == doctest::Approx(ref.pins[p].slew_ps).epsilon(1e-12));
    }
  };
  check(chain3, caps);
  const auto g = testutil::generated(500, 3);
  check(g.netlist, g.golden.cap_map());
}

TEST_CASE("surrogate training reduces arrival error from a random start") {
  const auto g = testutil::generated(300, 4);
  const auto caps = g.golden.cap_map();
  const auto truth = sta::run_sta(g.netlist, &g.golden, {});
  pipeline::SurrogateExample ex;
  ex.netlist = &g.netlist;
  ex.caps = &caps;
  ex.pins = models::at_mask_pins(g.netlist);
  for (auto p : ex.pins) ex.target.push_back(truth.pins[p].arrival_ps);
  auto s = pipeline::random_surrogate(2);
  const auto log = pipeline::train_surrogate(s, {ex}, {}, 40, 0.05);
  REQUIRE(log.loss.size() == 41);
  CHECK(log.loss.back() < log.loss.front());
  const auto back = pipeline::surrogate_from_json(pipeline::to_json(s));
  CHECK(back.w == s.w);
  CHECK(back.u == s.u);
}

TEST_CASE("mode names round-trip") {
  for (auto m : {pipeline::Mode::Full, pipeline::Mode::NoPretrain, pipeline::Mode::NoEda, pipeline::Mode::NoCalib}) {
    CHECK(pipeline::mode_from_name(pipeline::mode_name(m)) == m);
  }
  CHECK_THROWS(pipeline::mode_from_name("fast"));
}

TEST_CASE("unit-ratio calibration leaves the annotated run unchanged") {
  const auto g = testutil::generated(400, 5);
  const auto m = identity_models(g.netlist);
  pipeline::FlowConfig cfg;
  const auto r = pipeline::infer(g.netlist, m, cfg);
  REQUIRE(r.final.pins.size() == r.raw.pins.size());
  for (std::size_t p = 0; p < r.raw.pins.size(); ++p) CHECK(r.final.pins[p].arrival_ps == r.raw.pins[p].arrival_ps);
  for (std::size_t c = 0; c < r.raw.cells.size(); ++c) CHECK(r.final.cells[c].total_nw == r.raw.cells[c].total_nw);
  // Step 2 is exactly the engine on the predicted caps.
  const auto doc = spef::read_spef(r.pspef);
  const auto again = sta::analyze(g.netlist, &doc, {}, {}, sta::Annotation::Pspef);
  for (std::size_t p = 0; p < r.raw.pins.size(); ++p) CHECK(r.raw.pins[p].arrival_ps == again.pins[p].arrival_ps);
  CHECK(r.raw.total_power_nw == again.total_power_nw);
  CHECK(r.runtime.step1_s > 0.0);
  CHECK(r.runtime.step2_s > 0.0);
  CHECK(r.runtime.step3_s > 0.0);
}

TEST_CASE("run directory layout and runtime file") {
  const auto g = testutil::generated(200, 6);
  const auto m = identity_models(g.netlist);
  const auto dir = fs::temp_directory_path() / "paragate_run";
  fs::remove_all(dir);
  pipeline::FlowConfig cfg;
  const auto r = pipeline::infer(g.netlist, m, cfg, dir.string());
  CHECK(fs::exists(dir / "inputs" / "netlist.v"));
  CHECK(fs::exists(dir / "inputs" / "flow.json"));
  CHECK(fs::exists(dir / "pspef" / (g.netlist.module_name() + ".spef")));
  CHECK(slurp(dir / "pspef" / (g.netlist.module_name() + ".spef")) == r.pspef);
  for (const char* rep : {"pre", "raw", "final"}) CHECK(fs::is_directory(dir / "reports" / rep));
  const auto rt = nlohmann::json::parse(slurp(dir / "runtime.json"));
  for (const char* k : {"step1_s", "step2_s", "step3_s"}) {
    REQUIRE(rt.contains(k));
    CHECK(rt.at(k).get<double>() > 0.0);
  }
  CHECK(rt.at("total_s").get<double>() ==
        doctest::Approx(rt.at("step1_s").get<double>() + rt.at("step2_s").get<double>() + rt.at("step3_s").get<double>()));
  pipeline::write_eval(dir.string(), g.netlist, r, sta::analyze(g.netlist, &g.golden, {}, {}, sta::Annotation::GoldenSpef));
  for (const char* f : {"at.json", "at.csv", "power.json", "power.csv"}) CHECK(fs::exists(dir / "eval" / f));
  fs::remove_all(dir);
}

TEST_CASE("failures name their step") {
  const auto g = testutil::generated(200, 7);
  pipeline::FlowConfig cfg;
  SUBCASE("a cap model for other features fails in step 1") {
    auto m = identity_models(g.netlist);
    m.cap.schema.node_names[0] = "elsewhere";
    CHECK(throws_kind(pipeline::PipelineErrorKind::Step1, [&] { pipeline::infer(g.netlist, m, cfg); }));
  }
  SUBCASE("a calibrator for other features fails in step 3") {
    auto m = identity_models(g.netlist);
    m.at->schema.node_names[0] = "elsewhere";
    CHECK(throws_kind(pipeline::PipelineErrorKind::Step3, [&] { pipeline::infer(g.netlist, m, cfg); }));
  }
  SUBCASE("no-eda without a surrogate fails in step 2") {
    auto m = identity_models(g.netlist);
    cfg.mode = pipeline::Mode::NoEda;
    CHECK(throws_kind(pipeline::PipelineErrorKind::Step2, [&] { pipeline::infer(g.netlist, m, cfg); }));
  }
  SUBCASE("missing model files are reported before running") {
    cfg.cap_model = "/nonexistent/cap.pgck";
    CHECK(throws_kind(pipeline::PipelineErrorKind::MissingFile, [&] { cfg.validate(); }));
  }
}

TEST_CASE("no-calib mode passes the raw reports through") {
  const auto g = testutil::generated(200, 8);
  auto m = identity_models(g.netlist);
  make_constant(*m.at, 3.0);
  pipeline::FlowConfig cfg;
  cfg.mode = pipeline::Mode::NoCalib;
  const auto r = pipeline::infer(g.netlist, m, cfg);
  for (std::size_t p = 0; p < r.raw.pins.size(); ++p) CHECK(r.final.pins[p].arrival_ps == r.raw.pins[p].arrival_ps);
}

TEST_CASE("experiment on the tiny suite: table shape and shared starting point") {
  const auto dir = fs::temp_directory_path() / "paragate_tiny_suite";
  fs::remove_all(dir);
  synth::build_benchmark_suite(synth::profile_by_name("tiny"), dir.string());
  const auto data = pipeline::load_suite_data(dir.string(), {}, {});
  pipeline::ExperimentConfig cfg;
  cfg.train = small();
  cfg.train.epochs = 2;
  cfg.finetune_epochs = 2;
  cfg.calib_epochs = 2;
  cfg.surrogate_epochs = 2;
  cfg.seeds = 1;
  const auto rep = pipeline::run_experiment(data, cfg);
  REQUIRE(rep.seeds.size() == 1);
  const auto table = pipeline::ablation_table(rep);
  REQUIRE(table.at("rows").size() == 4);
  std::vector<std::string> names;
  for (const auto& row : table.at("rows")) names.push_back(row.at("variant").get<std::string>());
  CHECK(names == std::vector<std::string>{"full", "woP", "woE", "woC"});
  CHECK(pipeline::ablation_csv(rep).rfind("variant,", 0) == 0);

  const auto& curves = rep.seeds[0].curves;
  REQUIRE(curves.count("GradFreeze"));
  REQUIRE(curves.count("GradUpdate"));
  REQUIRE(curves.count("RandFreeze"));
  const double v0 = curves.at("GradFreeze").epochs.front().val_loss;
  CHECK(curves.at("GradUpdate").epochs.front().val_loss == v0);
  CHECK(curves.at("RandFreeze").epochs.front().val_loss == v0);
  CHECK(pipeline::cap_mape_rows(rep).size() == 5);
  fs::remove_all(dir);
}
