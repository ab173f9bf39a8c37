// SPDX-License-Identifier: Apache-2.0
// paragate: command-line front end for the three-step flow and its experiments.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <unordered_map>

#include "CLI11.hpp"
#include "json.hpp"
#include "paragate/common/text.hpp"
#include "paragate/pipeline/pipeline.hpp"

using namespace paragate;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string library;
  double period_ps = 1000.0;
  double input_slew_ps = 20.0;
  double toggle = 0.1;

  void add(CLI::App* app, bool with_library = true) {
    if (with_library) app->add_option("--lib", library, "cell library file (default: built-in desk library)");
    app->add_option("--period", period_ps, "clock period in ps")->capture_default_str();
    app->add_option("--input-slew", input_slew_ps, "slew at primary inputs in ps")->capture_default_str();
    app->add_option("--toggle", toggle, "default toggle rate per cycle")->capture_default_str();
  }
  [[nodiscard]] sta::ClockSpec clock() const { return {period_ps, input_slew_ps}; }
  [[nodiscard]] sta::Activity activity() const {
    sta::Activity a;
    a.default_toggle = toggle;
    return a;
  }
  [[nodiscard]] std::shared_ptr<const netlist::CellLibrary> lib() const {
    return std::make_shared<const netlist::CellLibrary>(library.empty() ? netlist::desk_library()
                                                                        : netlist::read_library(library));
  }
};

struct TrainOpts {
  std::string config;
  std::size_t epochs = 0;
  std::uint64_t seed = 1;

  void add(CLI::App* app) {
    app->add_option("--train-config", config, "training hyperparameters as JSON (default: desk preset)");
    app->add_option("--epochs", epochs, "override the epoch count");
    app->add_option("--seed", seed, "random seed")->capture_default_str();
  }
  [[nodiscard]] nn::TrainConfig get() const {
    nn::TrainConfig c =
        config.empty() ? nn::TrainConfig::desk() : nn::config_from_json(nlohmann::json::parse(text::read_file(config)));
    if (epochs > 0) c.epochs = epochs;
    c.seed = seed;
    return c;
  }
};

void write_json(const std::string& path, const nlohmann::ordered_json& j) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  text::write_file(path, j.dump(2) + "\n");
}

void write_text(const std::string& path, const std::string& s) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  text::write_file(path, s);
}

void save(const std::string& path, const models::TaskModel& m) {
  if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  models::save_model(path, m);
}

std::unordered_map<std::string, double> read_caps_csv(const std::string& path) {
  std::unordered_map<std::string, double> caps;
  std::istringstream is(text::read_file(path));
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (header) {
      header = false;
      continue;
    }
    const auto comma = line.find(',');
    double v = 0.0;
    if (comma == std::string::npos || !text::parse_double(text::trim(line.substr(comma + 1)), v)) {
      throw std::runtime_error("bad caps row '" + line + "' in " + path);
    }
    caps[std::string(text::trim(line.substr(0, comma)))] = v;
  }
  return caps;
}

std::string caps_csv(const netlist::Netlist& n, const std::unordered_map<std::string, double>& caps) {
  std::ostringstream os;
  os << "net,cap_ff\n";
  for (const auto& net : n.nets()) {
    if (auto it = caps.find(net.name); it != caps.end()) os << net.name << ',' << text::format_exact(it->second) << '\n';
  }
  return os.str();
}

nlohmann::ordered_json plan_json(const transfer::FinetunePlan& p, const std::string& kind) {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["rho"] = p.rho;
  j["freeze_aggregator"] = p.freeze.aggregator;
  j["freeze_embed"] = p.freeze.embed;
  j["selected"] = p.selected;
  nlohmann::ordered_json s = nlohmann::ordered_json::array();
  for (double v : p.scores) s.push_back(text::format_exact(v));
  j["scores"] = std::move(s);
  return j;
}

transfer::FinetunePlan plan_from_json(const nlohmann::json& j) {
  transfer::FinetunePlan p;
  p.rho = j.at("rho").get<double>();
  p.freeze = nn::FreezeMask::none();
  p.freeze.aggregator = j.at("freeze_aggregator").get<bool>();
  p.freeze.embed = j.at("freeze_embed").get<bool>();
  p.selected = j.at("selected").get<std::vector<std::uint32_t>>();
  for (const auto& s : j.at("scores")) p.scores.push_back(std::stod(s.get<std::string>()));
  return p;
}

nlohmann::ordered_json eval_json(const metrics::DesignEval& d) {
  nlohmann::ordered_json j;
  j["design"] = d.design;
  j["n_points"] = d.n_points;
  j["r2"] = d.r2;
  j["mape_pct"] = d.mape;
  j["total_rel_err_pct"] = d.total_rel_err;
  return j;
}


// name -> value of `column` in a report CSV (first column is the name).
std::unordered_map<std::string, double> csv_column(const std::string& path, const std::string& column,
                                                   std::vector<std::string>* order = nullptr) {
  std::istringstream is(text::read_file(path));
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error(path + " is empty");
  std::size_t col = 0;
  {
    std::istringstream hs(line);
    std::string h;
    bool found = false;
    for (std::size_t k = 0; std::getline(hs, h, ','); ++k) {
      if (text::trim(h) == column) {
        col = k;
        found = true;
      }
    }
    if (!found || col == 0) throw std::runtime_error(path + " has no '" + column + "' column");
  }
  std::unordered_map<std::string, double> out;
  while (std::getline(is, line)) {
    if (text::trim(line).empty()) continue;
    std::istringstream ls(line);
    std::string name, field;
    std::getline(ls, name, ',');
    for (std::size_t k = 1; k <= col; ++k) std::getline(ls, field, ',');
    double v = 0.0;
    if (!text::parse_double(text::trim(field), v)) throw std::runtime_error("bad row '" + line + "' in " + path);
    if (order) order->push_back(name);
    out[name] = v;
  }
  return out;
}

std::string report_file(const std::string& path, const char* name) {
  return std::filesystem::is_directory(path) ? path + "/" + name : path;
}

// Rows of `truth` in file order, paired with `pred` by name.
metrics::DesignEval eval_columns(const std::string& pred_path, const std::string& truth_path, const char* column,
                                 const std::vector<std::string>* only, double* pred_sum, double* truth_sum) {
  std::vector<std::string> order;
  const auto truth = csv_column(truth_path, column, &order);
  const auto pred = csv_column(pred_path, column);
  std::vector<double> p, t;
  for (const auto& name : only ? *only : order) {
    const auto ti = truth.find(name);
    const auto pi = pred.find(name);
    if (ti == truth.end() || pi == pred.end()) throw std::runtime_error("'" + name + "' is missing from a report");
    p.push_back(pi->second);
    t.push_back(ti->second);
  }
  if (pred_sum) {
    *pred_sum = 0.0;
    *truth_sum = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      *pred_sum += p[k];
      *truth_sum += t[k];
    }
  }
  const auto dir = std::filesystem::path(truth_path).parent_path();
  std::string design = dir.filename().string();
  if (std::filesystem::exists(dir / "summary.json")) {
    design = nlohmann::json::parse(text::read_file((dir / "summary.json").string())).value("design", design);
  }
  return metrics::evaluate_design(design, p, t,
                                  pred_sum ? *pred_sum : 1.0, pred_sum ? *truth_sum : 1.0);
}

metrics::DesignEval eval_at_csv(const std::string& pred, const std::string& truth, const netlist::Netlist* n) {
  std::vector<std::string> pins;
  if (n) {
    for (auto p : models::at_mask_pins(*n)) pins.push_back(n->pin_name(p));
  }
  const auto d = eval_columns(report_file(pred, "pins.csv"), report_file(truth, "pins.csv"), "arrival_ps",
                        n ? &pins : nullptr, nullptr, nullptr);
  return d;
}

metrics::DesignEval eval_power_csv(const std::string& pred, const std::string& truth) {
  double ps = 0.0, ts = 0.0;
  return eval_columns(report_file(pred, "cells.csv"), report_file(truth, "cells.csv"), "total_nw", nullptr, &ps, &ts);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paragate: pre-routing timing and power prediction"};
  app.require_subcommand(1);
  Common common;

  // parse
  std::string netlist_path, out;
  auto* parse = app.add_subcommand("parse", "read a netlist, validate it and print a summary");
  parse->add_option("netlist,--netlist", netlist_path, "structural Verilog")->required();
  parse->add_option("--write", out, "write the netlist back in canonical form");
  bool check = false;
  parse->add_flag("--check", check, "exit non-zero when validation reports diagnostics");
  common.add(parse);
  parse->callback([&] {
    const auto n = netlist::read_netlist(netlist_path, common.lib());
    const auto diags = netlist::validate(n);
    const auto lv = netlist::levelize(n);
    std::size_t dffs = 0;
    for (std::size_t i = 0; i < n.cells().size(); ++i) dffs += n.is_sequential(static_cast<netlist::InstId>(i));
    nlohmann::ordered_json j;
    j["module"] = n.module_name();
    j["cells"] = n.cells().size();
    j["sequential"] = dffs;
    j["nets"] = n.nets().size();
    j["pins"] = n.pins().size();
    j["ports"] = n.ports().size();
    j["max_level"] = lv.max_level;
    nlohmann::ordered_json d = nlohmann::ordered_json::array();
    for (const auto& x : diags) d.push_back(x.message);
    j["diagnostics"] = std::move(d);
    std::cout << j.dump(2) << '\n';
    if (!out.empty()) write_text(out, netlist::write_netlist(n));
    if (check && !diags.empty()) throw std::runtime_error(std::to_string(diags.size()) + " netlist diagnostics");
  });

  // pspef
  std::string caps_path, model_path;
  auto* pspef = app.add_subcommand("pspef", "write a lumped-capacitance PSPEF");
  pspef->add_option("netlist,--netlist", netlist_path)->required();
  auto* src = pspef->add_option_group("caps source");
  src->add_option("--caps", caps_path, "CSV of net,cap_ff");
  src->add_option("--model", model_path, "cap model checkpoint");
  src->require_option(1);
  pspef->add_option("-o,--out", out, "output .spef")->required();
  common.add(pspef);
  pspef->callback([&] {
    const auto n = netlist::read_netlist(netlist_path, common.lib());
    std::unordered_map<std::string, double> caps;
    if (!caps_path.empty()) {
      caps = read_caps_csv(caps_path);
    } else {
      sta::StaOptions opt;
      opt.clock = common.clock();
      const auto pre = sta::analyze(n, nullptr, opt, common.activity(), sta::Annotation::None);
      caps = models::predict_caps(models::load_model(model_path), graph::build_pingraph(n, pre), n);
    }
    write_text(out, spef::write_pspef(n, caps).text);
  });

  // sta
  std::string spef_path;
  bool strict = false;
  auto* sta_cmd = app.add_subcommand("sta", "timing and power analysis, optionally back-annotated");
  sta_cmd->add_option("netlist,--netlist", netlist_path)->required();
  sta_cmd->add_option("--spef", spef_path, "parasitics to annotate");
  sta_cmd->add_flag("--strict", strict, "fail on nets missing from the SPEF");
  sta_cmd->add_option("-o,--out", out, "report directory")->required();
  common.add(sta_cmd);
  sta_cmd->callback([&] {
    const auto n = netlist::read_netlist(netlist_path, common.lib());
    sta::StaOptions opt;
    opt.clock = common.clock();
    opt.strict = strict;
    if (spef_path.empty()) {
      sta::write_report(out, n, sta::analyze(n, nullptr, opt, common.activity(), sta::Annotation::None));
    } else {
      const auto doc = spef::read_spef_file(spef_path);
      sta::write_report(out, n, sta::analyze(n, &doc, opt, common.activity(), sta::Annotation::GoldenSpef));
    }
  });

  // graph
  auto* graph_cmd = app.add_subcommand("graph", "pin-graph construction and inspection");
  graph_cmd->require_subcommand(1);
  std::string graph_dir, golden_path;
  std::size_t size = 1024;
  auto* gbuild = graph_cmd->add_subcommand("build", "build the pin graph of a netlist");
  gbuild->add_option("netlist,--netlist", netlist_path)->required();
  gbuild->add_option("--golden", golden_path, "SPEF providing cap labels");
  gbuild->add_option("-o,--out", out, "graph directory")->required();
  common.add(gbuild);
  gbuild->callback([&] {
    const auto n = netlist::read_netlist(netlist_path, common.lib());
    sta::StaOptions opt;
    opt.clock = common.clock();
    auto g = graph::build_pingraph(n, sta::analyze(n, nullptr, opt, common.activity(), sta::Annotation::None));
    if (!golden_path.empty()) graph::attach_cap_labels(g, n, spef::read_spef_file(golden_path));
    graph::write_graph(out, g);
  });
  auto* gdec = graph_cmd->add_subcommand("decompose", "cut a graph into subgraphs");
  gdec->add_option("graph", graph_dir)->required();
  gdec->add_option("--size", size, "target nodes per subgraph")->capture_default_str();
  gdec->add_option("-o,--out", out, "output directory (one subdirectory per subgraph)")->required();
  gdec->callback([&] {
    const auto parts = graph::decompose(graph::read_graph(graph_dir), size);
    for (const auto& s : parts) {
      char name[32];
      std::snprintf(name, sizeof name, "sub_%05u", s.id);
      graph::write_graph(out + "/" + name, s.graph);
    }
    std::cout << parts.size() << " subgraphs\n";
  });
  auto* gstats = graph_cmd->add_subcommand("stats", "print graph statistics");
  gstats->add_option("graph", graph_dir)->required();
  gstats->callback([&] {
    const auto g = graph::read_graph(graph_dir);
    std::cout << graph::stats_json(g, graph::graph_stats(g));
  });

  // synth
  std::string profile = "default";
  unsigned threads = 1;
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic benchmark suite");
  synth_cmd->add_option("--profile", profile, "default, small or tiny")->capture_default_str();
  synth_cmd->add_option("--threads", threads, "worker threads")->capture_default_str();
  synth_cmd->add_option("-o,--out", out, "suite directory")->required();
  synth_cmd->callback([&] {
    const auto s = synth::build_benchmark_suite(synth::profile_by_name(profile), out, threads);
    std::cout << s.designs.size() << " designs in " << out << '\n';
  });

  // pretrain
  std::string suite_dir, ckpt_dir;
  TrainOpts train;
  auto* pre = app.add_subcommand("pretrain", "train the cap model on the pretrain split");
  pre->add_option("--suite", suite_dir, "suite directory")->required();
  pre->add_option("-o,--out", out, "model checkpoint")->required();
  pre->add_option("--checkpoints", ckpt_dir, "per-epoch checkpoint directory");
  train.add(pre);
  common.add(pre, false);
  pre->callback([&] {
    const auto data = pipeline::load_suite_data(suite_dir, common.clock(), common.activity());
    const auto r = transfer::pretrain(pipeline::split_graphs(data.pretrain), train.get(), ckpt_dir);
    save(out, r.model);
    write_text(fs::path(out).replace_extension(".loss.csv").string(), r.log.csv());
  });

  // score
  double rho = 0.2, design_fraction = 1.0;
  std::string score_mode = "embedding";
  bool random = false;
  auto* score = app.add_subcommand("score", "rank train-split subgraphs for fine-tuning");
  score->add_option("--suite", suite_dir)->required();
  score->add_option("--model", model_path, "pretrained cap model")->required();
  score->add_option("--rho", rho, "selected fraction")->capture_default_str();
  score->add_option("--design-fraction", design_fraction, "share of train designs")->capture_default_str();
  score->add_option("--mode", score_mode, "embedding or parameter")->capture_default_str();
  score->add_flag("--random", random, "uniform random selection instead of gradient scores");
  score->add_option("-o,--out", out, "plan JSON")->required();
  train.add(score);
  common.add(score, false);
  score->callback([&] {
    const auto data = pipeline::load_suite_data(suite_dir, common.clock(), common.activity());
    const auto m = models::load_model(model_path);
    const auto fd = pipeline::make_finetune_data(data, m.schema, train.get(), train.seed, design_fraction);
    transfer::FinetunePlan plan;
    if (random) {
      plan = transfer::random_plan(fd.samples.size(), rho, train.seed);
    } else {
      if (score_mode != "embedding" && score_mode != "parameter") throw CLI::ValidationError("--mode", score_mode);
      plan = transfer::score_subgraphs(
          m, fd.samples, rho, score_mode == "embedding" ? transfer::ScoreMode::Embedding : transfer::ScoreMode::Parameter);
    }
    auto j = plan_json(plan, random ? "random" : score_mode);
    j["design_fraction"] = design_fraction;
    j["seed"] = train.seed;
    write_json(out, j);
  });

  // finetune
  std::string plan_path;
  bool no_freeze = false;
  auto* ft = app.add_subcommand("finetune", "fine-tune a cap model on a selection plan");
  ft->add_option("--suite", suite_dir)->required();
  ft->add_option("--model", model_path, "pretrained cap model")->required();
  ft->add_option("--plan", plan_path, "plan JSON from `score`")->required();
  ft->add_flag("--no-freeze", no_freeze, "update every parameter group");
  ft->add_option("-o,--out", out, "model checkpoint")->required();
  train.add(ft);
  common.add(ft, false);
  ft->callback([&] {
    const auto data = pipeline::load_suite_data(suite_dir, common.clock(), common.activity());
    const auto m = models::load_model(model_path);
    const auto pj = nlohmann::json::parse(text::read_file(plan_path));
    auto plan = plan_from_json(pj);
    if (no_freeze) plan.freeze = nn::FreezeMask::none();
    auto cfg = train.get();
    const auto fd = pipeline::make_finetune_data(data, m.schema, cfg, pj.at("seed").get<std::uint64_t>(),
                                                 pj.at("design_fraction").get<double>());
    const auto r = transfer::finetune(m, plan, fd.samples, fd.val, cfg);
    save(out, r.model);
    write_text(fs::path(out).replace_extension(".loss.csv").string(), r.log.csv());
  });

  // calibrate
  std::string task_name = "at";
  auto* cal = app.add_subcommand("calibrate", "train an AT or power calibration model on the train split");
  cal->add_option("--suite", suite_dir)->required();
  cal->add_option("--cap-model", model_path, "fine-tuned cap model")->required();
  cal->add_option("--task", task_name, "at or power")->capture_default_str();
  cal->add_option("-o,--out", out, "model checkpoint")->required();
  train.add(cal);
  common.add(cal, false);
  cal->callback([&] {
    const auto task = models::task_from_name(task_name);
    const auto data = pipeline::load_suite_data(suite_dir, common.clock(), common.activity());
    auto corpus = pipeline::make_calib_corpus(data.train, models::load_model(model_path), common.clock(),
                                              common.activity());
    const auto r =
        transfer::train_calibration(task, task == models::Task::AT ? corpus.at : corpus.power, train.get());
    save(out, r.model);
    write_text(fs::path(out).replace_extension(".loss.csv").string(), r.log.csv());
  });

  // surrogate (woE)
  std::size_t sur_epochs = 60;
  auto* sur = app.add_subcommand("surrogate", "fit the message-passing timing surrogate on the train split");
  sur->add_option("--suite", suite_dir)->required();
  sur->add_option("--cap-model", model_path, "fine-tuned cap model")->required();
  sur->add_option("--epochs", sur_epochs)->capture_default_str();
  sur->add_option("--seed", train.seed)->capture_default_str();
  sur->add_option("-o,--out", out, "weights JSON")->required();
  common.add(sur, false);
  sur->callback([&] {
    const auto data = pipeline::load_suite_data(suite_dir, common.clock(), common.activity());
    const auto m = models::load_model(model_path);
    std::vector<std::unordered_map<std::string, double>> caps;
    for (const auto& d : data.train) caps.push_back(models::predict_caps(m, d.graph, d.netlist));
    auto s = pipeline::random_surrogate(train.seed);
    pipeline::train_surrogate(s, pipeline::surrogate_examples(data.train, caps), common.clock(), sur_epochs, 0.05);
    write_json(out, pipeline::to_json(s));
  });

  // infer
  pipeline::FlowConfig flow;
  std::string mode = "full", run_dir;
  auto add_flow = [&](CLI::App* c) {
    c->add_option("--cap-model", flow.cap_model)->required();
    c->add_option("--at-model", flow.at_model);
    c->add_option("--power-model", flow.power_model);
    c->add_option("--surrogate", flow.surrogate, "surrogate weights (no-eda mode)");
    c->add_option("--mode", mode, "full, no-pretrain, no-eda or no-calib")->capture_default_str();
    c->add_option("--seed", flow.seed)->capture_default_str();
    common.add(c);
  };
  auto finish_flow = [&] {
    flow.library = common.library;
    flow.clock = common.clock();
    flow.activity = common.activity();
    flow.mode = pipeline::mode_from_name(mode);
  };
  auto* inf = app.add_subcommand("infer", "run the three-step flow on one netlist");
  inf->add_option("netlist,--netlist", netlist_path)->required();
  inf->add_option("--golden", golden_path, "golden SPEF; writes eval/ against the golden-annotated run");
  inf->add_option("-o,--run-dir", run_dir, "run directory")->required();
  add_flow(inf);
  inf->callback([&] {
    finish_flow();
    const auto models = pipeline::load_models(flow);
    const auto n = netlist::read_netlist(netlist_path, common.lib());
    const auto r = pipeline::infer(n, models, flow, run_dir);
    write_text(run_dir + "/caps.csv", caps_csv(n, r.caps));
    if (!golden_path.empty()) {
      sta::StaOptions opt;
      opt.clock = flow.clock;
      const auto doc = spef::read_spef_file(golden_path);
      const auto truth = sta::analyze(n, &doc, opt, flow.activity, sta::Annotation::GoldenSpef);
      sta::write_report(run_dir + "/reports/golden", n, truth);
      pipeline::write_eval(run_dir, n, r, truth);
    }
  });

  // eval
  std::string report_dir, pred_path, truth_path, metric = "at";
  auto* ev = app.add_subcommand("eval", "score predicted reports against golden ones");
  ev->add_option("netlist,--netlist", netlist_path, "netlist; restricts AT scoring to flip-flop data pins");
  ev->add_option("--report", report_dir, "report directory from sta or infer (with --golden)");
  ev->add_option("--golden", golden_path, "golden SPEF (with --report)");
  ev->add_option("--pred", pred_path, "predicted pins.csv / cells.csv, or a report directory");
  ev->add_option("--truth", truth_path, "golden pins.csv / cells.csv, or a report directory");
  ev->add_option("--metric", metric, "at or power (with --pred)")->capture_default_str();
  ev->add_option("-o,--out", out, "metrics JSON; a CSV with the same stem is written next to it");
  common.add(ev);
  ev->callback([&] {
    nlohmann::ordered_json j;
    std::string csv = "metric,design,n_points,r2,mape_pct,total_rel_err_pct\n";
    auto add = [&](const std::string& key, const metrics::DesignEval& d) {
      j[key] = eval_json(d);
      csv += key + ',' + d.design + ',' + std::to_string(d.n_points) + ',' + text::format_exact(d.r2) + ',' +
             text::format_exact(d.mape) + ',' + text::format_exact(d.total_rel_err) + '\n';
    };
    if (!pred_path.empty() || !truth_path.empty()) {
      if (pred_path.empty() || truth_path.empty()) throw CLI::ValidationError("eval", "--pred and --truth go together");
      if (metric != "at" && metric != "power") throw CLI::ValidationError("--metric", "expected at or power");
      std::optional<netlist::Netlist> n;
      if (!netlist_path.empty()) n = netlist::read_netlist(netlist_path, common.lib());
      add(metric, metric == "at" ? eval_at_csv(pred_path, truth_path, n ? &*n : nullptr)
                                 : eval_power_csv(pred_path, truth_path));
    } else {
      if (netlist_path.empty() || report_dir.empty() || golden_path.empty()) {
        throw CLI::ValidationError("eval", "needs a netlist with --report and --golden, or --pred/--truth");
      }
      const auto n = netlist::read_netlist(netlist_path, common.lib());
      const auto pred = sta::read_report(report_dir, n);
      sta::StaOptions opt;
      opt.clock = common.clock();
      const auto doc = spef::read_spef_file(golden_path);
      const auto truth = sta::analyze(n, &doc, opt, common.activity(), sta::Annotation::GoldenSpef);
      add("at", pipeline::evaluate_at(n, pred, truth));
      if (pred.cells.size() == n.cells().size()) add("power", pipeline::evaluate_power(n, pred, truth));
    }
    if (out.empty()) {
      std::cout << j.dump(2) << '\n';
    } else {
      write_json(out, j);
      write_text(std::filesystem::path(out).replace_extension(".csv").string(), csv);
    }
  });

  // ablate, ablate-sampling
  pipeline::ExperimentConfig exp;
  std::string pretrained_path;
  auto add_exp = [&](CLI::App* c) {
    c->add_option("--suite", suite_dir)->required();
    c->add_option("-o,--out", out, "output directory")->required();
    c->add_option("--pretrained", pretrained_path, "reuse a pretrained cap model");
    c->add_option("--seeds", exp.seeds)->capture_default_str();
    c->add_option("--rho", exp.rho)->capture_default_str();
    c->add_option("--design-fraction", exp.design_fraction)->capture_default_str();
    c->add_option("--finetune-epochs", exp.finetune_epochs)->capture_default_str();
    c->add_option("--calib-epochs", exp.calib_epochs)->capture_default_str();
    train.add(c);
    common.add(c, false);
  };
  auto run_exp = [&](bool variants, bool sampling) {
    exp.train = train.get();
    exp.seed = train.seed;
    exp.clock = common.clock();
    exp.activity = common.activity();
    exp.variants = variants;
    exp.sampling = sampling;
    exp.work_dir = out + "/work";
    const auto data = pipeline::load_suite_data(suite_dir, exp.clock, exp.activity);
    std::optional<models::TaskModel> pm;
    if (!pretrained_path.empty()) pm = models::load_model(pretrained_path);
    const auto r = pipeline::run_experiment(data, exp, pm ? &*pm : nullptr);
    write_text(out + "/curves.csv", pipeline::curves_csv(r));
    write_json(out + "/sampling.json", pipeline::sampling_table(r));
    write_text(out + "/sampling.csv", pipeline::sampling_csv(r));
    if (variants) {
      write_json(out + "/ablation.json", pipeline::ablation_table(r));
      write_text(out + "/ablation.csv", pipeline::ablation_csv(r));
      std::cout << pipeline::ablation_csv(r);
    }
    std::cout << pipeline::sampling_csv(r);
  };
  auto* abl = app.add_subcommand("ablate", "full / woP / woE / woC comparison over seeds");
  add_exp(abl);
  abl->callback([&] { run_exp(true, false); });
  auto* abs = app.add_subcommand("ablate-sampling", "GradFreeze / GradUpdate / RandFreeze over seeds");
  add_exp(abs);
  abs->callback([&] { run_exp(false, true); });

  // bench
  auto* bn = app.add_subcommand("bench", "time the flow on every test design");
  bn->add_option("--suite", suite_dir)->required();
  bn->add_option("-o,--out", out, "CSV (default: stdout)");
  add_flow(bn);
  bn->callback([&] {
    finish_flow();
    const auto data = pipeline::load_suite_data(suite_dir, flow.clock, flow.activity);
    const auto rows = pipeline::bench(data, pipeline::load_models(flow), flow);
    if (out.empty()) {
      std::cout << pipeline::bench_csv(rows);
    } else {
      write_text(out, pipeline::bench_csv(rows));
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "paragate: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
