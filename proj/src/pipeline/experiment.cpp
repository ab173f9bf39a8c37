// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <sstream>

#include "paragate/common/text.hpp"
#include "paragate/pipeline/pipeline.hpp"

namespace paragate::pipeline {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

const char* const kStrategies[] = {"GradFreeze", "GradUpdate", "RandFreeze"};
const char* const kVariants[] = {"full", "woP", "woE", "woC"};
constexpr double kSurrogateLr = 0.05;

sta::TimingPowerReport annotate(const DesignData& d, const std::unordered_map<std::string, double>& caps,
                                const ExperimentConfig& cfg) {
  const auto doc = spef::make_pspef(d.netlist, caps);
  sta::StaOptions opt;
  opt.clock = cfg.clock;
  return sta::analyze(d.netlist, &doc, opt, cfg.activity, sta::Annotation::Pspef);
}

using CapSet = std::vector<std::unordered_map<std::string, double>>;

CapSet caps_for(const models::TaskModel& m, const std::vector<DesignData>& ds) {
  CapSet out;
  out.reserve(ds.size());
  for (const auto& d : ds) out.push_back(models::predict_caps(m, d.graph, d.netlist));
  return out;
}

metrics::EvalResult cap_eval(const std::vector<DesignData>& ds, const CapSet& caps) {
  std::vector<metrics::DesignEval> ev;
  std::vector<std::vector<double>> p(ds.size()), t(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) {
    ev.push_back(evaluate_caps(ds[k].entry.name, caps[k], ds[k].golden, &p[k], &t[k]));
  }
  return metrics::combine(ev, p, t);
}

template <typename F>
metrics::EvalResult report_eval(const std::vector<DesignData>& ds, const std::vector<sta::TimingPowerReport>& pred,
                                F&& eval) {
  std::vector<metrics::DesignEval> ev;
  std::vector<std::vector<double>> p(ds.size()), t(ds.size());
  for (std::size_t k = 0; k < ds.size(); ++k) ev.push_back(eval(ds[k].netlist, pred[k], ds[k].truth, &p[k], &t[k]));
  return metrics::combine(ev, p, t);
}

metrics::EvalResult at_eval(const std::vector<DesignData>& ds, const std::vector<sta::TimingPowerReport>& pred) {
  return report_eval(ds, pred, evaluate_at);
}

metrics::EvalResult power_eval(const std::vector<DesignData>& ds, const std::vector<sta::TimingPowerReport>& pred) {
  return report_eval(ds, pred, evaluate_power);
}

struct Calibrators {
  models::TaskModel at, power;
};

std::vector<sta::TimingPowerReport> calibrate(const Calibrators& c, const std::vector<DesignData>& ds,
                                              const CapSet& caps, const std::vector<sta::TimingPowerReport>& raw) {
  std::vector<sta::TimingPowerReport> out;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const auto dual = models::build_dual_graph(ds[k].netlist, ds[k].pre, raw[k], caps[k]);
    auto r = models::apply_calibration(c.at, dual, ds[k].netlist, raw[k]);
    out.push_back(models::apply_calibration(c.power, dual, ds[k].netlist, r));
  }
  return out;
}

void save_log(const std::string& dir, const std::string& name, const transfer::TrainLog& log) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  text::write_file(dir + "/" + name + "_loss.csv", log.csv());
}

}  // namespace

SuiteData load_suite_data(const std::string& dir, const sta::ClockSpec& clock, const sta::Activity& activity) {
  SuiteData s;
  s.suite = synth::load_suite(dir);
  s.library = std::make_shared<const netlist::CellLibrary>(netlist::read_library(s.suite.library_path()));
  sta::StaOptions opt;
  opt.clock = clock;
  auto load = [&](const synth::SuiteEntry* e) {
    DesignData d;
    d.entry = *e;
    d.netlist = netlist::read_netlist(s.suite.netlist_path(*e), s.library);
    d.golden = spef::read_spef_file(s.suite.golden_path(*e));
    d.pre = sta::analyze(d.netlist, nullptr, opt, activity, sta::Annotation::None);
    d.truth = sta::analyze(d.netlist, &d.golden, opt, activity, sta::Annotation::GoldenSpef);
    d.graph = graph::build_pingraph(d.netlist, d.pre);
    graph::attach_cap_labels(d.graph, d.netlist, d.golden);
    return d;
  };
  for (const auto* e : s.suite.split("pretrain")) s.pretrain.push_back(load(e));
  for (const auto* e : s.suite.split("train")) s.train.push_back(load(e));
  for (const auto* e : s.suite.split("test")) s.test.push_back(load(e));
  return s;
}

std::vector<graph::PinGraph> split_graphs(const std::vector<DesignData>& designs) {
  std::vector<graph::PinGraph> out;
  out.reserve(designs.size());
  for (const auto& d : designs) out.push_back(d.graph);
  return out;
}

FinetuneData make_finetune_data(const SuiteData& data, const graph::FeatureSchema& schema, const nn::TrainConfig& cfg,
                                std::uint64_t seed, double design_fraction) {
  if (!(design_fraction > 0.0 && design_fraction <= 1.0)) {
    throw PipelineError(PipelineErrorKind::BadConfig, "design fraction outside (0,1]");
  }
  FinetuneData fd;
  fd.designs.resize(data.train.size());
  std::iota(fd.designs.begin(), fd.designs.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(fd.designs.begin(), fd.designs.end(), rng);
  const auto use = static_cast<std::size_t>(
      std::max(1.0, std::ceil(design_fraction * static_cast<double>(fd.designs.size()) - 1e-9)));
  fd.designs.resize(std::min(use, fd.designs.size()));
  std::sort(fd.designs.begin(), fd.designs.end());
  std::vector<graph::PinGraph> graphs;
  for (auto i : fd.designs) {
    graphs.push_back(data.train[i].graph);
    graph::apply_schema(graphs.back(), schema);
  }
  fd.samples = transfer::make_samples(graphs, cfg.subgraph_size, cfg.bidirectional);
  transfer::hold_out(fd.samples, fd.val, 0.1, seed);
  return fd;
}

CalibCorpus make_calib_corpus(const std::vector<DesignData>& designs, const models::TaskModel& cap,
                              const sta::ClockSpec& clock, const sta::Activity& activity) {
  CalibCorpus c;
  sta::StaOptions opt;
  opt.clock = clock;
  for (const auto& d : designs) {
    c.caps.push_back(models::predict_caps(cap, d.graph, d.netlist));
    const auto doc = spef::make_pspef(d.netlist, c.caps.back());
    const auto raw = sta::analyze(d.netlist, &doc, opt, activity, sta::Annotation::Pspef);
    const auto dual = models::build_dual_graph(d.netlist, d.pre, raw, c.caps.back());
    c.at.push_back(dual);
    models::attach_calib_labels(c.at.back(), models::calib_targets(models::Task::AT, d.netlist, d.truth, raw));
    c.power.push_back(dual);
    models::attach_calib_labels(c.power.back(), models::calib_targets(models::Task::Power, d.netlist, d.truth, raw));
  }
  return c;
}

std::vector<SurrogateExample> surrogate_examples(const std::vector<DesignData>& designs,
                                                 const std::vector<std::unordered_map<std::string, double>>& caps) {
  std::vector<SurrogateExample> out;
  for (std::size_t i = 0; i < designs.size(); ++i) {
    const auto& d = designs[i];
    SurrogateExample ex;
    ex.netlist = &d.netlist;
    ex.caps = &caps.at(i);
    ex.pins = models::at_mask_pins(d.netlist);
    for (auto p : ex.pins) ex.target.push_back(d.truth.pins[p].arrival_ps);
    out.push_back(std::move(ex));
  }
  return out;
}

ExperimentReport run_experiment(const SuiteData& data, const ExperimentConfig& cfg, const models::TaskModel* pretrained) {
  const auto start = Clock::now();
  if (data.train.empty() || data.test.empty()) {
    throw PipelineError(PipelineErrorKind::BadConfig, "suite needs train and test designs");
  }
  ExperimentReport rep;
  models::TaskModel pre;
  if (pretrained) {
    pre = *pretrained;
  } else {
    const std::string ck = cfg.work_dir.empty() ? "" : cfg.work_dir + "/pretrain";
    auto r = transfer::pretrain(split_graphs(data.pretrain), cfg.train, ck);
    pre = std::move(r.model);
    rep.pretrain = std::move(r.log);
    if (!cfg.work_dir.empty()) {
      models::save_model(cfg.work_dir + "/pretrained.pgck", pre);
      save_log(cfg.work_dir, "pretrain", rep.pretrain);
    }
  }

  const CapSet pre_test = caps_for(pre, data.test);
  for (std::size_t k = 0; k < cfg.seeds; ++k) {
    SeedResult sr;
    sr.seed = cfg.seed + k;
    const std::string dir = cfg.work_dir.empty() ? "" : cfg.work_dir + "/seed_" + std::to_string(sr.seed);
    nn::TrainConfig ft = cfg.train;
    ft.epochs = cfg.finetune_epochs;
    ft.seed = sr.seed;

    auto fd = make_finetune_data(data, pre.schema, ft, sr.seed, cfg.design_fraction);
    const auto& samples = fd.samples;
    const auto& val = fd.val;

    sr.cap["pretrained"] = cap_eval(data.test, pre_test);

    const auto grad = transfer::score_subgraphs(pre, samples, cfg.rho, cfg.score_mode);
    sr.grad_selected = grad.selected;
    std::map<std::string, models::TaskModel> tuned;
    for (const char* name : kStrategies) {
      const std::string s = name;
      if (s != "GradFreeze" && !cfg.sampling) continue;
      transfer::FinetunePlan plan = grad;
      if (s == "GradUpdate") plan.freeze = nn::FreezeMask::none();
      if (s == "RandFreeze") plan = transfer::random_plan(samples.size(), cfg.rho, sr.seed ^ 0x9e3779b97f4a7c15ULL);
      auto r = transfer::finetune(pre, plan, samples, val, ft);
      sr.cap[s] = cap_eval(data.test, caps_for(r.model, data.test));
      sr.curves[s] = r.log;
      save_log(dir, s, r.log);
      if (!dir.empty()) models::save_model(dir + "/" + s + ".pgck", r.model);
      tuned.emplace(s, std::move(r.model));
    }

    if (cfg.variants) {
      const auto& cap = tuned.at("GradFreeze");
      // woP: same budget and selection rule, starting from a fresh model.
      auto fresh = models::make_model(models::Task::Cap, pre.schema, ft);
      transfer::center_output(fresh.params, samples);
      auto wop_plan = transfer::score_subgraphs(fresh, samples, cfg.rho, cfg.score_mode);
      wop_plan.freeze = nn::FreezeMask::none();
      auto wop = transfer::finetune(fresh, wop_plan, samples, val, ft);
      sr.cap["woP"] = cap_eval(data.test, caps_for(wop.model, data.test));
      sr.curves["woP"] = wop.log;
      save_log(dir, "woP", wop.log);

      // Calibration models from the train split with the fine-tuned caps.
      auto corpus = make_calib_corpus(data.train, cap, cfg.clock, cfg.activity);
      nn::TrainConfig cc = cfg.train;
      cc.epochs = cfg.calib_epochs;
      cc.seed = sr.seed;
      Calibrators cal{transfer::train_calibration(models::Task::AT, corpus.at, cc).model,
                      transfer::train_calibration(models::Task::Power, corpus.power, cc).model};
      corpus.at.clear();
      corpus.power.clear();
      Surrogate sur = random_surrogate(sr.seed);
      train_surrogate(sur, surrogate_examples(data.train, corpus.caps), cfg.clock, cfg.surrogate_epochs,
                      kSurrogateLr);
      if (!dir.empty()) {
        models::save_model(dir + "/calib_at.pgck", cal.at);
        models::save_model(dir + "/calib_power.pgck", cal.power);
        models::save_model(dir + "/woP.pgck", wop.model);
        text::write_file(dir + "/surrogate.json", to_json(sur).dump(2) + "\n");
      }

      const CapSet full_caps = caps_for(cap, data.test);
      const CapSet wop_caps = caps_for(wop.model, data.test);
      std::vector<sta::TimingPowerReport> raw, raw_wop, sur_at;
      for (std::size_t i = 0; i < data.test.size(); ++i) {
        const auto& d = data.test[i];
        raw.push_back(annotate(d, full_caps[i], cfg));
        raw_wop.push_back(annotate(d, wop_caps[i], cfg));
        auto s = d.pre;
        s.source = sta::Annotation::Pspef;
        s.pins = propagate(sur, d.netlist, full_caps[i], cfg.clock);
        sur_at.push_back(std::move(s));
      }
      const auto final = calibrate(cal, data.test, full_caps, raw);
      const auto final_wop = calibrate(cal, data.test, wop_caps, raw_wop);
      sr.at["full"] = at_eval(data.test, final);
      sr.at["woP"] = at_eval(data.test, final_wop);
      sr.at["woE"] = at_eval(data.test, sur_at);
      sr.at["woC"] = at_eval(data.test, raw);
      sr.power["full"] = power_eval(data.test, final);
      sr.power["woP"] = power_eval(data.test, final_wop);
      sr.power["woC"] = power_eval(data.test, raw);
    }
    rep.seeds.push_back(std::move(sr));
  }
  rep.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return rep;
}

double TableRow::mean() const {
  if (values.empty()) return std::nan("");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

namespace {

template <typename Get>
TableRow row(const ExperimentReport& r, const std::string& name, Get&& get) {
  TableRow t{name, {}};
  for (const auto& s : r.seeds) {
    if (auto v = get(s)) t.values.push_back(*v);
  }
  return t;
}

std::optional<double> lookup(const std::map<std::string, metrics::EvalResult>& m, const std::string& k,
                             double metrics::EvalResult::*field) {
  const auto it = m.find(k);
  if (it == m.end()) return std::nullopt;
  return it->second.*field;
}

nlohmann::ordered_json row_json(const TableRow& t) {
  nlohmann::ordered_json j;
  j["per_seed"] = t.values;
  if (t.values.empty()) {
    j["mean"] = nullptr;
  } else {
    j["mean"] = t.mean();
  }
  return j;
}

std::string cell(const TableRow& t) { return t.values.empty() ? "NA" : text::format_g6(t.mean()); }

std::vector<std::string> cap_names(const ExperimentReport& r) {
  std::vector<std::string> names = {"pretrained", "GradFreeze", "GradUpdate", "RandFreeze", "woP"};
  std::erase_if(names, [&](const std::string& n) {
    return std::none_of(r.seeds.begin(), r.seeds.end(), [&](const SeedResult& s) { return s.cap.count(n) > 0; });
  });
  return names;
}

}  // namespace

std::vector<TableRow> cap_mape_rows(const ExperimentReport& r) {
  std::vector<TableRow> rows;
  for (const auto& n : cap_names(r)) {
    rows.push_back(row(r, n, [&](const SeedResult& s) { return lookup(s.cap, n, &metrics::EvalResult::mape); }));
  }
  return rows;
}

std::vector<TableRow> at_r2_rows(const ExperimentReport& r) {
  std::vector<TableRow> rows;
  for (const char* n : kVariants) {
    rows.push_back(
        row(r, n, [&](const SeedResult& s) { return lookup(s.at, n, &metrics::EvalResult::mean_design_r2); }));
  }
  return rows;
}

nlohmann::ordered_json ablation_table(const ExperimentReport& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const char* n : kVariants) {
    const std::string cap_key = std::string(n) == "woP" ? "woP" : "GradFreeze";
    nlohmann::ordered_json j;
    j["variant"] = n;
    j["at_r2"] = row_json(
        row(r, n, [&](const SeedResult& s) { return lookup(s.at, n, &metrics::EvalResult::mean_design_r2); }));
    j["at_r2_pooled"] = row_json(row(r, n, [&](const SeedResult& s) { return lookup(s.at, n, &metrics::EvalResult::r2); }));
    j["power_total_err_pct"] = row_json(
        row(r, n, [&](const SeedResult& s) { return lookup(s.power, n, &metrics::EvalResult::total_rel_err); }));
    j["cap_mape_pct"] = row_json(
        row(r, n, [&](const SeedResult& s) { return lookup(s.cap, cap_key, &metrics::EvalResult::mape); }));
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["seeds"] = r.seeds.size();
  out["rows"] = std::move(rows);
  return out;
}

std::string ablation_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "variant,at_r2,at_r2_pooled,power_total_err_pct,cap_mape_pct\n";
  for (const char* n : kVariants) {
    const std::string cap_key = std::string(n) == "woP" ? "woP" : "GradFreeze";
    os << n << ','
       << cell(row(r, n, [&](const SeedResult& s) { return lookup(s.at, n, &metrics::EvalResult::mean_design_r2); }))
       << ',' << cell(row(r, n, [&](const SeedResult& s) { return lookup(s.at, n, &metrics::EvalResult::r2); }))
       << ','
       << cell(row(r, n, [&](const SeedResult& s) { return lookup(s.power, n, &metrics::EvalResult::total_rel_err); }))
       << ','
       << cell(row(r, n, [&](const SeedResult& s) { return lookup(s.cap, cap_key, &metrics::EvalResult::mape); }))
       << '\n';
  }
  return os.str();
}

nlohmann::ordered_json sampling_table(const ExperimentReport& r) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& n : cap_names(r)) {
    nlohmann::ordered_json j;
    j["strategy"] = n;
    j["cap_mape_pct"] =
        row_json(row(r, n, [&](const SeedResult& s) { return lookup(s.cap, n, &metrics::EvalResult::mape); }));
    j["cap_mape_design_mean_pct"] = row_json(
        row(r, n, [&](const SeedResult& s) { return lookup(s.cap, n, &metrics::EvalResult::mean_design_mape); }));
    rows.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["seeds"] = r.seeds.size();
  out["rows"] = std::move(rows);
  return out;
}

std::string sampling_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "strategy,seed,cap_mape_pct,cap_mape_design_mean_pct\n";
  for (const auto& n : cap_names(r)) {
    for (const auto& s : r.seeds) {
      const auto it = s.cap.find(n);
      if (it == s.cap.end()) continue;
      os << n << ',' << s.seed << ',' << text::format_g6(it->second.mape) << ','
         << text::format_g6(it->second.mean_design_mape) << '\n';
    }
  }
  return os.str();
}

std::string curves_csv(const ExperimentReport& r) {
  std::ostringstream os;
  os << "strategy,seed,epoch,train_loss,val_loss\n";
  for (const auto& s : r.seeds) {
    for (const auto& [name, log] : s.curves) {
      for (const auto& e : log.epochs) {
        os << name << ',' << s.seed << ',' << e.epoch << ',' << text::format_g6(e.train_loss) << ','
           << text::format_g6(e.val_loss) << '\n';
      }
    }
  }
  return os.str();
}

std::vector<BenchRow> bench(const SuiteData& data, const FlowModels& m, const FlowConfig& cfg) {
  std::vector<BenchRow> rows;
  for (const auto& d : data.test) {
    const auto r = infer(d.netlist, m, cfg);
    rows.push_back({d.entry.name, d.netlist.cells().size(), d.netlist.pins().size(), r.runtime});
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "design,cells,pins,step1_s,step2_s,step3_s,total_s\n";
  for (const auto& b : rows) {
    os << b.design << ',' << b.cells << ',' << b.pins << ',' << text::format_g6(b.runtime.step1_s) << ','
       << text::format_g6(b.runtime.step2_s) << ',' << text::format_g6(b.runtime.step3_s) << ','
       << text::format_g6(b.runtime.total()) << '\n';
  }
  return os.str();
}

}  // namespace paragate::pipeline
