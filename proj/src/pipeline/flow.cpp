// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "paragate/common/text.hpp"
#include "paragate/pipeline/pipeline.hpp"

namespace paragate::pipeline {

namespace fs = std::filesystem;

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::Full: return "full";
    case Mode::NoPretrain: return "no-pretrain";
    case Mode::NoEda: return "no-eda";
    case Mode::NoCalib: return "no-calib";
  }
  return "?";
}

Mode mode_from_name(const std::string& s) {
  for (Mode m : {Mode::Full, Mode::NoPretrain, Mode::NoEda, Mode::NoCalib}) {
    if (s == mode_name(m)) return m;
  }
  throw PipelineError(PipelineErrorKind::BadConfig, "unknown mode '" + s + "'");
}

void FlowConfig::validate() const {
  auto need = [](const std::string& path, const char* what) {
    if (path.empty()) throw PipelineError(PipelineErrorKind::MissingFile, std::string(what) + " path not given");
    if (!fs::exists(path)) throw PipelineError(PipelineErrorKind::MissingFile, std::string(what) + " '" + path + "' not found");
  };
  if (!library.empty()) need(library, "library");
  need(cap_model, "cap model");
  if (mode == Mode::Full || mode == Mode::NoPretrain) {
    need(at_model, "AT model");
    need(power_model, "power model");
  }
  if (mode == Mode::NoEda) need(surrogate, "surrogate");
  if (!(clock.period_ps > 0.0)) throw PipelineError(PipelineErrorKind::BadConfig, "clock period must be positive");
}

nlohmann::ordered_json to_json(const FlowConfig& c) {
  nlohmann::ordered_json j;
  j["mode"] = mode_name(c.mode);
  j["library"] = c.library;
  j["cap_model"] = c.cap_model;
  j["at_model"] = c.at_model;
  j["power_model"] = c.power_model;
  j["surrogate"] = c.surrogate;
  j["clock_period_ps"] = c.clock.period_ps;
  j["input_slew_ps"] = c.clock.input_slew_ps;
  j["default_toggle"] = c.activity.default_toggle;
  j["seed"] = c.seed;
  return j;
}

FlowModels load_models(const FlowConfig& c) {
  c.validate();
  FlowModels m;
  m.cap = models::load_model(c.cap_model);
  if (m.cap.task != models::Task::Cap) throw PipelineError(PipelineErrorKind::BadConfig, "'" + c.cap_model + "' is not a cap model");
  if (!c.at_model.empty() && fs::exists(c.at_model)) m.at = models::load_model(c.at_model);
  if (!c.power_model.empty() && fs::exists(c.power_model)) m.power = models::load_model(c.power_model);
  if (m.at && m.at->task != models::Task::AT) throw PipelineError(PipelineErrorKind::BadConfig, "'" + c.at_model + "' is not an AT model");
  if (m.power && m.power->task != models::Task::Power) {
    throw PipelineError(PipelineErrorKind::BadConfig, "'" + c.power_model + "' is not a power model");
  }
  if (!c.surrogate.empty() && fs::exists(c.surrogate)) {
    m.surrogate = surrogate_from_json(nlohmann::json::parse(text::read_file(c.surrogate)));
  }
  return m;
}

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

template <typename F>
auto step(PipelineErrorKind kind, const char* label, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const PipelineError&) {
    throw;
  } catch (const std::exception& e) {
    throw PipelineError(kind, std::string(label) + ": " + e.what());
  }
}

}  // namespace

InferResult infer(const netlist::Netlist& n, const FlowModels& m, const FlowConfig& cfg, const std::string& run_dir) {
  InferResult r;
  r.design = n.module_name();
  const bool write = !run_dir.empty();
  if (write) {
    fs::create_directories(run_dir + "/inputs");
    text::write_file(run_dir + "/inputs/netlist.v", netlist::write_netlist(n));
    text::write_file(run_dir + "/inputs/flow.json", to_json(cfg).dump(2) + "\n");
  }
  sta::StaOptions opt;
  opt.clock = cfg.clock;

  auto t0 = Clock::now();
  step(PipelineErrorKind::Step1, "step 1 (capacitance prediction)", [&] {
    r.pre = sta::analyze(n, nullptr, opt, cfg.activity, sta::Annotation::None);
    const auto g = graph::build_pingraph(n, r.pre);
    r.caps = models::predict_caps(m.cap, g, n);
    return 0;
  });
  r.runtime.step1_s = since(t0);
  if (write) sta::write_report(run_dir + "/reports/pre", n, r.pre);

  t0 = Clock::now();
  step(PipelineErrorKind::Step2, "step 2 (back-annotated analysis)", [&] {
    auto ps = spef::write_pspef(n, r.caps);
    r.pspef = std::move(ps.text);
    if (write) {
      fs::create_directories(run_dir + "/pspef");
      text::write_file(run_dir + "/pspef/" + r.design + ".spef", r.pspef);
    }
    if (cfg.mode == Mode::NoEda) {
      if (!m.surrogate) throw PipelineError(PipelineErrorKind::Step2, "step 2 (surrogate): no surrogate weights loaded");
      r.raw = r.pre;
      r.raw.source = sta::Annotation::Pspef;
      r.raw.pins = propagate(*m.surrogate, n, r.caps, cfg.clock);
      r.raw.cells.clear();
      r.raw.total_power_nw = 0.0;
      r.has_power = false;
    } else {
      const auto doc = spef::read_spef(r.pspef);
      r.raw = sta::analyze(n, &doc, opt, cfg.activity, sta::Annotation::Pspef);
    }
    return 0;
  });
  r.runtime.step2_s = since(t0);
  if (write) sta::write_report(run_dir + "/reports/raw", n, r.raw);

  t0 = Clock::now();
  step(PipelineErrorKind::Step3, "step 3 (calibration)", [&] {
    r.final = r.raw;
    if (cfg.mode == Mode::Full || cfg.mode == Mode::NoPretrain) {
      if (!m.at || !m.power) throw PipelineError(PipelineErrorKind::Step3, "step 3 (calibration): models not loaded");
      const auto dual = models::build_dual_graph(n, r.pre, r.raw, r.caps);
      r.final = models::apply_calibration(*m.at, dual, n, r.raw);
      r.final = models::apply_calibration(*m.power, dual, n, r.final);
    }
    return 0;
  });
  r.runtime.step3_s = since(t0);
  if (write) {
    sta::write_report(run_dir + "/reports/final", n, r.final);
    nlohmann::ordered_json rt;
    rt["design"] = r.design;
    rt["step1_s"] = r.runtime.step1_s;
    rt["step2_s"] = r.runtime.step2_s;
    rt["step3_s"] = r.runtime.step3_s;
    rt["total_s"] = r.runtime.total();
    text::write_file(run_dir + "/runtime.json", rt.dump(2) + "\n");
  }
  return r;
}

metrics::DesignEval evaluate_at(const netlist::Netlist& n, const sta::TimingPowerReport& pred,
                                const sta::TimingPowerReport& truth, std::vector<double>* p, std::vector<double>* t) {
  std::vector<double> pv, tv;
  for (auto pin : models::at_mask_pins(n)) {
    pv.push_back(pred.pins.at(pin).arrival_ps);
    tv.push_back(truth.pins.at(pin).arrival_ps);
  }
  auto d = metrics::evaluate_design(n.module_name(), pv, tv, 0.0, 0.0);
  if (p) *p = std::move(pv);
  if (t) *t = std::move(tv);
  return d;
}

metrics::DesignEval evaluate_power(const netlist::Netlist& n, const sta::TimingPowerReport& pred,
                                   const sta::TimingPowerReport& truth, std::vector<double>* p, std::vector<double>* t) {
  if (pred.cells.size() != n.cells().size() || truth.cells.size() != n.cells().size()) {
    throw PipelineError(PipelineErrorKind::BadConfig, "power report does not cover design '" + n.module_name() + "'");
  }
  std::vector<double> pv, tv;
  for (std::size_t c = 0; c < n.cells().size(); ++c) {
    pv.push_back(pred.cells[c].total_nw);
    tv.push_back(truth.cells[c].total_nw);
  }
  auto d = metrics::evaluate_design(n.module_name(), pv, tv, pred.total_power_nw, truth.total_power_nw);
  if (p) *p = std::move(pv);
  if (t) *t = std::move(tv);
  return d;
}

metrics::DesignEval evaluate_caps(const std::string& design, const std::unordered_map<std::string, double>& caps,
                                  const spef::SpefDocument& golden, std::vector<double>* p, std::vector<double>* t) {
  std::vector<double> pv, tv;
  double pt = 0.0, tt = 0.0;
  for (const auto& d : golden.dnets) {
    const auto it = caps.find(d.net);
    pv.push_back(it == caps.end() ? 0.0 : it->second);
    tv.push_back(d.total_cap_ff);
    pt += pv.back();
    tt += tv.back();
  }
  auto d = metrics::evaluate_design(design, pv, tv, pt, tt);
  if (p) *p = std::move(pv);
  if (t) *t = std::move(tv);
  return d;
}

void write_eval(const std::string& run_dir, const netlist::Netlist& n, const InferResult& r,
                const sta::TimingPowerReport& truth) {
  fs::create_directories(run_dir + "/eval");
  auto emit = [&](const std::string& name, const metrics::DesignEval& d, const std::vector<double>& p,
                  const std::vector<double>& t) {
    metrics::EvalResult e = metrics::combine({d}, {p}, {t});
    text::write_file(run_dir + "/eval/" + name + ".json", metrics::to_json(e).dump(2) + "\n");
    text::write_file(run_dir + "/eval/" + name + ".csv", metrics::designs_csv(e));
  };
  std::vector<double> p, t;
  for (const auto& [name, rep] : {std::pair<std::string, const sta::TimingPowerReport*>{"at_raw", &r.raw},
                                  {"at", &r.final}}) {
    const auto d = evaluate_at(n, *rep, truth, &p, &t);
    emit(name, d, p, t);
  }
  if (r.has_power) {
    for (const auto& [name, rep] : {std::pair<std::string, const sta::TimingPowerReport*>{"power_raw", &r.raw},
                                    {"power", &r.final}}) {
      const auto d = evaluate_power(n, *rep, truth, &p, &t);
      emit(name, d, p, t);
    }
  }
}

}  // namespace paragate::pipeline
