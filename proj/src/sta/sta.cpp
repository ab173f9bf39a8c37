// SPDX-License-Identifier: Apache-2.0
#include "paragate/sta/sta.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "paragate/common/text.hpp"

namespace paragate::sta {

using netlist::kNone;
using netlist::Netlist;
using netlist::PinId;
using netlist::PinKind;

const char* annotation_name(Annotation a) {
  switch (a) {
    case Annotation::None:
      return "none";
    case Annotation::Pspef:
      return "pspef";
    case Annotation::GoldenSpef:
      return "golden-spef";
  }
  return "none";
}

std::vector<double> wire_caps(const Netlist& n, const spef::SpefDocument* doc, bool strict, std::size_t* missing) {
  std::vector<double> caps(n.nets().size(), 0.0);
  std::size_t miss = 0;
  if (doc) {
    auto annotated = spef::wire_caps_for(*doc, n);
    for (std::size_t i = 0; i < caps.size(); ++i) {
      if (annotated[i]) {
        caps[i] = *annotated[i];
      } else if (strict) {
        throw StaError(StaErrorKind::UnannotatedNet, "net '" + n.nets()[i].name + "' has no D_NET");
      } else {
        ++miss;
      }
    }
  }
  if (missing) *missing = miss;
  return caps;
}

std::vector<double> net_loads(const Netlist& n, const std::vector<double>& wire_cap) {
  std::vector<double> load(n.nets().size(), 0.0);
  for (std::size_t i = 0; i < load.size(); ++i) {
    double c = 0.0;
    for (PinId s : n.nets()[i].sinks) c += n.pin_capacitance(s);
    load[i] = c + wire_cap[i];
  }
  return load;
}

TimingPowerReport run_sta(const Netlist& n, const spef::SpefDocument* doc, const StaOptions& opt, Annotation tag) {
  TimingPowerReport r;
  r.source = tag;
  const auto lv = netlist::levelize(n);
  const auto load = net_loads(n, wire_caps(n, doc, opt.strict, &r.unannotated_nets));
  r.pins.assign(n.pins().size(), PinTiming{});
  const double src_slew = opt.clock.input_slew_ps;

  for (PinId p : lv.order) {
    const auto& pin = n.pins()[p];
    PinTiming& t = r.pins[p];
    switch (pin.kind) {
      case PinKind::PrimaryInput:
        t = {0.0, src_slew};
        break;
      case PinKind::CellInput:
      case PinKind::PrimaryOutput: {
        const PinId drv = pin.net == kNone ? kNone : n.nets()[pin.net].driver();
        t = drv == kNone ? PinTiming{0.0, src_slew} : r.pins[drv];
        break;
      }
      case PinKind::CellOutput: {
        const auto& def = n.cell_def(pin.inst);
        if (def.is_sequential) {
          // Launch points start at zero under the ideal clock.
          t = {0.0, src_slew};
          break;
        }
        const double c = pin.net == kNone ? 0.0 : load[pin.net];
        const auto& inst_pins = n.cells()[pin.inst].pins;
        bool first = true;
        for (const auto& arc : def.arcs) {
          const PinTiming& in = r.pins[inst_pins[arc.from_pin]];
          const double at = in.arrival_ps + arc.delay(in.slew_ps, c);
          const double sl = arc.slew(in.slew_ps, c);
          if (first) {
            t = {at, sl};
            first = false;
          } else {
            t.arrival_ps = std::max(t.arrival_ps, at);
            t.slew_ps = std::max(t.slew_ps, sl);
          }
        }
        break;
      }
    }
  }
  return r;
}

void run_power(const Netlist& n, const spef::SpefDocument* doc, const Activity& act, const ClockSpec& clock,
               TimingPowerReport& r) {
  const auto load = net_loads(n, wire_caps(n, doc, false));
  const double f = act.clock_hz.value_or(clock.frequency_hz());
  const double v = act.vdd.value_or(n.library().voltage());
  auto toggle = [&](netlist::NetId net) {
    double a = act.default_toggle;
    if (auto it = act.per_net.find(n.nets()[net].name); it != act.per_net.end()) a = it->second;
    if (!(a >= 0.0 && a <= 1.0)) throw StaError(StaErrorKind::BadActivity, "toggle rate of net '" + n.nets()[net].name + "' outside [0,1]");
    return a;
  };
  if (!(act.default_toggle >= 0.0 && act.default_toggle <= 1.0)) {
    throw StaError(StaErrorKind::BadActivity, "default toggle rate outside [0,1]");
  }
  r.cells.assign(n.cells().size(), CellPower{});
  r.total_power_nw = 0.0;
  // fF * V^2 * Hz and fJ * Hz are 1e-15 W = 1e-6 nW.
  constexpr double kToNw = 1.0e-6;
  for (netlist::InstId i = 0; i < n.cells().size(); ++i) {
    const auto& def = n.cell_def(i);
    const PinId out = n.cells()[i].pins[def.output_pin()];
    const auto net = n.pins()[out].net;
    CellPower& cp = r.cells[i];
    if (net != kNone) {
      const double a = toggle(net);
      cp.switching_nw = 0.5 * a * load[net] * v * v * f * kToNw;
      cp.internal_nw = a * f * def.internal_energy_fj * kToNw;
    }
    cp.leakage_nw = def.leakage_nw;
    cp.total_nw = cp.switching_nw + cp.internal_nw + cp.leakage_nw;
    r.total_power_nw += cp.total_nw;
  }
}

TimingPowerReport analyze(const Netlist& n, const spef::SpefDocument* doc, const StaOptions& opt, const Activity& act,
                          Annotation tag) {
  auto r = run_sta(n, doc, opt, tag);
  run_power(n, doc, act, opt.clock, r);
  return r;
}

FeatureColumns report_features(const TimingPowerReport& r) {
  FeatureColumns f;
  f.pin_columns.assign(2, std::vector<double>(r.pins.size()));
  for (std::size_t i = 0; i < r.pins.size(); ++i) {
    f.pin_columns[0][i] = r.pins[i].arrival_ps;
    f.pin_columns[1][i] = r.pins[i].slew_ps;
  }
  f.cell_columns.assign(3, std::vector<double>(r.cells.size()));
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    f.cell_columns[0][i] = r.cells[i].switching_nw;
    f.cell_columns[1][i] = r.cells[i].internal_nw;
    f.cell_columns[2][i] = r.cells[i].leakage_nw;
  }
  return f;
}

std::string pins_csv(const Netlist& n, const TimingPowerReport& r) {
  std::ostringstream os;
  os << "pin,arrival_ps,slew_ps\n";
  for (PinId p = 0; p < r.pins.size(); ++p) {
    os << n.pin_name(p) << "," << text::format_exact(r.pins[p].arrival_ps) << ","
       << text::format_exact(r.pins[p].slew_ps) << "\n";
  }
  return os.str();
}

std::string cells_csv(const Netlist& n, const TimingPowerReport& r) {
  std::ostringstream os;
  os << "cell,switching_nw,internal_nw,leakage_nw,total_nw\n";
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    const auto& c = r.cells[i];
    os << n.cells()[i].name << "," << text::format_exact(c.switching_nw) << "," << text::format_exact(c.internal_nw)
       << "," << text::format_exact(c.leakage_nw) << "," << text::format_exact(c.total_nw) << "\n";
  }
  return os.str();
}

std::string summary_json(const Netlist& n, const TimingPowerReport& r) {
  double worst = 0.0;
  for (const auto& p : r.pins) worst = std::max(worst, p.arrival_ps);
  nlohmann::ordered_json j;
  j["design"] = n.module_name();
  j["annotation"] = annotation_name(r.source);
  j["pins"] = r.pins.size();
  j["cells"] = r.cells.size();
  j["max_arrival_ps"] = worst;
  j["total_power_nw"] = r.total_power_nw;
  j["unannotated_nets"] = r.unannotated_nets;
  return j.dump(2) + "\n";
}

void write_report(const std::string& dir, const Netlist& n, const TimingPowerReport& r) {
  std::filesystem::create_directories(dir);
  text::write_file(dir + "/pins.csv", pins_csv(n, r));
  text::write_file(dir + "/cells.csv", cells_csv(n, r));
  text::write_file(dir + "/summary.json", summary_json(n, r));
}

namespace {

std::vector<std::vector<double>> read_csv_numbers(const std::string& path, std::size_t cols,
                                                  std::vector<std::string>* keys) {
  const std::string body = text::read_file(path);
  std::vector<std::vector<double>> rows;
  std::istringstream in(body);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (text::trim(line).empty()) continue;
    std::vector<std::string_view> f;
    std::string_view sv(line);
    std::size_t start = 0;
    for (std::size_t i = 0; i <= sv.size(); ++i) {
      if (i == sv.size() || sv[i] == ',') {
        f.push_back(sv.substr(start, i - start));
        start = i + 1;
      }
    }
    if (f.size() != cols + 1) throw Error("malformed row in " + path + ": " + line);
    std::vector<double> row(cols);
    for (std::size_t c = 0; c < cols; ++c) {
      if (!text::parse_double(text::trim(f[c + 1]), row[c])) throw Error("bad number in " + path + ": " + line);
    }
    if (keys) keys->emplace_back(f[0]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TimingPowerReport read_report(const std::string& dir, const Netlist& n) {
  TimingPowerReport r;
  std::vector<std::string> pin_keys;
  auto pins = read_csv_numbers(dir + "/pins.csv", 2, &pin_keys);
  if (pins.size() != n.pins().size()) throw StaError(StaErrorKind::MissingPin, "pin report does not cover the netlist");
  r.pins.resize(pins.size());
  for (std::size_t i = 0; i < pins.size(); ++i) {
    auto id = n.find_pin(pin_keys[i]);
    if (!id) throw StaError(StaErrorKind::MissingPin, "unknown pin '" + pin_keys[i] + "' in report");
    r.pins[*id] = {pins[i][0], pins[i][1]};
  }
  auto cells = read_csv_numbers(dir + "/cells.csv", 4, nullptr);
  r.cells.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    r.cells[i] = {cells[i][0], cells[i][1], cells[i][2], cells[i][3]};
    r.total_power_nw += cells[i][3];
  }
  return r;
}

}  // namespace paragate::sta
