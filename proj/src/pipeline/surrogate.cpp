// SPDX-License-Identifier: Apache-2.0
#include "paragate/pipeline/surrogate.hpp"

#include <cmath>
#include <random>

namespace paragate::pipeline {

using netlist::kNone;
using netlist::PinId;
using netlist::PinKind;

namespace {

constexpr double kScalePs = 100.0;

struct Trace {
  std::vector<sta::PinTiming> t;
  std::vector<std::uint32_t> at_arc;  // winning arc per output pin
  std::vector<std::uint32_t> sl_arc;
  std::vector<double> load;
  netlist::Levelization lv;
};

std::array<double, 4> delay_terms(const netlist::DelayArc& a, double slew_in, double load) {
  return {a.d0, a.k_slew * slew_in, a.k_load * load, 1.0};
}

std::array<double, 4> slew_terms(const netlist::DelayArc& a, double slew_in, double load) {
  return {a.s0, a.s_slew * slew_in, a.s_load * load, 1.0};
}

double dot(const std::array<double, 4>& w, const std::array<double, 4>& x) {
  return w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + w[3] * x[3];
}

Trace run(const Surrogate& s, const netlist::Netlist& n, const std::unordered_map<std::string, double>& caps,
          const sta::ClockSpec& clock) {
  Trace tr;
  tr.lv = netlist::levelize(n);
  std::vector<double> wire(n.nets().size(), 0.0);
  for (std::size_t k = 0; k < n.nets().size(); ++k) {
    if (auto it = caps.find(n.nets()[k].name); it != caps.end()) wire[k] = it->second;
  }
  tr.load = sta::net_loads(n, wire);
  tr.t.assign(n.pins().size(), sta::PinTiming{});
  tr.at_arc.assign(n.pins().size(), 0);
  tr.sl_arc.assign(n.pins().size(), 0);
  const double src_slew = clock.input_slew_ps;
  for (PinId p : tr.lv.order) {
    const auto& pin = n.pins()[p];
    auto& t = tr.t[p];
    if (pin.kind == PinKind::PrimaryInput) {
      t = {0.0, src_slew};
    } else if (pin.kind == PinKind::CellInput || pin.kind == PinKind::PrimaryOutput) {
      const PinId drv = pin.net == kNone ? kNone : n.nets()[pin.net].driver();
      t = drv == kNone ? sta::PinTiming{0.0, src_slew} : tr.t[drv];
    } else {
      const auto& def = n.cell_def(pin.inst);
      if (def.is_sequential) {
        t = {0.0, src_slew};
        continue;
      }
      const double c = pin.net == kNone ? 0.0 : tr.load[pin.net];
      const auto& ip = n.cells()[pin.inst].pins;
      for (std::uint32_t a = 0; a < def.arcs.size(); ++a) {
        const auto& arc = def.arcs[a];
        const auto& in = tr.t[ip[arc.from_pin]];
        const double at = in.arrival_ps + dot(s.w, delay_terms(arc, in.slew_ps, c));
        const double sl = dot(s.u, slew_terms(arc, in.slew_ps, c));
        if (a == 0 || at > t.arrival_ps) {
          t.arrival_ps = at;
          tr.at_arc[p] = a;
        }
        if (a == 0 || sl > t.slew_ps) {
          t.slew_ps = sl;
          tr.sl_arc[p] = a;
        }
      }
    }
  }
  return tr;
}

}  // namespace

Surrogate exact_surrogate() { return {{1.0, 1.0, 1.0, 0.0}, {1.0, 1.0, 1.0, 0.0}}; }

Surrogate random_surrogate(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(0.5, 1.5);
  Surrogate s;
  for (int k = 0; k < 3; ++k) s.w[k] = d(rng);
  for (int k = 0; k < 3; ++k) s.u[k] = d(rng);
  return s;
}

nlohmann::ordered_json to_json(const Surrogate& s) {
  nlohmann::ordered_json j;
  j["delay_weights"] = s.w;
  j["slew_weights"] = s.u;
  return j;
}

Surrogate surrogate_from_json(const nlohmann::json& j) {
  Surrogate s;
  s.w = j.at("delay_weights").get<std::array<double, 4>>();
  s.u = j.at("slew_weights").get<std::array<double, 4>>();
  return s;
}

std::vector<sta::PinTiming> propagate(const Surrogate& s, const netlist::Netlist& n,
                                      const std::unordered_map<std::string, double>& caps,
                                      const sta::ClockSpec& clock) {
  return run(s, n, caps, clock).t;
}

SurrogateLog train_surrogate(Surrogate& s, const std::vector<SurrogateExample>& data, const sta::ClockSpec& clock,
                             std::size_t epochs, double lr) {
  SurrogateLog log;
  std::array<double, 8> m{}, v{};
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t count = 0;
  for (const auto& ex : data) count += ex.pins.size();
  if (count == 0) return log;
  for (std::size_t epoch = 0; epoch <= epochs; ++epoch) {
    std::array<double, 4> gw{}, gu{};
    double loss = 0.0;
    for (const auto& ex : data) {
      const auto& n = *ex.netlist;
      const Trace tr = run(s, n, *ex.caps, clock);
      std::vector<double> gat(n.pins().size(), 0.0), gsl(n.pins().size(), 0.0);
      for (std::size_t k = 0; k < ex.pins.size(); ++k) {
        const double r = (tr.t[ex.pins[k]].arrival_ps - ex.target[k]) / kScalePs;
        loss += r * r;
        gat[ex.pins[k]] += 2.0 * r / kScalePs;
      }
      for (auto it = tr.lv.order.rbegin(); it != tr.lv.order.rend(); ++it) {
        const PinId p = *it;
        const auto& pin = n.pins()[p];
        if (gat[p] == 0.0 && gsl[p] == 0.0) continue;
        if (pin.kind == PinKind::CellInput || pin.kind == PinKind::PrimaryOutput) {
          const PinId drv = pin.net == kNone ? kNone : n.nets()[pin.net].driver();
          if (drv != kNone) {
            gat[drv] += gat[p];
            gsl[drv] += gsl[p];
          }
        } else if (pin.kind == PinKind::CellOutput && !n.cell_def(pin.inst).is_sequential) {
          const auto& def = n.cell_def(pin.inst);
          const auto& ip = n.cells()[pin.inst].pins;
          const double c = pin.net == kNone ? 0.0 : tr.load[pin.net];
          const auto& a = def.arcs[tr.at_arc[p]];
          const PinId ia = ip[a.from_pin];
          const auto phi = delay_terms(a, tr.t[ia].slew_ps, c);
          for (int k = 0; k < 4; ++k) gw[k] += gat[p] * phi[k];
          gat[ia] += gat[p];
          gsl[ia] += gat[p] * s.w[1] * a.k_slew;
          const auto& b = def.arcs[tr.sl_arc[p]];
          const PinId ib = ip[b.from_pin];
          const auto psi = slew_terms(b, tr.t[ib].slew_ps, c);
          for (int k = 0; k < 4; ++k) gu[k] += gsl[p] * psi[k];
          gsl[ib] += gsl[p] * s.u[1] * b.s_slew;
        }
      }
    }
    log.loss.push_back(loss / static_cast<double>(count));
    if (epoch == epochs) break;
    const double t = static_cast<double>(epoch + 1);
    for (int k = 0; k < 8; ++k) {
      const double g = (k < 4 ? gw[k] : gu[k - 4]) / static_cast<double>(count);
      m[k] = b1 * m[k] + (1 - b1) * g;
      v[k] = b2 * v[k] + (1 - b2) * g * g;
      const double step = lr * (m[k] / (1 - std::pow(b1, t))) / (std::sqrt(v[k] / (1 - std::pow(b2, t))) + eps);
      (k < 4 ? s.w[k] : s.u[k - 4]) -= step;
    }
  }
  return log;
}

}  // namespace paragate::pipeline
