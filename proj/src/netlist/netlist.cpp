// SPDX-License-Identifier: Apache-2.0
#include "paragate/netlist/netlist.hpp"

#include <algorithm>

namespace paragate::netlist {

const PinDef* Netlist::pin_def(PinId pin) const {
  const Pin& p = pins_[pin];
  if (p.is_port()) return nullptr;
  return &cell_def(p.inst).pins[p.lib_pin];
}

double Netlist::pin_capacitance(PinId pin) const {
  const PinDef* d = pin_def(pin);
  return d ? d->capacitance_ff : 0.0;
}

std::string Netlist::pin_name(PinId pin) const {
  const Pin& p = pins_[pin];
  if (p.is_port()) return ports_[p.lib_pin].name;
  return cells_[p.inst].name + ":" + cell_def(p.inst).pins[p.lib_pin].name;
}

std::optional<NetId> Netlist::find_net(std::string_view name) const {
  auto it = net_index_.find(std::string(name));
  if (it == net_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<InstId> Netlist::find_instance(std::string_view name) const {
  auto it = inst_index_.find(std::string(name));
  if (it == inst_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<PinId> Netlist::find_pin(std::string_view full_name) const {
  // Instance names may contain ':' only when escaped, so split on the last one.
  auto colon = full_name.rfind(':');
  if (colon == std::string_view::npos) {
    for (const auto& port : ports_) {
      if (port.name == full_name) return port.pin;
    }
    return std::nullopt;
  }
  auto inst = find_instance(full_name.substr(0, colon));
  if (!inst) return std::nullopt;
  auto idx = cell_def(*inst).pin_index(full_name.substr(colon + 1));
  if (!idx) return std::nullopt;
  return cells_[*inst].pins[*idx];
}

std::vector<NetId> Netlist::primary_inputs() const {
  std::vector<NetId> out;
  for (const auto& p : ports_) {
    if (p.is_input) out.push_back(p.net);
  }
  return out;
}

std::vector<NetId> Netlist::primary_outputs() const {
  std::vector<NetId> out;
  for (const auto& p : ports_) {
    if (!p.is_input) out.push_back(p.net);
  }
  return out;
}

void Netlist::disconnect(PinId pin) {
  Pin& p = pins_[pin];
  if (p.net == kNone) return;
  Net& net = nets_[p.net];
  std::erase(net.drivers, pin);
  std::erase(net.sinks, pin);
  p.net = kNone;
}

void Netlist::connect(PinId pin, NetId net) {
  disconnect(pin);
  Pin& p = pins_[pin];
  p.net = net;
  auto& list = p.is_driver() ? nets_[net].drivers : nets_[net].sinks;
  list.insert(std::lower_bound(list.begin(), list.end(), pin), pin);
}

NetlistBuilder::NetlistBuilder(std::string module, std::shared_ptr<const CellLibrary> lib) {
  n_.module_ = std::move(module);
  n_.lib_ = std::move(lib);
}

NetId NetlistBuilder::add_net(const std::string& name) {
  if (auto id = find_net(name)) return *id;
  const NetId id = static_cast<NetId>(n_.nets_.size());
  n_.nets_.push_back(Net{name, {}, {}});
  n_.net_index_.emplace(name, id);
  return id;
}

NetId NetlistBuilder::add_input(const std::string& name) {
  const NetId id = add_net(name);
  port_decls_.emplace_back(name, true);
  return id;
}

NetId NetlistBuilder::add_output(const std::string& name) {
  const NetId id = add_net(name);
  port_decls_.emplace_back(name, false);
  return id;
}

std::optional<NetId> NetlistBuilder::find_net(std::string_view name) const { return n_.find_net(name); }

bool NetlistBuilder::has_instance(std::string_view name) const {
  return inst_names_.count(std::string(name)) != 0;
}

InstId NetlistBuilder::add_instance(const std::string& name, std::string_view cell,
                                    const std::vector<std::pair<std::string, NetId>>& bindings) {
  auto cid = n_.lib_->find(cell);
  if (!cid) throw NetlistError(NetlistErrorKind::UnknownCell, "unknown cell '" + std::string(cell) + "' for instance '" + name + "'");
  if (has_instance(name)) throw NetlistError(NetlistErrorKind::SyntaxError, "duplicate instance '" + name + "'");
  const CellDef& def = n_.lib_->cell(*cid);
  PendingInst pi{name, *cid, std::vector<NetId>(def.pins.size(), kNone)};
  for (const auto& [pin, net] : bindings) {
    auto idx = def.pin_index(pin);
    if (!idx) throw NetlistError(NetlistErrorKind::UnknownPin, "cell '" + def.name + "' has no pin '" + pin + "' (instance '" + name + "')");
    if (pi.pin_nets[*idx] != kNone) throw NetlistError(NetlistErrorKind::SyntaxError, "pin '" + pin + "' bound twice on '" + name + "'");
    pi.pin_nets[*idx] = net;
  }
  const InstId id = static_cast<InstId>(insts_.size());
  inst_names_.emplace(name, id);
  insts_.push_back(std::move(pi));
  return id;
}

Netlist NetlistBuilder::build() && {
  Netlist& n = n_;
  for (InstId i = 0; i < insts_.size(); ++i) {
    auto& pi = insts_[i];
    const CellDef& def = n.lib_->cell(pi.cell);
    CellInst inst{std::move(pi.name), pi.cell, {}};
    for (std::uint32_t k = 0; k < def.pins.size(); ++k) {
      const PinId pid = static_cast<PinId>(n.pins_.size());
      Pin pin;
      pin.kind = def.pins[k].direction == PinDirection::Output ? PinKind::CellOutput : PinKind::CellInput;
      pin.inst = i;
      pin.lib_pin = k;
      pin.net = pi.pin_nets[k];
      n.pins_.push_back(pin);
      inst.pins.push_back(pid);
      if (pin.net != kNone) {
        auto& net = n.nets_[pin.net];
        (pin.is_driver() ? net.drivers : net.sinks).push_back(pid);
      }
    }
    n.inst_index_.emplace(inst.name, i);
    n.cells_.push_back(std::move(inst));
  }
  for (const auto& [name, is_input] : port_decls_) {
    const PinId pid = static_cast<PinId>(n.pins_.size());
    Port port{name, is_input, pid, n.net_index_.at(name)};
    Pin pin;
    pin.kind = is_input ? PinKind::PrimaryInput : PinKind::PrimaryOutput;
    pin.lib_pin = static_cast<std::uint32_t>(n.ports_.size());
    pin.net = port.net;
    n.pins_.push_back(pin);
    auto& net = n.nets_[port.net];
    (pin.is_driver() ? net.drivers : net.sinks).push_back(pid);
    n.ports_.push_back(std::move(port));
  }
  return std::move(n_);
}

std::vector<Diagnostic> validate(const Netlist& n) {
  std::vector<Diagnostic> out;
  for (NetId i = 0; i < n.nets().size(); ++i) {
    const Net& net = n.nets()[i];
    if (net.drivers.size() > 1) {
      out.push_back({NetlistErrorKind::MultipleDrivers, "net '" + net.name + "' has " + std::to_string(net.drivers.size()) + " drivers", kNone, i});
    } else if (net.drivers.empty()) {
      out.push_back({NetlistErrorKind::NoDriver, "net '" + net.name + "' has no driver", kNone, i});
    } else if (net.sinks.empty()) {
      out.push_back({NetlistErrorKind::Dangling, "net '" + net.name + "' driven by '" + n.pin_name(net.driver()) + "' has no sinks", net.driver(), i});
    }
  }
  for (PinId p = 0; p < n.pins().size(); ++p) {
    if (n.pins()[p].net == kNone) {
      out.push_back({NetlistErrorKind::Dangling, "pin '" + n.pin_name(p) + "' is unconnected", p, kNone});
    }
  }
  auto cycle = find_combinational_cycle(n);
  if (!cycle.empty()) {
    std::string witness;
    for (PinId p : cycle) witness += (witness.empty() ? "" : " -> ") + n.pin_name(p);
    out.push_back({NetlistErrorKind::CombinationalLoop, "combinational loop: " + witness, cycle.front(), kNone});
  }
  return out;
}

}  // namespace paragate::netlist
