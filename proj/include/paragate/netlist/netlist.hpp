// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paragate/common/error.hpp"
#include "paragate/netlist/library.hpp"

namespace paragate::netlist {

using PinId = std::uint32_t;
using NetId = std::uint32_t;
using InstId = std::uint32_t;
inline constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

enum class NetlistErrorKind {
  SyntaxError,
  UnknownCell,
  UnknownPin,
  MultipleDrivers,
  NoDriver,
  Dangling,
  CombinationalLoop,
};
using NetlistError = KindedError<NetlistErrorKind>;

enum class PinKind : std::uint8_t { CellInput, CellOutput, PrimaryInput, PrimaryOutput };

struct Pin {
  PinKind kind = PinKind::CellInput;
  InstId inst = kNone;         // owning instance, kNone for ports
  std::uint32_t lib_pin = 0;   // index into CellDef::pins, or port index
  NetId net = kNone;

  [[nodiscard]] bool is_port() const { return kind == PinKind::PrimaryInput || kind == PinKind::PrimaryOutput; }
  /// Drives its net: a cell output or a primary input.
  [[nodiscard]] bool is_driver() const { return kind == PinKind::CellOutput || kind == PinKind::PrimaryInput; }
};

struct CellInst {
  std::string name;
  CellId cell = 0;
  std::vector<PinId> pins;  // parallel to CellDef::pins
};

struct Net {
  std::string name;
  std::vector<PinId> drivers;  // exactly one in a valid netlist
  std::vector<PinId> sinks;

  [[nodiscard]] PinId driver() const { return drivers.empty() ? kNone : drivers.front(); }
};

struct Port {
  std::string name;
  bool is_input = true;
  PinId pin = kNone;
  NetId net = kNone;
};

/// Flat gate-level design. Pins are numbered cells-first in instance order,
/// then ports in declaration order. Immutable once built, apart from the
/// explicit editing calls used by defect-injection tests.
class Netlist {
 public:
  Netlist() = default;

  [[nodiscard]] const std::string& module_name() const { return module_; }
  [[nodiscard]] const CellLibrary& library() const { return *lib_; }
  [[nodiscard]] const std::shared_ptr<const CellLibrary>& library_ptr() const { return lib_; }
  [[nodiscard]] const std::vector<CellInst>& cells() const { return cells_; }
  [[nodiscard]] const std::vector<Net>& nets() const { return nets_; }
  [[nodiscard]] const std::vector<Pin>& pins() const { return pins_; }
  [[nodiscard]] const std::vector<Port>& ports() const { return ports_; }

  [[nodiscard]] const CellDef& cell_def(InstId inst) const { return lib_->cell(cells_[inst].cell); }
  [[nodiscard]] const PinDef* pin_def(PinId pin) const;
  /// Library pin capacitance; ports carry none.
  [[nodiscard]] double pin_capacitance(PinId pin) const;
  /// "inst:PIN" for cell pins, the port name for ports.
  [[nodiscard]] std::string pin_name(PinId pin) const;
  [[nodiscard]] std::optional<NetId> find_net(std::string_view name) const;
  [[nodiscard]] std::optional<InstId> find_instance(std::string_view name) const;
  [[nodiscard]] std::optional<PinId> find_pin(std::string_view full_name) const;

  [[nodiscard]] std::vector<NetId> primary_inputs() const;
  [[nodiscard]] std::vector<NetId> primary_outputs() const;
  [[nodiscard]] bool is_sequential(InstId inst) const { return cell_def(inst).is_sequential; }

  // Editing (tests only). Keeps driver/sink lists consistent.
  void disconnect(PinId pin);
  void connect(PinId pin, NetId net);

 private:
  friend class NetlistBuilder;

  std::string module_;
  std::shared_ptr<const CellLibrary> lib_;
  std::vector<CellInst> cells_;
  std::vector<Net> nets_;
  std::vector<Pin> pins_;
  std::vector<Port> ports_;
  std::unordered_map<std::string, NetId> net_index_;
  std::unordered_map<std::string, InstId> inst_index_;
};

/// Incremental construction. Unknown cells and pins throw immediately;
/// structural invariants are left to validate().
class NetlistBuilder {
 public:
  NetlistBuilder(std::string module, std::shared_ptr<const CellLibrary> lib);

  NetId add_net(const std::string& name);
  NetId add_input(const std::string& name);
  NetId add_output(const std::string& name);
  InstId add_instance(const std::string& name, std::string_view cell,
                      const std::vector<std::pair<std::string, NetId>>& bindings);
  [[nodiscard]] std::optional<NetId> find_net(std::string_view name) const;
  [[nodiscard]] bool has_instance(std::string_view name) const;

  /// Finalizes pin numbering. Does not validate.
  Netlist build() &&;

 private:
  struct PendingInst {
    std::string name;
    CellId cell;
    std::vector<NetId> pin_nets;
  };
  Netlist n_;
  std::vector<PendingInst> insts_;
  std::vector<std::pair<std::string, bool>> port_decls_;  // name, is_input
  std::unordered_map<std::string, InstId> inst_names_;
};

/// Structural-Verilog subset reader. Throws NetlistError; the result passes
/// every structural check (combinational loops are reported by levelize()).
Netlist parse_netlist(std::string_view text, std::shared_ptr<const CellLibrary> lib);
Netlist read_netlist(const std::string& path, std::shared_ptr<const CellLibrary> lib);
std::string write_netlist(const Netlist& n);

struct Diagnostic {
  NetlistErrorKind kind;
  std::string message;
  PinId pin = kNone;
  NetId net = kNone;
};

/// Every invariant violation, without throwing. Empty iff the design is legal.
std::vector<Diagnostic> validate(const Netlist& n);

struct Levelization {
  std::vector<PinId> order;          // permutation of all pins
  std::vector<std::uint32_t> level;  // per pin; sources are level 0
  std::uint32_t max_level = 0;
};

/// Topological order over combinational arcs (net driver->sink and
/// input->output of combinational cells). Throws CombinationalLoop with a
/// cycle witness in the message.
Levelization levelize(const Netlist& n);

/// A cycle through combinational arcs, empty if none.
std::vector<PinId> find_combinational_cycle(const Netlist& n);

}  // namespace paragate::netlist
