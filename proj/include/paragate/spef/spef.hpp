// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paragate/common/error.hpp"
#include "paragate/netlist/netlist.hpp"

namespace paragate::spef {

enum class SpefErrorKind { SyntaxError, UnitMissing, MissingNet, NonPositiveCap, UnknownName };
using SpefError = KindedError<SpefErrorKind>;

enum class ConnKind { Port, Internal };
enum class ConnDir { Input, Output };

struct Conn {
  ConnKind kind = ConnKind::Internal;
  std::string pin;  // "inst:PIN" or port name, names resolved through the map
  ConnDir dir = ConnDir::Input;
  std::string cell;  // *D driving cell, internal pins only (may be empty)

  bool operator==(const Conn&) const = default;
};

struct DNet {
  std::string net;
  double total_cap_ff = 0.0;
  std::vector<Conn> conns;
  /// Lumped ground cap node, if a *CAP section was present.
  std::optional<std::pair<std::string, double>> ground_cap;

  bool operator==(const DNet&) const = default;
};

/// Header plus D_NET records. Names in `dnets` are always resolved; the
/// name map only controls how they are written.
struct SpefDocument {
  std::string design;
  std::string program = "paragate";
  double c_unit_scale = 1.0;  // the *C_UNIT as fF, kept so the header reproduces exactly
  std::string c_unit_text = "1 FF";
  std::map<std::size_t, std::string> name_map;
  std::vector<std::pair<std::string, ConnDir>> ports;
  std::vector<DNet> dnets;
  /// Unsupported constructs skipped while reading (RES/INDUC sections,
  /// coupling caps). Not serialized.
  std::size_t warnings = 0;

  bool operator==(const SpefDocument& o) const {
    return design == o.design && program == o.program && c_unit_text == o.c_unit_text && name_map == o.name_map &&
           ports == o.ports && dnets == o.dnets;
  }
  [[nodiscard]] double total_cap() const;
  /// net name -> total cap in fF
  [[nodiscard]] std::unordered_map<std::string, double> cap_map() const;
};

/// Nets above this count get a *NAME_MAP.
inline constexpr std::size_t kNameMapThreshold = 10000;

/// Lumped-capacitance PSPEF for `caps` (net name -> fF). Values are rounded
/// to the written precision so that read(write(doc)) == doc.
SpefDocument make_pspef(const netlist::Netlist& n, const std::unordered_map<std::string, double>& caps);
std::string write_spef(const SpefDocument& doc);
SpefDocument read_spef(std::string_view text);
SpefDocument read_spef_file(const std::string& path);

struct PspefResult {
  SpefDocument doc;
  std::string text;
};
PspefResult write_pspef(const netlist::Netlist& n, const std::unordered_map<std::string, double>& caps);

/// Problems pairing the document with a netlist: unknown nets, unknown conn
/// pins, and nets of the netlist without a D_NET.
struct Mismatch {
  std::vector<std::string> unknown_nets;
  std::vector<std::string> unknown_pins;
  std::vector<std::string> unannotated_nets;
  [[nodiscard]] bool empty() const { return unknown_nets.empty() && unknown_pins.empty() && unannotated_nets.empty(); }
};
Mismatch check_against(const SpefDocument& doc, const netlist::Netlist& n);

/// Wire cap per netlist net (fF). Nets without a D_NET map to nullopt.
std::vector<std::optional<double>> wire_caps_for(const SpefDocument& doc, const netlist::Netlist& n);

}  // namespace paragate::spef
