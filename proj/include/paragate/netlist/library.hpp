// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "paragate/common/error.hpp"

namespace paragate::netlist {

enum class LibraryErrorKind { SyntaxError, InvalidCell, UnknownKey };
using LibraryError = KindedError<LibraryErrorKind>;

enum class PinDirection { Input, Output };

struct PinDef {
  std::string name;
  PinDirection direction = PinDirection::Input;
  double capacitance_ff = 0.0;
  bool is_clock = false;
};

/// Affine delay/slew model of one input->output arc:
///   delay = d0 + k_slew * slew_in + k_load * load
///   slew  = s0 + s_slew * slew_in + s_load * load
struct DelayArc {
  std::size_t from_pin = 0;
  std::size_t to_pin = 0;
  double d0 = 0.0;      // ps
  double k_slew = 0.0;  // ps/ps
  double k_load = 0.0;  // ps/fF
  double s0 = 0.0;
  double s_slew = 0.0;
  double s_load = 0.0;

  [[nodiscard]] double delay(double slew_in, double load_ff) const {
    return d0 + k_slew * slew_in + k_load * load_ff;
  }
  [[nodiscard]] double slew(double slew_in, double load_ff) const {
    return s0 + s_slew * slew_in + s_load * load_ff;
  }
};

struct CellDef {
  std::string name;
  bool is_sequential = false;
  int drive_strength = 1;
  std::vector<PinDef> pins;
  std::vector<DelayArc> arcs;
  double internal_energy_fj = 0.0;  // per output toggle
  double leakage_nw = 0.0;

  [[nodiscard]] std::optional<std::size_t> pin_index(std::string_view pin) const;
  [[nodiscard]] std::size_t output_pin() const;
  [[nodiscard]] std::size_t input_count() const;
  /// Arc into the output pin from `from_pin`, or nullptr.
  [[nodiscard]] const DelayArc* arc_from(std::size_t from_pin) const;
};

using CellId = std::size_t;

/// Compact cell library. Cells keep file order; lookups by name are O(1).
class CellLibrary {
 public:
  CellLibrary() = default;
  CellLibrary(std::string name, double voltage, double clock_freq_hz, std::vector<CellDef> cells);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] double voltage() const { return voltage_; }
  [[nodiscard]] double default_clock_freq_hz() const { return clock_freq_hz_; }
  [[nodiscard]] const std::vector<CellDef>& cells() const { return cells_; }
  [[nodiscard]] const CellDef& cell(CellId id) const { return cells_.at(id); }
  [[nodiscard]] std::optional<CellId> find(std::string_view name) const;

 private:
  std::string name_;
  double voltage_ = 1.0;
  double clock_freq_hz_ = 1.0e9;
  std::vector<CellDef> cells_;
  std::unordered_map<std::string, CellId> index_;
};

/// Reads the key-value library format (see docs/formats.md).
CellLibrary parse_library(std::string_view text);
CellLibrary read_library(const std::string& path);
std::string write_library(const CellLibrary& lib);

/// Checks the per-cell invariants; throws LibraryError(InvalidCell).
void check_cell(const CellDef& cell);

/// The built-in desk-scale library used by the synthetic benchmark.
CellLibrary desk_library();

}  // namespace paragate::netlist
