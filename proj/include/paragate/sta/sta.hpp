// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paragate/common/error.hpp"
#include "paragate/netlist/netlist.hpp"
#include "paragate/spef/spef.hpp"

namespace paragate::sta {

enum class StaErrorKind { UnannotatedNet, BadActivity, MissingPin };
using StaError = KindedError<StaErrorKind>;

enum class Annotation { None, Pspef, GoldenSpef };
const char* annotation_name(Annotation a);

struct ClockSpec {
  double period_ps = 1000.0;
  double input_slew_ps = 20.0;
  [[nodiscard]] double frequency_hz() const { return 1.0e12 / period_ps; }
};

struct PinTiming {
  double arrival_ps = 0.0;
  double slew_ps = 0.0;
};

struct CellPower {
  double switching_nw = 0.0;
  double internal_nw = 0.0;
  double leakage_nw = 0.0;
  double total_nw = 0.0;
};

/// Arrival time and slew per pin, power per cell instance.
struct TimingPowerReport {
  Annotation source = Annotation::None;
  std::vector<PinTiming> pins;
  std::vector<CellPower> cells;
  double total_power_nw = 0.0;  // sum of per-cell totals in instance order
  std::size_t unannotated_nets = 0;
};

struct StaOptions {
  ClockSpec clock;
  /// Throw UnannotatedNet instead of falling back to zero wire cap.
  bool strict = false;
};

struct Activity {
  double default_toggle = 0.1;  // per cycle
  std::unordered_map<std::string, double> per_net;
  std::optional<double> clock_hz;  // defaults to the clock spec
  std::optional<double> vdd;       // defaults to the library voltage
};

/// Per-net wire capacitance (fF) from an optional SPEF; missing nets fall
/// back to 0 (or throw in strict mode). Counts fallbacks in `missing`.
std::vector<double> wire_caps(const netlist::Netlist& n, const spef::SpefDocument* spef, bool strict,
                              std::size_t* missing = nullptr);

/// Capacitive load seen by each net's driver: sink pin caps + wire cap.
std::vector<double> net_loads(const netlist::Netlist& n, const std::vector<double>& wire_cap);

TimingPowerReport run_sta(const netlist::Netlist& n, const spef::SpefDocument* spef, const StaOptions& opt,
                          Annotation tag = Annotation::None);
/// Fills `report.cells` and the design total.
void run_power(const netlist::Netlist& n, const spef::SpefDocument* spef, const Activity& act,
               const ClockSpec& clock, TimingPowerReport& report);

/// run_sta followed by run_power with the given activity.
TimingPowerReport analyze(const netlist::Netlist& n, const spef::SpefDocument* spef, const StaOptions& opt,
                          const Activity& act, Annotation tag);

/// Column-major feature tables extracted from a report.
struct FeatureColumns {
  std::vector<std::string> pin_names = {"arrival", "slew"};
  std::vector<std::vector<double>> pin_columns;  // [column][pin]
  std::vector<std::string> cell_names = {"switching", "internal", "leakage"};
  std::vector<std::vector<double>> cell_columns;  // [column][cell]
};
FeatureColumns report_features(const TimingPowerReport& r);

std::string pins_csv(const netlist::Netlist& n, const TimingPowerReport& r);
std::string cells_csv(const netlist::Netlist& n, const TimingPowerReport& r);
std::string summary_json(const netlist::Netlist& n, const TimingPowerReport& r);
/// Writes pins.csv, cells.csv and summary.json into `dir`.
void write_report(const std::string& dir, const netlist::Netlist& n, const TimingPowerReport& r);
/// Reads back pins.csv / cells.csv written by write_report.
TimingPowerReport read_report(const std::string& dir, const netlist::Netlist& n);

}  // namespace paragate::sta
