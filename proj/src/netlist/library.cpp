// SPDX-License-Identifier: Apache-2.0
#include "paragate/netlist/library.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "paragate/common/text.hpp"

namespace paragate::netlist {

std::optional<std::size_t> CellDef::pin_index(std::string_view pin) const {
  for (std::size_t i = 0; i < pins.size(); ++i) {
    if (pins[i].name == pin) return i;
  }
  return std::nullopt;
}

std::size_t CellDef::output_pin() const {
  for (std::size_t i = 0; i < pins.size(); ++i) {
    if (pins[i].direction == PinDirection::Output) return i;
  }
  throw LibraryError(LibraryErrorKind::InvalidCell, "cell '" + name + "' has no output pin");
}

std::size_t CellDef::input_count() const {
  std::size_t n = 0;
  for (const auto& p : pins) n += p.direction == PinDirection::Input ? 1 : 0;
  return n;
}

const DelayArc* CellDef::arc_from(std::size_t from_pin) const {
  for (const auto& a : arcs) {
    if (a.from_pin == from_pin) return &a;
  }
  return nullptr;
}

CellLibrary::CellLibrary(std::string name, double voltage, double clock_freq_hz,
                         std::vector<CellDef> cells)
    : name_(std::move(name)), voltage_(voltage), clock_freq_hz_(clock_freq_hz), cells_(std::move(cells)) {
  for (CellId i = 0; i < cells_.size(); ++i) {
    check_cell(cells_[i]);
    if (!index_.emplace(cells_[i].name, i).second) {
      throw LibraryError(LibraryErrorKind::InvalidCell, "duplicate cell '" + cells_[i].name + "'");
    }
  }
  if (!(voltage_ > 0.0) || !(clock_freq_hz_ > 0.0)) {
    throw LibraryError(LibraryErrorKind::InvalidCell, "library voltage and clock frequency must be positive");
  }
}

std::optional<CellId> CellLibrary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void check_cell(const CellDef& cell) {
  auto fail = [&](const std::string& why) {
    throw LibraryError(LibraryErrorKind::InvalidCell, "cell '" + cell.name + "': " + why);
  };
  std::size_t outputs = 0;
  std::size_t inputs = 0;
  std::size_t clocks = 0;
  for (const auto& p : cell.pins) {
    if (!(p.capacitance_ff > 0.0) || !std::isfinite(p.capacitance_ff)) fail("pin '" + p.name + "' capacitance must be > 0");
    if (p.direction == PinDirection::Output) {
      ++outputs;
      if (p.is_clock) fail("output pin cannot be a clock");
    } else {
      ++inputs;
      clocks += p.is_clock ? 1 : 0;
    }
  }
  if (outputs != 1) fail("exactly one output pin required");
  if (inputs == 0) fail("at least one input pin required");
  if (cell.is_sequential && clocks != 1) fail("sequential cell needs exactly one clock pin");
  if (!cell.is_sequential && clocks != 0) fail("combinational cell cannot have a clock pin");
  if (!(cell.leakage_nw >= 0.0) || !(cell.internal_energy_fj >= 0.0)) fail("power numbers must be >= 0");

  const std::size_t out = cell.output_pin();
  std::vector<int> seen(cell.pins.size(), 0);
  for (const auto& a : cell.arcs) {
    if (a.from_pin >= cell.pins.size() || a.to_pin != out) fail("arc must end at the output pin");
    if (cell.pins[a.from_pin].direction != PinDirection::Input) fail("arc must start at an input pin");
    for (double c : {a.d0, a.k_slew, a.k_load, a.s0, a.s_slew, a.s_load}) {
      if (!std::isfinite(c)) fail("non-finite arc coefficient");
      if (c < 0.0) fail("arc coefficients must be >= 0");
    }
    ++seen[a.from_pin];
  }
  for (std::size_t i = 0; i < cell.pins.size(); ++i) {
    const auto& p = cell.pins[i];
    if (p.direction != PinDirection::Input) continue;
    // Combinational: one arc per input. Sequential: only the clock launches.
    const int want = cell.is_sequential ? (p.is_clock ? 1 : 0) : 1;
    if (seen[i] != want) fail("pin '" + p.name + "' has " + std::to_string(seen[i]) + " arcs, expected " + std::to_string(want));
  }
}

namespace {

struct Value {
  enum class Type { Number, String, Bool } type = Type::Number;
  double number = 0.0;
  std::string str;
  bool boolean = false;
  std::size_t line = 0;
};

using Section = std::map<std::string, Value>;

struct Document {
  std::vector<std::pair<std::vector<std::string>, Section>> sections;
};

[[noreturn]] void syntax(std::size_t line, const std::string& why) {
  throw LibraryError(LibraryErrorKind::SyntaxError, "library line " + std::to_string(line) + ": " + why);
}

std::vector<std::string> split_path(std::string_view path, std::size_t line) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= path.size(); ++i) {
    if (i == path.size() || path[i] == '.') {
      auto part = text::trim(path.substr(start, i - start));
      if (part.empty()) syntax(line, "empty section path component");
      parts.emplace_back(part);
      start = i + 1;
    }
  }
  return parts;
}

Document parse_document(std::string_view text) {
  Document doc;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;

    // Strip comments outside strings.
    bool in_str = false;
    std::size_t cut = raw.size();
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '"') in_str = !in_str;
      if (raw[i] == '#' && !in_str) {
        cut = i;
        break;
      }
    }
    std::string_view line = text::trim(raw.substr(0, cut));
    if (line.empty()) {
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') syntax(line_no, "unterminated section header");
      doc.sections.emplace_back(split_path(line.substr(1, line.size() - 2), line_no), Section{});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) syntax(line_no, "expected key = value");
    if (doc.sections.empty()) syntax(line_no, "key outside of any section");
    std::string key(text::trim(line.substr(0, eq)));
    std::string_view rhs = text::trim(line.substr(eq + 1));
    if (key.empty() || rhs.empty()) syntax(line_no, "expected key = value");
    Value v;
    v.line = line_no;
    if (rhs.front() == '"') {
      if (rhs.size() < 2 || rhs.back() != '"') syntax(line_no, "unterminated string");
      v.type = Value::Type::String;
      v.str = std::string(rhs.substr(1, rhs.size() - 2));
    } else if (rhs == "true" || rhs == "false") {
      v.type = Value::Type::Bool;
      v.boolean = rhs == "true";
    } else if (!text::parse_double(rhs, v.number)) {
      syntax(line_no, "bad value '" + std::string(rhs) + "'");
    }
    auto& sec = doc.sections.back().second;
    if (!sec.emplace(key, v).second) syntax(line_no, "duplicate key '" + key + "'");
  }
  return doc;
}

double number_of(const Section& s, const std::string& key, double fallback, bool required = false) {
  auto it = s.find(key);
  if (it == s.end()) {
    if (required) throw LibraryError(LibraryErrorKind::UnknownKey, "missing key '" + key + "'");
    return fallback;
  }
  if (it->second.type != Value::Type::Number) syntax(it->second.line, "'" + key + "' must be a number");
  return it->second.number;
}

void check_keys(const Section& s, std::initializer_list<std::string_view> allowed) {
  for (const auto& [k, v] : s) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == k;
    if (!ok) throw LibraryError(LibraryErrorKind::UnknownKey, "line " + std::to_string(v.line) + ": unknown key '" + k + "'");
  }
}

}  // namespace

CellLibrary parse_library(std::string_view text) {
  Document doc = parse_document(text);
  std::string lib_name = "library";
  double voltage = 1.0;
  double freq = 1.0e9;
  std::vector<CellDef> cells;
  std::map<std::string, std::size_t> cell_index;

  auto cell_for = [&](const std::string& name) -> CellDef& {
    auto it = cell_index.find(name);
    if (it == cell_index.end()) {
      cell_index.emplace(name, cells.size());
      cells.push_back(CellDef{});
      cells.back().name = name;
      return cells.back();
    }
    return cells[it->second];
  };

  // Arcs are resolved after all pins are known.
  struct PendingArc {
    std::string cell, from, to;
    DelayArc arc;
  };
  std::vector<PendingArc> pending;

  for (const auto& [path, sec] : doc.sections) {
    if (path.size() == 1 && path[0] == "library") {
      check_keys(sec, {"name", "voltage", "default_clock_freq"});
      if (auto it = sec.find("name"); it != sec.end()) lib_name = it->second.str;
      voltage = number_of(sec, "voltage", voltage);
      freq = number_of(sec, "default_clock_freq", freq);
    } else if (path.size() == 2 && path[0] == "cell") {
      check_keys(sec, {"sequential", "drive", "internal_energy", "leakage"});
      CellDef& c = cell_for(path[1]);
      if (auto it = sec.find("sequential"); it != sec.end()) c.is_sequential = it->second.boolean;
      c.drive_strength = static_cast<int>(number_of(sec, "drive", 1));
      c.internal_energy_fj = number_of(sec, "internal_energy", 0.0);
      c.leakage_nw = number_of(sec, "leakage", 0.0);
    } else if (path.size() == 4 && path[0] == "cell" && path[2] == "pin") {
      check_keys(sec, {"direction", "cap", "clock"});
      CellDef& c = cell_for(path[1]);
      PinDef p;
      p.name = path[3];
      auto dir = sec.find("direction");
      if (dir == sec.end()) throw LibraryError(LibraryErrorKind::UnknownKey, "pin '" + p.name + "' lacks direction");
      if (dir->second.str == "input") {
        p.direction = PinDirection::Input;
      } else if (dir->second.str == "output") {
        p.direction = PinDirection::Output;
      } else {
        syntax(dir->second.line, "direction must be \"input\" or \"output\"");
      }
      p.capacitance_ff = number_of(sec, "cap", 0.0, true);
      if (auto it = sec.find("clock"); it != sec.end()) p.is_clock = it->second.boolean;
      if (c.pin_index(p.name)) throw LibraryError(LibraryErrorKind::InvalidCell, "duplicate pin '" + p.name + "'");
      c.pins.push_back(std::move(p));
    } else if (path.size() == 5 && path[0] == "cell" && path[2] == "arc") {
      check_keys(sec, {"d0", "k_slew", "k_load", "s0", "s_slew", "s_load"});
      cell_for(path[1]);
      DelayArc a;
      a.d0 = number_of(sec, "d0", 0.0, true);
      a.k_slew = number_of(sec, "k_slew", 0.0);
      a.k_load = number_of(sec, "k_load", 0.0, true);
      a.s0 = number_of(sec, "s0", 0.0);
      a.s_slew = number_of(sec, "s_slew", 0.0);
      a.s_load = number_of(sec, "s_load", 0.0);
      pending.push_back({path[1], path[3], path[4], a});
    } else {
      std::string joined;
      for (const auto& p : path) joined += (joined.empty() ? "" : ".") + p;
      throw LibraryError(LibraryErrorKind::UnknownKey, "unknown section [" + joined + "]");
    }
  }
  for (auto& pa : pending) {
    CellDef& c = cells[cell_index.at(pa.cell)];
    auto from = c.pin_index(pa.from);
    auto to = c.pin_index(pa.to);
    if (!from || !to) throw LibraryError(LibraryErrorKind::InvalidCell, "arc on unknown pin in cell '" + pa.cell + "'");
    pa.arc.from_pin = *from;
    pa.arc.to_pin = *to;
    c.arcs.push_back(pa.arc);
  }
  return CellLibrary(lib_name, voltage, freq, std::move(cells));
}

CellLibrary read_library(const std::string& path) { return parse_library(text::read_file(path)); }

std::string write_library(const CellLibrary& lib) {
  std::ostringstream os;
  auto num = [](double v) { return text::format_exact(v); };
  os << "# cell library\n[library]\nname = \"" << lib.name() << "\"\nvoltage = " << num(lib.voltage())
     << "\ndefault_clock_freq = " << num(lib.default_clock_freq_hz()) << "\n";
  for (const auto& c : lib.cells()) {
    os << "\n[cell." << c.name << "]\nsequential = " << (c.is_sequential ? "true" : "false")
       << "\ndrive = " << c.drive_strength << "\ninternal_energy = " << num(c.internal_energy_fj)
       << "\nleakage = " << num(c.leakage_nw) << "\n";
    for (const auto& p : c.pins) {
      os << "\n[cell." << c.name << ".pin." << p.name << "]\ndirection = \""
         << (p.direction == PinDirection::Input ? "input" : "output") << "\"\ncap = " << num(p.capacitance_ff) << "\n";
      if (p.is_clock) os << "clock = true\n";
    }
    for (const auto& a : c.arcs) {
      os << "\n[cell." << c.name << ".arc." << c.pins[a.from_pin].name << "." << c.pins[a.to_pin].name << "]\n"
         << "d0 = " << num(a.d0) << "\nk_slew = " << num(a.k_slew) << "\nk_load = " << num(a.k_load)
         << "\ns0 = " << num(a.s0) << "\ns_slew = " << num(a.s_slew) << "\ns_load = " << num(a.s_load) << "\n";
    }
  }
  return os.str();
}

namespace {

struct ArcSpec {
  double d0, k_load;
};

CellDef comb(std::string name, int drive, std::vector<std::pair<std::string, double>> inputs, double out_cap,
             std::vector<ArcSpec> arcs, double k_slew, double s0, double s_slew, double s_load, double energy,
             double leak) {
  CellDef c;
  c.name = std::move(name);
  c.drive_strength = drive;
  for (auto& [n, cap] : inputs) c.pins.push_back({n, PinDirection::Input, cap, false});
  c.pins.push_back({"Y", PinDirection::Output, out_cap, false});
  const std::size_t out = c.pins.size() - 1;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    c.arcs.push_back({i, out, arcs[i].d0, k_slew, arcs[i].k_load, s0, s_slew, s_load});
  }
  c.internal_energy_fj = energy;
  c.leakage_nw = leak;
  return c;
}

}  // namespace

CellLibrary desk_library() {
  std::vector<CellDef> cells;
  cells.push_back(comb("INV_X1", 1, {{"A", 1.0}}, 0.6, {{6, 4.0}}, 0.10, 4, 0.10, 6.0, 0.5, 5));
  cells.push_back(comb("INV_X2", 2, {{"A", 2.0}}, 1.1, {{5, 2.0}}, 0.08, 3.5, 0.08, 3.0, 0.9, 9));
  cells.push_back(comb("INV_X4", 4, {{"A", 4.0}}, 2.0, {{5, 1.0}}, 0.06, 3, 0.06, 1.5, 1.6, 17));
  cells.push_back(comb("BUF_X1", 1, {{"A", 1.0}}, 0.6, {{14, 3.5}}, 0.05, 4, 0.05, 5.0, 1.0, 7));
  cells.push_back(comb("BUF_X2", 2, {{"A", 1.5}}, 1.0, {{13, 1.8}}, 0.05, 3.5, 0.05, 2.6, 1.7, 12));
  cells.push_back(comb("NAND2_X1", 1, {{"A", 1.2}, {"B", 1.2}}, 0.7, {{8, 5.0}, {9, 5.0}}, 0.12, 5, 0.10, 7.0, 0.8, 6));
  cells.push_back(comb("NOR2_X1", 1, {{"A", 1.4}, {"B", 1.4}}, 0.7, {{10, 6.5}, {11, 6.5}}, 0.14, 6, 0.12, 9.0, 0.8, 6));
  cells.push_back(comb("AND2_X1", 1, {{"A", 1.0}, {"B", 1.0}}, 0.7, {{16, 3.8}, {17, 3.8}}, 0.06, 4, 0.05, 5.5, 1.2, 8));
  cells.push_back(comb("OR2_X1", 1, {{"A", 1.0}, {"B", 1.0}}, 0.7, {{18, 4.0}, {19, 4.0}}, 0.06, 4, 0.05, 5.8, 1.3, 8));
  cells.push_back(comb("XOR2_X1", 1, {{"A", 2.0}, {"B", 2.1}}, 0.9, {{20, 5.0}, {22, 5.0}}, 0.10, 6, 0.10, 7.5, 2.2, 12));
  cells.push_back(comb("NAND3_X1", 1, {{"A", 1.3}, {"B", 1.3}, {"C", 1.3}}, 0.8, {{10, 6.0}, {11, 6.0}, {12, 6.0}}, 0.13, 6, 0.12, 8.5, 1.1, 8));
  cells.push_back(comb("AOI21_X1", 1, {{"A1", 1.4}, {"A2", 1.4}, {"B", 1.3}}, 0.8, {{11, 6.2}, {12, 6.2}, {10, 6.0}}, 0.13, 6, 0.12, 8.8, 1.2, 9));
  cells.push_back(comb("MUX2_X1", 1, {{"A", 1.2}, {"B", 1.2}, {"S", 2.0}}, 0.8, {{22, 4.2}, {22, 4.2}, {25, 4.2}}, 0.08, 5, 0.07, 6.0, 2.0, 11));

  CellDef dff;
  dff.name = "DFF_X1";
  dff.is_sequential = true;
  dff.drive_strength = 1;
  dff.pins = {{"D", PinDirection::Input, 1.1, false}, {"CK", PinDirection::Input, 0.9, true}, {"Q", PinDirection::Output, 0.8, false}};
  dff.arcs = {{1, 2, 35, 0.05, 3.0, 5, 0.05, 5.0}};
  dff.internal_energy_fj = 4.0;
  dff.leakage_nw = 20.0;
  cells.push_back(std::move(dff));
  return CellLibrary("desk28", 0.9, 1.0e9, std::move(cells));
}

}  // namespace paragate::netlist
