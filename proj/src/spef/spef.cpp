// SPDX-License-Identifier: Apache-2.0
#include "paragate/spef/spef.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "paragate/common/text.hpp"

namespace paragate::spef {

using netlist::kNone;
using netlist::Netlist;
using netlist::PinId;
using netlist::PinKind;

double SpefDocument::total_cap() const {
  double s = 0.0;
  for (const auto& d : dnets) s += d.total_cap_ff;
  return s;
}

std::unordered_map<std::string, double> SpefDocument::cap_map() const {
  std::unordered_map<std::string, double> m;
  m.reserve(dnets.size());
  for (const auto& d : dnets) m[d.net] = d.total_cap_ff;
  return m;
}

namespace {

double round_g6(double v) { return std::strtod(text::format_g6(v).c_str(), nullptr); }

const char* dir_text(ConnDir d) { return d == ConnDir::Input ? "I" : "O"; }

Conn conn_for(const Netlist& n, PinId pin) {
  const auto& p = n.pins()[pin];
  Conn c;
  c.pin = n.pin_name(pin);
  switch (p.kind) {
    case PinKind::PrimaryInput:
      c.kind = ConnKind::Port;
      c.dir = ConnDir::Input;
      break;
    case PinKind::PrimaryOutput:
      c.kind = ConnKind::Port;
      c.dir = ConnDir::Output;
      break;
    case PinKind::CellOutput:
      c.kind = ConnKind::Internal;
      c.dir = ConnDir::Output;
      c.cell = n.cell_def(p.inst).name;
      break;
    case PinKind::CellInput:
      c.kind = ConnKind::Internal;
      c.dir = ConnDir::Input;
      break;
  }
  return c;
}

}  // namespace

SpefDocument make_pspef(const Netlist& n, const std::unordered_map<std::string, double>& caps) {
  SpefDocument doc;
  doc.design = n.module_name();
  for (const auto& port : n.ports()) doc.ports.emplace_back(port.name, port.is_input ? ConnDir::Input : ConnDir::Output);
  if (n.nets().size() > kNameMapThreshold) {
    std::size_t idx = 1;
    std::unordered_map<std::string, std::size_t> seen;
    auto add = [&](const std::string& name) {
      if (seen.emplace(name, idx).second) doc.name_map.emplace(idx++, name);
    };
    for (const auto& net : n.nets()) add(net.name);
    for (const auto& c : n.cells()) add(c.name);
  }
  doc.dnets.reserve(n.nets().size());
  for (const auto& net : n.nets()) {
    auto it = caps.find(net.name);
    if (it == caps.end()) throw SpefError(SpefErrorKind::MissingNet, "no capacitance for net '" + net.name + "'");
    if (!(it->second > 0.0) || !std::isfinite(it->second)) {
      throw SpefError(SpefErrorKind::NonPositiveCap, "capacitance of net '" + net.name + "' must be > 0");
    }
    DNet d;
    d.net = net.name;
    d.total_cap_ff = round_g6(it->second);
    for (PinId p : net.drivers) d.conns.push_back(conn_for(n, p));
    for (PinId p : net.sinks) d.conns.push_back(conn_for(n, p));
    if (net.driver() != kNone) d.ground_cap.emplace(n.pin_name(net.driver()), d.total_cap_ff);
    doc.dnets.push_back(std::move(d));
  }
  return doc;
}

std::string write_spef(const SpefDocument& doc) {
  std::unordered_map<std::string, std::size_t> rev;
  for (const auto& [i, name] : doc.name_map) rev.emplace(name, i);
  auto name = [&](const std::string& s) -> std::string {
    auto it = rev.find(s);
    return it == rev.end() ? s : "*" + std::to_string(it->second);
  };
  auto pin = [&](const std::string& s) -> std::string {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) return name(s);
    return name(s.substr(0, colon)) + s.substr(colon);
  };
  const double scale = doc.c_unit_scale;
  auto cap = [&](double ff) { return text::format_g6(ff / scale); };

  std::ostringstream os;
  os << "*SPEF \"IEEE 1481-1998\"\n"
     << "*DESIGN \"" << doc.design << "\"\n"
     << "*DATE \"-\"\n"
     << "*VENDOR \"paragate\"\n"
     << "*PROGRAM \"" << doc.program << "\"\n"
     << "*VERSION \"1.0\"\n"
     << "*DESIGN_FLOW \"PIN_CAP NONE\" \"NETLIST_TYPE VERILOG\"\n"
     << "*DIVIDER /\n*DELIMITER :\n*BUS_DELIMITER [ ]\n"
     << "*T_UNIT 1 PS\n*C_UNIT " << doc.c_unit_text << "\n*R_UNIT 1 OHM\n*L_UNIT 1 HENRY\n";
  if (!doc.name_map.empty()) {
    os << "\n*NAME_MAP\n";
    for (const auto& [i, n] : doc.name_map) os << "*" << i << " " << n << "\n";
  }
  if (!doc.ports.empty()) {
    os << "\n*PORTS\n";
    for (const auto& [p, d] : doc.ports) os << name(p) << " " << dir_text(d) << "\n";
  }
  for (const auto& d : doc.dnets) {
    os << "\n*D_NET " << name(d.net) << " " << cap(d.total_cap_ff) << "\n";
    if (!d.conns.empty()) {
      os << "*CONN\n";
      for (const auto& c : d.conns) {
        if (c.kind == ConnKind::Port) {
          os << "*P " << name(c.pin) << " " << dir_text(c.dir) << "\n";
        } else {
          os << "*I " << pin(c.pin) << " " << dir_text(c.dir);
          if (!c.cell.empty()) os << " *D " << c.cell;
          os << "\n";
        }
      }
    }
    if (d.ground_cap) os << "*CAP\n1 " << pin(d.ground_cap->first) << " " << cap(d.ground_cap->second) << "\n";
    os << "*END\n";
  }
  return os.str();
}

namespace {

[[noreturn]] void syntax(std::size_t line, const std::string& why) {
  throw SpefError(SpefErrorKind::SyntaxError, "spef line " + std::to_string(line) + ": " + why);
}

std::string unquote(std::string_view s) {
  s = text::trim(s);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return std::string(s.substr(1, s.size() - 2));
  return std::string(s);
}

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  SpefDocument read() {
    enum class Mode { Header, NameMap, Ports, Conn, Cap, Skip, Body };
    Mode mode = Mode::Header;
    DNet* cur = nullptr;
    bool have_unit = false;
    bool in_dnet = false;

    std::string_view line;
    while (next_line(line)) {
      auto toks = text::split_ws(line);
      if (toks.empty()) continue;
      const std::string_view head = toks[0];
      const bool keyword = head.size() > 1 && head[0] == '*' && !std::isdigit(static_cast<unsigned char>(head[1]));

      if (keyword) {
        if (head == "*D_NET") {
          if (in_dnet) syntax(line_no_, "*D_NET before *END");
          if (toks.size() < 3) syntax(line_no_, "*D_NET needs a net and a total capacitance");
          if (!have_unit) throw SpefError(SpefErrorKind::UnitMissing, "spef line " + std::to_string(line_no_) + ": *C_UNIT must precede *D_NET");
          DNet d;
          d.net = resolve(toks[1]);
          d.total_cap_ff = number(toks[2]) * doc_.c_unit_scale;
          doc_.dnets.push_back(std::move(d));
          cur = &doc_.dnets.back();
          in_dnet = true;
          mode = Mode::Body;
        } else if (head == "*CONN") {
          require_dnet(in_dnet);
          mode = Mode::Conn;
        } else if (head == "*CAP") {
          require_dnet(in_dnet);
          mode = Mode::Cap;
        } else if (head == "*RES" || head == "*INDUC") {
          require_dnet(in_dnet);
          mode = Mode::Skip;
        } else if (head == "*END") {
          require_dnet(in_dnet);
          in_dnet = false;
          cur = nullptr;
          mode = Mode::Header;
        } else if (head == "*P" || head == "*I") {
          if (mode != Mode::Conn) syntax(line_no_, std::string(head) + " outside *CONN");
          parse_conn(toks, *cur);
        } else if (head == "*NAME_MAP") {
          mode = Mode::NameMap;
        } else if (head == "*PORTS") {
          mode = Mode::Ports;
        } else if (in_dnet) {
          syntax(line_no_, "unexpected '" + std::string(head) + "' inside *D_NET");
        } else {
          header(head, line, have_unit);
          mode = Mode::Header;
        }
        continue;
      }

      switch (mode) {
        case Mode::NameMap: {
          if (toks.size() != 2 || head.size() < 2 || head[0] != '*') syntax(line_no_, "bad *NAME_MAP entry");
          std::size_t idx = 0;
          if (!text::parse_size(head.substr(1), idx)) syntax(line_no_, "bad *NAME_MAP index");
          if (!doc_.name_map.emplace(idx, std::string(toks[1])).second) syntax(line_no_, "duplicate *NAME_MAP index");
          break;
        }
        case Mode::Ports: {
          if (toks.size() < 2) syntax(line_no_, "bad *PORTS entry");
          doc_.ports.emplace_back(resolve(toks[0]), dir(toks[1]));
          break;
        }
        case Mode::Cap: {
          if (toks.size() == 3) {
            const double v = number(toks[2]) * doc_.c_unit_scale;
            cur->ground_cap.emplace(resolve_pin(toks[1]), v);
          } else if (toks.size() == 4) {
            ++doc_.warnings;  // coupling capacitor
          } else {
            syntax(line_no_, "bad *CAP entry");
          }
          break;
        }
        case Mode::Skip:
          ++doc_.warnings;
          break;
        default:
          syntax(line_no_, "unexpected line '" + std::string(text::trim(line)) + "'");
      }
    }
    if (in_dnet) syntax(line_no_, "missing *END");
    if (!have_unit) throw SpefError(SpefErrorKind::UnitMissing, "no *C_UNIT declared");
    return std::move(doc_);
  }

 private:
  bool next_line(std::string_view& out) {
    if (pos_ >= src_.size()) return false;
    std::size_t nl = src_.find('\n', pos_);
    if (nl == std::string_view::npos) nl = src_.size();
    out = src_.substr(pos_, nl - pos_);
    // Strip "//" comments.
    if (auto c = out.find("//"); c != std::string_view::npos) out = out.substr(0, c);
    pos_ = nl + 1;
    ++line_no_;
    return true;
  }

  void require_dnet(bool in_dnet) const {
    if (!in_dnet) syntax(line_no_, "section outside *D_NET");
  }

  void header(std::string_view head, std::string_view line, bool& have_unit) {
    auto rest = text::trim(line.substr(line.find(head) + head.size()));
    if (head == "*DESIGN") {
      doc_.design = unquote(rest);
    } else if (head == "*PROGRAM") {
      doc_.program = unquote(rest);
    } else if (head == "*C_UNIT") {
      if (have_unit) syntax(line_no_, "*C_UNIT declared twice");
      auto t = text::split_ws(rest);
      if (t.size() != 2) syntax(line_no_, "bad *C_UNIT");
      const double mult = number(t[0]);
      double base = 0.0;
      if (t[1] == "FF") {
        base = 1.0;
      } else if (t[1] == "PF") {
        base = 1.0e3;
      } else {
        syntax(line_no_, "unsupported capacitance unit '" + std::string(t[1]) + "'");
      }
      doc_.c_unit_scale = mult * base;
      doc_.c_unit_text = std::string(t[0]) + " " + std::string(t[1]);
      have_unit = true;
    }
    // Other header keywords (*SPEF, *DATE, *T_UNIT, ...) carry nothing we use.
  }

  void parse_conn(const std::vector<std::string_view>& toks, DNet& d) {
    if (toks.size() < 3) syntax(line_no_, "bad connection record");
    Conn c;
    if (toks[0] == "*P") {
      c.kind = ConnKind::Port;
      c.pin = resolve(toks[1]);
    } else {
      c.kind = ConnKind::Internal;
      c.pin = resolve_pin(toks[1]);
    }
    c.dir = dir(toks[2]);
    for (std::size_t i = 3; i < toks.size(); ++i) {
      if (toks[i] == "*D" && i + 1 < toks.size()) {
        c.cell = std::string(toks[++i]);
      } else if (toks[i] == "*C" && i + 2 < toks.size()) {
        i += 2;
      } else if (toks[i] == "*L" && i + 1 < toks.size()) {
        ++i;
      } else if (toks[i] == "*S" && i + 2 < toks.size()) {
        i += 2;
      } else {
        syntax(line_no_, "unexpected token '" + std::string(toks[i]) + "' in connection");
      }
    }
    d.conns.push_back(std::move(c));
  }

  ConnDir dir(std::string_view t) const {
    if (t == "I") return ConnDir::Input;
    if (t == "O") return ConnDir::Output;
    if (t == "B") return ConnDir::Output;
    syntax(line_no_, "bad direction '" + std::string(t) + "'");
  }

  double number(std::string_view t) const {
    double v = 0.0;
    if (!text::parse_double(t, v)) syntax(line_no_, "bad number '" + std::string(t) + "'");
    return v;
  }

  std::string resolve(std::string_view t) const {
    if (t.size() > 1 && t[0] == '*') {
      std::size_t idx = 0;
      if (!text::parse_size(t.substr(1), idx)) syntax(line_no_, "bad name reference '" + std::string(t) + "'");
      auto it = doc_.name_map.find(idx);
      if (it == doc_.name_map.end()) {
        throw SpefError(SpefErrorKind::UnknownName, "spef line " + std::to_string(line_no_) + ": unmapped name " + std::string(t));
      }
      return it->second;
    }
    return std::string(t);
  }

  std::string resolve_pin(std::string_view t) const {
    auto colon = t.rfind(':');
    if (colon == std::string_view::npos) return resolve(t);
    return resolve(t.substr(0, colon)) + std::string(t.substr(colon));
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_no_ = 0;
  SpefDocument doc_;
};

}  // namespace

SpefDocument read_spef(std::string_view text) { return Reader(text).read(); }

SpefDocument read_spef_file(const std::string& path) { return read_spef(text::read_file(path)); }

PspefResult write_pspef(const Netlist& n, const std::unordered_map<std::string, double>& caps) {
  PspefResult r;
  r.doc = make_pspef(n, caps);
  r.text = write_spef(r.doc);
  return r;
}

Mismatch check_against(const SpefDocument& doc, const Netlist& n) {
  Mismatch m;
  std::vector<char> annotated(n.nets().size(), 0);
  for (const auto& d : doc.dnets) {
    auto id = n.find_net(d.net);
    if (!id) {
      m.unknown_nets.push_back(d.net);
      continue;
    }
    annotated[*id] = 1;
    for (const auto& c : d.conns) {
      if (!n.find_pin(c.pin)) m.unknown_pins.push_back(c.pin);
    }
  }
  for (std::size_t i = 0; i < annotated.size(); ++i) {
    if (!annotated[i]) m.unannotated_nets.push_back(n.nets()[i].name);
  }
  return m;
}

std::vector<std::optional<double>> wire_caps_for(const SpefDocument& doc, const Netlist& n) {
  std::vector<std::optional<double>> caps(n.nets().size());
  for (const auto& d : doc.dnets) {
    if (auto id = n.find_net(d.net)) caps[*id] = d.total_cap_ff;
  }
  return caps;
}

}  // namespace paragate::spef
