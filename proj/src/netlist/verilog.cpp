// SPDX-License-Identifier: Apache-2.0
// Structural-Verilog subset: one module, scalar input/output/wire
// declarations and cell instances with named pin connections.

#include <cctype>
#include <sstream>
#include <unordered_set>

#include "paragate/common/text.hpp"
#include "paragate/netlist/netlist.hpp"

namespace paragate::netlist {
namespace {

enum class Tok { Ident, Punct, Eof };

struct Token {
  Tok type = Tok::Eof;
  std::string text;
  std::size_t line = 0;
};

[[noreturn]] void syntax(std::size_t line, const std::string& why) {
  throw NetlistError(NetlistErrorKind::SyntaxError, "netlist line " + std::to_string(line) + ": " + why);
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip();
    Token t;
    t.line = line_;
    if (pos_ >= src_.size()) return t;
    const char c = src_[pos_];
    if (c == '\\') {
      // Escaped identifier runs to the next whitespace.
      std::size_t start = ++pos_;
      while (pos_ < src_.size() && !std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (pos_ == start) syntax(line_, "empty escaped identifier");
      t.type = Tok::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    if (ident_start(c)) {
      std::size_t start = pos_;
      while (pos_ < src_.size() && ident_char(src_[pos_])) ++pos_;
      t.type = Tok::Ident;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    if (c == '(' || c == ')' || c == ',' || c == ';' || c == '.') {
      ++pos_;
      t.type = Tok::Punct;
      t.text = std::string(1, c);
      return t;
    }
    if (c == '[') syntax(line_, "bus declarations are not supported");
    syntax(line_, std::string("unexpected character '") + c + "'");
  }

 private:
  void skip() {
    while (pos_ < src_.size()) {
      const char c = src_[pos_];
      if (c == '\n') {
        ++line_;
        ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        const std::size_t open = line_;
        pos_ += 2;
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) {
          if (src_[pos_] == '\n') ++line_;
          ++pos_;
        }
        if (pos_ + 1 >= src_.size()) syntax(open, "unterminated block comment");
        pos_ += 2;
      } else {
        break;
      }
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

class Parser {
 public:
  Parser(std::string_view src, std::shared_ptr<const CellLibrary> lib) : lex_(src), lib_(std::move(lib)) {
    advance();
  }

  Netlist parse() {
    expect_keyword("module");
    const std::string module = expect_ident("module name");
    NetlistBuilder b(module, lib_);
    std::vector<std::pair<std::string, std::size_t>> header_ports;
    if (accept("(")) {
      if (!accept(")")) {
        do {
          header_ports.emplace_back(cur_.text, cur_.line);
          expect_ident("port name");
        } while (accept(","));
        expect(")");
      }
    }
    expect(";");

    std::unordered_set<std::string> declared_ports;
    while (true) {
      if (cur_.type == Tok::Eof) syntax(cur_.line, "missing endmodule");
      if (cur_.type != Tok::Ident) syntax(cur_.line, "expected declaration or instance, got '" + cur_.text + "'");
      if (cur_.text == "endmodule") {
        advance();
        break;
      }
      if (cur_.text == "input" || cur_.text == "output" || cur_.text == "wire") {
        const std::string kind = cur_.text;
        advance();
        do {
          const std::size_t line = cur_.line;
          const std::string name = expect_ident("net name");
          if (kind == "wire") {
            b.add_net(name);
          } else {
            if (!declared_ports.insert(name).second) syntax(line, "port '" + name + "' declared twice");
            kind == "input" ? b.add_input(name) : b.add_output(name);
          }
        } while (accept(","));
        expect(";");
        continue;
      }
      if (is_reserved(cur_.text)) syntax(cur_.line, "unsupported construct '" + cur_.text + "'");
      parse_instance(b);
    }
    if (cur_.type != Tok::Eof) syntax(cur_.line, "text after endmodule");
    for (const auto& [name, line] : header_ports) {
      if (!declared_ports.count(name)) syntax(line, "port '" + name + "' has no input/output declaration");
    }
    if (declared_ports.size() != header_ports.size() && !header_ports.empty()) {
      syntax(1, "port declarations do not match the module header");
    }
    return std::move(b).build();
  }

 private:
  static bool is_reserved(const std::string& s) {
    static const std::unordered_set<std::string> kw = {"assign", "always", "reg", "initial", "inout", "module",
                                                       "parameter", "generate", "function", "task"};
    return kw.count(s) != 0;
  }

  void parse_instance(NetlistBuilder& b) {
    const std::size_t line = cur_.line;
    const std::string cell = expect_ident("cell name");
    const std::string inst = expect_ident("instance name");
    expect("(");
    std::vector<std::pair<std::string, NetId>> bindings;
    if (!accept(")")) {
      do {
        expect(".");
        const std::string pin = expect_ident("pin name");
        expect("(");
        if (cur_.type == Tok::Ident) {
          const std::size_t nline = cur_.line;
          const std::string net = expect_ident("net name");
          auto id = b.find_net(net);
          if (!id) syntax(nline, "undeclared net '" + net + "'");
          bindings.emplace_back(pin, *id);
        }
        expect(")");
      } while (accept(","));
      expect(")");
    }
    expect(";");
    try {
      b.add_instance(inst, cell, bindings);
    } catch (const NetlistError& e) {
      if (e.kind() == NetlistErrorKind::SyntaxError) syntax(line, e.what());
      throw NetlistError(e.kind(), "netlist line " + std::to_string(line) + ": " + e.what());
    }
  }

  void advance() { cur_ = lex_.next(); }
  bool accept(const char* p) {
    if (cur_.type == Tok::Punct && cur_.text == p) {
      advance();
      return true;
    }
    return false;
  }
  void expect(const char* p) {
    if (!accept(p)) syntax(cur_.line, std::string("expected '") + p + "', got '" + cur_.text + "'");
  }
  void expect_keyword(const char* kw) {
    if (cur_.type != Tok::Ident || cur_.text != kw) syntax(cur_.line, std::string("expected '") + kw + "'");
    advance();
  }
  std::string expect_ident(const char* what) {
    if (cur_.type != Tok::Ident) syntax(cur_.line, std::string("expected ") + what + ", got '" + cur_.text + "'");
    std::string s = std::move(cur_.text);
    advance();
    return s;
  }

  Lexer lex_;
  std::shared_ptr<const CellLibrary> lib_;
  Token cur_;
};

std::string escape(const std::string& name) {
  static const std::unordered_set<std::string> kw = {"module", "endmodule", "input", "output", "wire", "assign",
                                                     "reg", "inout", "always", "initial"};
  bool simple = !name.empty() && ident_start(name[0]) && !kw.count(name);
  for (char c : name) simple = simple && ident_char(c);
  return simple ? name : "\\" + name + " ";
}

}  // namespace

Netlist parse_netlist(std::string_view text, std::shared_ptr<const CellLibrary> lib) {
  Netlist n = Parser(text, std::move(lib)).parse();
  for (const auto& d : validate(n)) {
    if (d.kind != NetlistErrorKind::CombinationalLoop) throw NetlistError(d.kind, d.message);
  }
  return n;
}

Netlist read_netlist(const std::string& path, std::shared_ptr<const CellLibrary> lib) {
  return parse_netlist(text::read_file(path), std::move(lib));
}

std::string write_netlist(const Netlist& n) {
  std::ostringstream os;
  os << "module " << escape(n.module_name()) << " (";
  for (std::size_t i = 0; i < n.ports().size(); ++i) os << (i ? ", " : "") << escape(n.ports()[i].name);
  os << ");\n";
  std::unordered_set<NetId> port_nets;
  for (const auto& p : n.ports()) {
    os << "  " << (p.is_input ? "input " : "output ") << escape(p.name) << ";\n";
    port_nets.insert(p.net);
  }
  for (NetId i = 0; i < n.nets().size(); ++i) {
    if (!port_nets.count(i)) os << "  wire " << escape(n.nets()[i].name) << ";\n";
  }
  for (InstId i = 0; i < n.cells().size(); ++i) {
    const CellInst& c = n.cells()[i];
    const CellDef& def = n.cell_def(i);
    os << "  " << escape(def.name) << " " << escape(c.name) << " (";
    bool first = true;
    for (std::size_t k = 0; k < def.pins.size(); ++k) {
      const NetId net = n.pins()[c.pins[k]].net;
      if (net == kNone) continue;
      os << (first ? "" : ", ") << "." << def.pins[k].name << "(" << escape(n.nets()[net].name) << ")";
      first = false;
    }
    os << ");\n";
  }
  os << "endmodule\n";
  return os.str();
}

}  // namespace paragate::netlist
