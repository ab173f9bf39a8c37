// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "paragate/spef/spef.hpp"

using namespace paragate;
using spef::SpefError;
using spef::SpefErrorKind;

namespace {

bool throws_kind(SpefErrorKind kind, const auto& f) {
  try {
    f();
  } catch (const SpefError& e) {
    return e.kind() == kind;
  }
  return false;
}

std::unordered_map<std::string, double> random_caps(const netlist::Netlist& n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::unordered_map<std::string, double> caps;
  for (const auto& net : n.nets()) caps[net.name] = std::pow(10.0, u(rng));
  return caps;
}

const char* kHeader = R"(*SPEF "IEEE 1481-1998"
*DESIGN "chain"
*DATE "-"
*VENDOR "hand"
*PROGRAM "hand"
*VERSION "1.0"
*DESIGN_FLOW "PIN_CAP NONE"
*DIVIDER /
*DELIMITER :
*BUS_DELIMITER [ ]
*T_UNIT 1 PS
*C_UNIT 1 FF
*R_UNIT 1 OHM
*L_UNIT 1 HENRY

)";

}  // namespace

TEST_CASE("toy design: one D_NET per net with the netlist's connectivity") {
  const auto n = testutil::chain();
  const std::unordered_map<std::string, double> caps = {{"a", 1.0}, {"n1", 2.5}, {"y", 0.125}};
  const auto r = spef::write_pspef(n, caps);
  REQUIRE(r.doc.dnets.size() == 3);
  for (const auto& d : r.doc.dnets) {
    CHECK(d.total_cap_ff == caps.at(d.net));
    const auto id = *n.find_net(d.net);
    const auto& net = n.nets()[id];
    REQUIRE(d.conns.size() == net.drivers.size() + net.sinks.size());
    std::vector<std::string> want, got;
    for (auto p : net.drivers) want.push_back(n.pin_name(p));
    for (auto p : net.sinks) want.push_back(n.pin_name(p));
    for (const auto& c : d.conns) got.push_back(c.pin);
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    CHECK(want == got);
  }
  CHECK(spef::check_against(r.doc, n).empty());
  CHECK(spef::read_spef(r.text) == r.doc);
}

TEST_CASE("missing and non-positive caps are rejected") {
  const auto n = testutil::chain();
  CHECK(throws_kind(SpefErrorKind::MissingNet, [&] { spef::write_pspef(n, {{"a", 1.0}, {"n1", 2.0}}); }));
  CHECK(throws_kind(SpefErrorKind::NonPositiveCap,
                    [&] { spef::write_pspef(n, {{"a", 1.0}, {"n1", 0.0}, {"y", 1.0}}); }));
  CHECK(throws_kind(SpefErrorKind::NonPositiveCap,
                    [&] { spef::write_pspef(n, {{"a", 1.0}, {"n1", -2.0}, {"y", 1.0}}); }));
}

TEST_CASE("1,000-net design: write -> read -> write is byte-identical") {
  const auto g = testutil::generated(1000, 21);
  REQUIRE(g.netlist.nets().size() >= 1000);
  const auto r = spef::write_pspef(g.netlist, random_caps(g.netlist, 4));
  const auto back = spef::read_spef(r.text);
  CHECK(back == r.doc);
  CHECK(spef::write_spef(back) == r.text);
}

TEST_CASE("written values stay within 6-significant-digit rounding and totals agree") {
  const auto g = testutil::generated(500, 2);
  const auto caps = random_caps(g.netlist, 9);
  const auto r = spef::write_pspef(g.netlist, caps);
  double want = 0.0;
  for (const auto& d : r.doc.dnets) {
    const double c = caps.at(d.net);
    CHECK(std::abs(d.total_cap_ff - c) <= 5e-6 * c);
    want += c;
  }
  const double got = spef::read_spef(r.text).total_cap();
  CHECK(std::abs(got - want) <= 1e-6 * want);
}

TEST_CASE("resistance sections are skipped with warnings, caps intact") {
  std::string text = kHeader;
  text += R"(*D_NET n1 2.5
*CONN
*I u1:Y O
*I u2:A I
*CAP
1 n1 2.5
*RES
1 u1:Y u2:A 10.0
*END

*D_NET y 0.75
*CONN
*I u2:Y O
*P y O
*CAP
1 y 0.5
2 y u1:Y 0.25
*END
)";
  const auto d = spef::read_spef(text);
  REQUIRE(d.dnets.size() == 2);
  CHECK(d.dnets[0].total_cap_ff == 2.5);
  CHECK(d.dnets[1].total_cap_ff == 0.75);
  CHECK(d.warnings == 2);  // one *RES line, one coupling cap
}

TEST_CASE("empty D_NET body keeps the header total") {
  std::string text = kHeader;
  text += "*D_NET n1 3.25\n*END\n";
  const auto d = spef::read_spef(text);
  REQUIRE(d.dnets.size() == 1);
  CHECK(d.dnets[0].total_cap_ff == 3.25);
  CHECK(d.dnets[0].conns.empty());
}

TEST_CASE("missing C unit and malformed records") {
  std::string text = kHeader;
  text.replace(text.find("*C_UNIT 1 FF\n"), 13, "");
  CHECK(throws_kind(SpefErrorKind::UnitMissing, [&] { spef::read_spef(text + "*D_NET n1 1\n*END\n"); }));
  CHECK(throws_kind(SpefErrorKind::SyntaxError, [&] { spef::read_spef(std::string(kHeader) + "*D_NET n1 abc\n*END\n"); }));
}

TEST_CASE("C unit scaling reads picofarads as femtofarads") {
  std::string text = kHeader;
  text.replace(text.find("*C_UNIT 1 FF"), 12, "*C_UNIT 1 PF");
  const auto d = spef::read_spef(text + "*D_NET n1 0.002\n*END\n");
  CHECK(d.dnets[0].total_cap_ff == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("random designs round-trip through the reader") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = testutil::generated(50 + 37 * seed, seed);
    const auto r = spef::write_pspef(g.netlist, random_caps(g.netlist, seed));
    CHECK(spef::read_spef(r.text) == r.doc);
    CHECK(spef::check_against(r.doc, g.netlist).empty());
  }
}

TEST_CASE("golden SPEF of a generated design covers every net") {
  const auto g = testutil::generated(600, 8);
  CHECK(spef::check_against(g.golden, g.netlist).empty());
  for (const auto& c : spef::wire_caps_for(g.golden, g.netlist)) CHECK(c.has_value());
}

TEST_CASE("name map appears above the net threshold and round-trips") {
  const auto g = testutil::generated(10500, 3);
  REQUIRE(g.netlist.nets().size() > spef::kNameMapThreshold);
  const auto r = spef::write_pspef(g.netlist, random_caps(g.netlist, 1));
  CHECK(r.text.find("*NAME_MAP") != std::string::npos);
  const auto back = spef::read_spef(r.text);
  CHECK(back == r.doc);
  CHECK(spef::write_spef(back) == r.text);
}
