// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "paragate/synth/synth.hpp"

using namespace paragate;

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j);
    i = j + 1;
  }
  return r;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

}  // namespace

TEST_CASE("same spec, same bytes") {
  const auto a = testutil::generated(800, 17);
  const auto b = testutil::generated(800, 17);
  CHECK(netlist::write_netlist(a.netlist) == netlist::write_netlist(b.netlist));
  CHECK(spef::write_spef(a.golden) == spef::write_spef(b.golden));
  CHECK(synth::to_json(a.manifest).dump() == synth::to_json(b.manifest).dump());
  const auto c = testutil::generated(800, 18);
  CHECK(netlist::write_netlist(a.netlist) != netlist::write_netlist(c.netlist));
}

TEST_CASE("flip-flop count tracks the requested fraction") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = testutil::generated(500, seed, 0.1);
    const auto dffs = static_cast<double>(g.manifest.dffs);
    CHECK(std::abs(dffs - 50.0) <= 2.0);
    CHECK(g.manifest.cells == 500);
    CHECK(netlist::validate(g.netlist).empty());
  }
}

TEST_CASE("large design caps span at least three decades") {
  const auto g = testutil::generated(10000, 5);
  double lo = 1e300, hi = 0.0;
  for (const auto& r : g.manifest.nets) {
    CHECK(r.cap_ff > 0.0);
    lo = std::min(lo, r.cap_ff);
    hi = std::max(hi, r.cap_ff);
  }
  CHECK(std::log10(hi / lo) >= 3.0);
}

TEST_CASE("manifest records reproduce the golden caps") {
  const auto g = testutil::generated(2000, 7);
  const auto caps = g.golden.cap_map();
  REQUIRE(g.manifest.nets.size() == g.netlist.nets().size());
  for (const auto& r : g.manifest.nets) {
    CHECK(synth::oracle_cap(g.manifest.spec.oracle, r) == r.cap_ff);
    CHECK(caps.at(r.name) == r.cap_ff);
  }
  // The manifest survives a JSON round trip.
  const auto back = synth::manifest_from_json(synth::to_json(g.manifest));
  CHECK(synth::to_json(back).dump() == synth::to_json(g.manifest).dump());
}

TEST_CASE("cap rank-correlates with wirelength and fanout") {
  const auto g = testutil::generated(3000, 9);
  std::vector<double> cap, wl, fo;
  for (const auto& r : g.manifest.nets) {
    cap.push_back(r.cap_ff);
    wl.push_back(r.wirelength);
    fo.push_back(static_cast<double>(r.fanout));
  }
  CHECK(spearman(cap, wl) > 0.3);
  CHECK(spearman(cap, fo) > 0.3);
}

TEST_CASE("domain shift: zero is identity, noise grows with delta") {
  synth::DesignSpec s;
  s.cells = 2000;
  s.seed = 3;
  const auto same = synth::domain_shift(s, 0.0);
  CHECK(synth::to_json(same).dump() == synth::to_json(s).dump());
  CHECK_THROWS_AS(synth::domain_shift(s, -0.5), synth::SynthError);

  double prev = -1.0;
  for (double delta : {0.0, 0.5, 1.0, 2.0}) {
    const auto sh = synth::domain_shift(s, delta);
    const double sigma = s.oracle.noise_sigma * (1.0 + s.oracle.sigma_gain * delta);
    CHECK(sh.oracle.noise_sigma == doctest::Approx(sigma).epsilon(1e-15));
    CHECK(sh.oracle.c_congestion ==
          doctest::Approx(s.oracle.c_congestion * (1.0 + s.oracle.congestion_gain * delta)).epsilon(1e-15));
    const auto g = synth::generate(sh, testutil::desk());
    // |log(cap / noiseless cap)| = sigma * |z| up to output rounding.
    std::vector<double> dev, absz;
    for (const auto& r : g.manifest.nets) {
      auto quiet = r;
      quiet.noise_z = 0.0;
      const double base = synth::oracle_cap(sh.oracle, quiet);
      if (base < 0.01 || r.cap_ff < 0.01) continue;  // rounding dominates tiny caps
      dev.push_back(std::abs(std::log(r.cap_ff / base)));
      absz.push_back(std::abs(r.noise_z));
    }
    const double p99 = quantile(dev, 0.99);
    CHECK(p99 == doctest::Approx(sigma * quantile(absz, 0.99)).epsilon(0.01));
    CHECK(p99 > prev);
    prev = p99;
  }
}

TEST_CASE("infeasible specs are rejected") {
  synth::DesignSpec s;
  s.cells = 0;
  CHECK_THROWS_AS(synth::generate(s, testutil::desk()), synth::SynthError);
  s.cells = 100;
  s.dff_fraction = 1.5;
  CHECK_THROWS_AS(synth::generate(s, testutil::desk()), synth::SynthError);
  CHECK_THROWS_AS(synth::profile_by_name("huge"), synth::SynthError);
}

TEST_CASE("suite profile: counts, disjoint splits, reload") {
  const auto p = synth::profile_by_name("tiny");
  const auto specs = synth::suite_specs(p);
  CHECK(specs.size() == p.pretrain + p.train + p.test);
  const auto dir = (std::filesystem::temp_directory_path() / "paragate_suite_test").string();
  std::filesystem::remove_all(dir);
  const auto suite = synth::build_benchmark_suite(p, dir);
  CHECK(suite.split("pretrain").size() == p.pretrain);
  CHECK(suite.split("train").size() == p.train);
  CHECK(suite.split("test").size() == p.test);
  std::set<std::string> names;
  for (const auto& d : suite.designs) {
    CHECK(names.insert(d.name).second);
    CHECK(std::filesystem::exists(suite.netlist_path(d)));
    CHECK(std::filesystem::exists(suite.golden_path(d)));
    CHECK(std::filesystem::exists(suite.oracle_path(d)));
  }
  for (const auto* d : suite.split("train")) CHECK(d->cells >= p.large_min_cells);
  for (const auto* d : suite.split("pretrain")) CHECK(d->cells <= p.pretrain_max_cells);
  const auto back = synth::load_suite(dir);
  REQUIRE(back.designs.size() == suite.designs.size());
  for (std::size_t i = 0; i < back.designs.size(); ++i) {
    CHECK(back.designs[i].name == suite.designs[i].name);
    CHECK(back.designs[i].split == suite.designs[i].split);
    CHECK(back.designs[i].nets == suite.designs[i].nets);
  }
  std::filesystem::remove_all(dir);
}
