// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <random>
#include <thread>

#include "paragate/common/text.hpp"
#include "paragate/synth/synth.hpp"

namespace paragate::synth {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const DesignSpec& s) {
  ordered_json j;
  j["name"] = s.name;
  j["cells"] = s.cells;
  j["dff_fraction"] = s.dff_fraction;
  j["depth"] = s.depth;
  j["locality"] = s.locality;
  j["hub_fraction"] = s.hub_fraction;
  j["hub_probability"] = s.hub_probability;
  j["seed"] = s.seed;
  j["delta"] = s.delta;
  const auto& o = s.oracle;
  j["oracle"] = {{"c0", o.c0},
                 {"c_wire", o.c_wire},
                 {"c_fanout", o.c_fanout},
                 {"c_congestion", o.c_congestion},
                 {"noise_sigma", o.noise_sigma},
                 {"spring_iterations", o.spring_iterations},
                 {"sigma_gain", o.sigma_gain},
                 {"congestion_gain", o.congestion_gain}};
  return j;
}

DesignSpec spec_from_json(const json& j) {
  DesignSpec s;
  s.name = j.at("name").get<std::string>();
  s.cells = j.at("cells").get<std::size_t>();
  s.dff_fraction = j.at("dff_fraction").get<double>();
  s.depth = j.at("depth").get<std::size_t>();
  s.locality = j.at("locality").get<double>();
  s.hub_fraction = j.at("hub_fraction").get<double>();
  s.hub_probability = j.at("hub_probability").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.delta = j.at("delta").get<double>();
  const auto& o = j.at("oracle");
  s.oracle.c0 = o.at("c0").get<double>();
  s.oracle.c_wire = o.at("c_wire").get<double>();
  s.oracle.c_fanout = o.at("c_fanout").get<double>();
  s.oracle.c_congestion = o.at("c_congestion").get<double>();
  s.oracle.noise_sigma = o.at("noise_sigma").get<double>();
  s.oracle.spring_iterations = o.at("spring_iterations").get<int>();
  s.oracle.sigma_gain = o.at("sigma_gain").get<double>();
  s.oracle.congestion_gain = o.at("congestion_gain").get<double>();
  return s;
}

ordered_json to_json(const OracleManifest& m) {
  ordered_json j;
  j["spec"] = to_json(m.spec);
  j["cells"] = m.cells;
  j["dffs"] = m.dffs;
  j["pins"] = m.pins;
  j["congestion"] = {{"grid", m.grid}, {"max_density", m.max_density}, {"mean_density", m.mean_density}};
  auto& nets = j["nets"] = ordered_json::array();
  for (const auto& r : m.nets) {
    nets.push_back(ordered_json{{"name", r.name},
                                {"wirelength", r.wirelength},
                                {"fanout", r.fanout},
                                {"congestion", r.congestion},
                                {"noise_z", r.noise_z},
                                {"cap_ff", r.cap_ff}});
  }
  return j;
}

OracleManifest manifest_from_json(const json& j) {
  OracleManifest m;
  m.spec = spec_from_json(j.at("spec"));
  m.cells = j.at("cells").get<std::size_t>();
  m.dffs = j.at("dffs").get<std::size_t>();
  m.pins = j.at("pins").get<std::size_t>();
  const auto& c = j.at("congestion");
  m.grid = c.at("grid").get<std::size_t>();
  m.max_density = c.at("max_density").get<double>();
  m.mean_density = c.at("mean_density").get<double>();
  for (const auto& r : j.at("nets")) {
    m.nets.push_back({r.at("name").get<std::string>(), r.at("wirelength").get<double>(), r.at("fanout").get<std::size_t>(),
                      r.at("congestion").get<double>(), r.at("noise_z").get<double>(), r.at("cap_ff").get<double>()});
  }
  return m;
}

SuiteProfile profile_by_name(const std::string& name) {
  SuiteProfile p;
  p.name = name;
  if (name == "default") return p;
  if (name == "small") {
    p.pretrain = 40;
    p.train = 3;
    p.test = 3;
    p.pretrain_min_cells = 100;
    p.pretrain_max_cells = 600;
    p.large_min_cells = 2000;
    p.large_max_cells = 4000;
    return p;
  }
  if (name == "tiny") {
    p.pretrain = 6;
    p.train = 2;
    p.test = 2;
    p.pretrain_min_cells = 40;
    p.pretrain_max_cells = 120;
    p.large_min_cells = 300;
    p.large_max_cells = 600;
    return p;
  }
  throw SynthError(SynthErrorKind::InfeasibleSpec, "unknown profile '" + name + "' (expected default, small or tiny)");
}

std::vector<const SuiteEntry*> Suite::split(const std::string& which) const {
  std::vector<const SuiteEntry*> v;
  for (const auto& d : designs) {
    if (d.split == which) v.push_back(&d);
  }
  return v;
}

std::vector<std::pair<std::string, DesignSpec>> suite_specs(const SuiteProfile& p) {
  std::mt19937_64 rng(p.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::pair<std::string, DesignSpec>> out;
  auto make = [&](const std::string& name, std::size_t lo, std::size_t hi, double delta) {
    DesignSpec s;
    s.name = name;
    const double u = unit(rng);
    s.cells = static_cast<std::size_t>(std::llround(std::exp(std::log(double(lo)) + u * (std::log(double(hi)) - std::log(double(lo))))));
    const int jitter = static_cast<int>(std::floor(unit(rng) * 5.0)) - 2;
    const double base_depth = 4.0 + 2.2 * std::log2(static_cast<double>(s.cells) / 50.0);
    s.depth = static_cast<std::size_t>(std::clamp(static_cast<int>(std::lround(base_depth)) + jitter, 4, 30));
    s.dff_fraction = 0.06 + 0.08 * unit(rng);
    s.seed = rng();
    out.emplace_back("", delta > 0.0 ? domain_shift(s, delta) : s);
  };
  char buf[32];
  for (std::size_t i = 0; i < p.pretrain; ++i) {
    std::snprintf(buf, sizeof buf, "pre_%03zu", i);
    make(buf, p.pretrain_min_cells, p.pretrain_max_cells, 0.0);
    out.back().first = "pretrain";
  }
  for (std::size_t i = 0; i < p.train; ++i) {
    std::snprintf(buf, sizeof buf, "train_%02zu", i);
    make(buf, p.large_min_cells, p.large_max_cells, p.target_delta);
    out.back().first = "train";
  }
  for (std::size_t i = 0; i < p.test; ++i) {
    std::snprintf(buf, sizeof buf, "test_%02zu", i);
    make(buf, p.large_min_cells, p.large_max_cells, p.target_delta);
    out.back().first = "test";
  }
  return out;
}

namespace {

ordered_json profile_json(const SuiteProfile& p) {
  return ordered_json{{"name", p.name},
                      {"pretrain", p.pretrain},
                      {"train", p.train},
                      {"test", p.test},
                      {"pretrain_cells", {p.pretrain_min_cells, p.pretrain_max_cells}},
                      {"large_cells", {p.large_min_cells, p.large_max_cells}},
                      {"target_delta", p.target_delta},
                      {"seed", p.seed}};
}

SuiteProfile profile_from_json(const json& j) {
  SuiteProfile p;
  p.name = j.at("name").get<std::string>();
  p.pretrain = j.at("pretrain").get<std::size_t>();
  p.train = j.at("train").get<std::size_t>();
  p.test = j.at("test").get<std::size_t>();
  p.pretrain_min_cells = j.at("pretrain_cells").at(0).get<std::size_t>();
  p.pretrain_max_cells = j.at("pretrain_cells").at(1).get<std::size_t>();
  p.large_min_cells = j.at("large_cells").at(0).get<std::size_t>();
  p.large_max_cells = j.at("large_cells").at(1).get<std::size_t>();
  p.target_delta = j.at("target_delta").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

void write_or_throw(const std::string& path, const std::string& body) {
  try {
    text::write_file(path, body);
  } catch (const std::exception& e) {
    throw SynthError(SynthErrorKind::IOFailure, e.what());
  }
}

}  // namespace

Suite build_benchmark_suite(const SuiteProfile& profile, const std::string& out_dir, unsigned threads) {
  auto lib = std::make_shared<const netlist::CellLibrary>(netlist::desk_library());
  const auto specs = suite_specs(profile);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "designs", ec);
  if (ec) throw SynthError(SynthErrorKind::IOFailure, "cannot create '" + out_dir + "': " + ec.message());
  write_or_throw(out_dir + "/library.lib.toml", netlist::write_library(*lib));

  Suite suite;
  suite.root = out_dir;
  suite.profile = profile;
  suite.designs.resize(specs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t i = next++; i < specs.size(); i = next++) {
      try {
        const auto& [split, spec] = specs[i];
        auto g = generate(spec, lib);
        SuiteEntry e;
        e.name = spec.name;
        e.split = split;
        e.dir = "designs/" + spec.name;
        e.cells = g.netlist.cells().size();
        e.nets = g.netlist.nets().size();
        e.pins = g.netlist.pins().size();
        e.dffs = g.manifest.dffs;
        std::error_code dec;
        fs::create_directories(fs::path(out_dir) / e.dir, dec);
        if (dec) throw SynthError(SynthErrorKind::IOFailure, "cannot create " + e.dir + ": " + dec.message());
        write_or_throw(out_dir + "/" + e.dir + "/netlist.v", netlist::write_netlist(g.netlist));
        write_or_throw(out_dir + "/" + e.dir + "/golden.spef", spef::write_spef(g.golden));
        write_or_throw(out_dir + "/" + e.dir + "/oracle.json", to_json(g.manifest).dump(1) + "\n");
        suite.designs[i] = std::move(e);
      } catch (...) {
        std::lock_guard lk(failure_mu);
        if (!failure) failure = std::current_exception();
        next = specs.size();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(specs.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  ordered_json j;
  j["profile"] = profile_json(profile);
  j["library"] = "library.lib.toml";
  ordered_json splits, totals;
  for (const char* s : {"pretrain", "train", "test"}) {
    splits[s] = ordered_json::array();
    std::size_t cells = 0, nodes = 0, nets = 0, n = 0;
    for (const auto* e : suite.split(s)) {
      splits[s].push_back(e->name);
      cells += e->cells;
      nodes += e->pins;
      nets += e->nets;
      ++n;
    }
    totals[s] = {{"designs", n}, {"cells", cells}, {"nodes", nodes}, {"nets", nets}};
  }
  j["splits"] = splits;
  j["totals"] = totals;
  auto& designs = j["designs"] = ordered_json::object();
  for (const auto& e : suite.designs) {
    designs[e.name] = {{"split", e.split}, {"dir", e.dir},   {"cells", e.cells},
                       {"nets", e.nets},   {"pins", e.pins}, {"dffs", e.dffs}};
  }
  write_or_throw(out_dir + "/manifest.json", j.dump(2) + "\n");
  return suite;
}

Suite load_suite(const std::string& dir) {
  json j;
  try {
    j = json::parse(text::read_file(dir + "/manifest.json"));
  } catch (const std::exception& e) {
    throw SynthError(SynthErrorKind::IOFailure, "cannot read suite manifest in '" + dir + "': " + e.what());
  }
  Suite s;
  s.root = dir;
  s.profile = profile_from_json(j.at("profile"));
  for (const char* split : {"pretrain", "train", "test"}) {
    for (const auto& name_j : j.at("splits").at(split)) {
      const auto name = name_j.get<std::string>();
      const auto& d = j.at("designs").at(name);
      s.designs.push_back({name, d.at("split").get<std::string>(), d.at("dir").get<std::string>(),
                           d.at("cells").get<std::size_t>(), d.at("nets").get<std::size_t>(),
                           d.at("pins").get<std::size_t>(), d.at("dffs").get<std::size_t>()});
    }
  }
  return s;
}

}  // namespace paragate::synth
