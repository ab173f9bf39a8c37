// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "paragate/common/error.hpp"
#include "paragate/netlist/netlist.hpp"
#include "paragate/spef/spef.hpp"

namespace paragate::synth {

enum class SynthErrorKind { InfeasibleSpec, IOFailure };
using SynthError = KindedError<SynthErrorKind>;

/// Coefficients of the parasitic oracle:
///   base = c0 + c_wire * wirelength + c_fanout * fanout + c_congestion * congestion^2
/// where congestion is the RUDY density over the net's box in excess of the
/// die mean, relative to that mean.
///   cap  = round6(base * exp(noise_sigma * z)),  z ~ N(0, 1) stored per net
struct OracleParams {
  double c0 = 0.005;           // fF
  double c_wire = 0.1;         // fF per placement unit
  double c_fanout = 0.02;      // fF per sink
  double c_congestion = 0.3;   // fF
  double noise_sigma = 0.4;    // natural-log sigma
  int spring_iterations = 5;
  // How strongly the domain knob scales sigma and the congestion weight.
  double sigma_gain = 0.5;
  double congestion_gain = 2.0;
};

struct DesignSpec {
  std::string name = "design";
  std::size_t cells = 10000;
  double dff_fraction = 0.1;
  std::size_t depth = 18;
  double locality = 0.9;          // chance a side input picks a nearby driver
  double hub_fraction = 0.02;     // share of launch points acting as high-fanout hubs
  double hub_probability = 0.03;  // chance a side input taps a hub
  std::uint64_t seed = 1;
  double delta = 0.0;             // accumulated domain shift
  OracleParams oracle;
};

nlohmann::ordered_json to_json(const DesignSpec& s);
DesignSpec spec_from_json(const nlohmann::json& j);

/// Larger noise sigma and congestion weight, proportional to `delta`.
/// delta == 0 returns the spec unchanged.
DesignSpec domain_shift(const DesignSpec& spec, double delta);

struct NetRecord {
  std::string name;
  double wirelength = 0.0;
  std::size_t fanout = 0;
  double congestion = 0.0;
  double noise_z = 0.0;
  double cap_ff = 0.0;
};

struct OracleManifest {
  DesignSpec spec;
  std::size_t grid = 0;
  double max_density = 0.0;
  double mean_density = 0.0;
  std::vector<NetRecord> nets;
  std::size_t cells = 0;
  std::size_t dffs = 0;
  std::size_t pins = 0;
};

/// The cap a manifest record implies. Bitwise equal to the stored cap.
double oracle_cap(const OracleParams& p, const NetRecord& r);

nlohmann::ordered_json to_json(const OracleManifest& m);
OracleManifest manifest_from_json(const nlohmann::json& j);

struct GeneratedDesign {
  netlist::Netlist netlist;
  OracleManifest manifest;
  spef::SpefDocument golden;
};

/// Random levelized logic with a spring-relaxed placement and a parasitic
/// oracle. Same spec, same bytes.
GeneratedDesign generate(const DesignSpec& spec, std::shared_ptr<const netlist::CellLibrary> lib);

struct SuiteProfile {
  std::string name = "default";
  std::size_t pretrain = 200;
  std::size_t train = 8;
  std::size_t test = 6;
  std::size_t pretrain_min_cells = 100;
  std::size_t pretrain_max_cells = 1500;
  std::size_t large_min_cells = 10000;
  std::size_t large_max_cells = 16000;
  double target_delta = 1.0;  // shift applied to train/test designs
  std::uint64_t seed = 2024;
};

/// Named profiles: "default", "small", "tiny".
SuiteProfile profile_by_name(const std::string& name);

struct SuiteEntry {
  std::string name;
  std::string split;
  std::string dir;  // relative to the suite root
  std::size_t cells = 0;
  std::size_t nets = 0;
  std::size_t pins = 0;
  std::size_t dffs = 0;
};

struct Suite {
  std::string root;
  SuiteProfile profile;
  std::vector<SuiteEntry> designs;
  [[nodiscard]] std::vector<const SuiteEntry*> split(const std::string& which) const;
  [[nodiscard]] std::string library_path() const { return root + "/library.lib.toml"; }
  [[nodiscard]] std::string netlist_path(const SuiteEntry& e) const { return root + "/" + e.dir + "/netlist.v"; }
  [[nodiscard]] std::string golden_path(const SuiteEntry& e) const { return root + "/" + e.dir + "/golden.spef"; }
  [[nodiscard]] std::string oracle_path(const SuiteEntry& e) const { return root + "/" + e.dir + "/oracle.json"; }
};

/// Per-design specs of a profile, in suite order.
std::vector<std::pair<std::string, DesignSpec>> suite_specs(const SuiteProfile& p);

/// Writes library, designs and manifest.json under `out_dir`.
Suite build_benchmark_suite(const SuiteProfile& profile, const std::string& out_dir, unsigned threads = 1);
Suite load_suite(const std::string& dir);

}  // namespace paragate::synth
