// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "paragate/sta/sta.hpp"

namespace paragate::pipeline {

/// Asynchronous message passing in levelized order. Each cell arc sends
///   delay = w . [d0, k_slew * slew_in, k_load * load, 1]
///   slew  = u . [s0, s_slew * slew_in, s_load * load, 1]
/// and an output pin keeps the max over its arcs, one level at a time.
struct Surrogate {
  std::array<double, 4> w{};
  std::array<double, 4> u{};
};

/// Weights that reproduce the affine STA engine exactly.
Surrogate exact_surrogate();
/// Uniform draw in [0.5, 1.5] for the scale terms, zero offsets.
Surrogate random_surrogate(std::uint64_t seed);

nlohmann::ordered_json to_json(const Surrogate& s);
Surrogate surrogate_from_json(const nlohmann::json& j);

/// Per-pin arrival/slew with wire caps from `caps` (missing nets count as 0).
std::vector<sta::PinTiming> propagate(const Surrogate& s, const netlist::Netlist& n,
                                      const std::unordered_map<std::string, double>& caps, const sta::ClockSpec& clock);

struct SurrogateExample {
  const netlist::Netlist* netlist = nullptr;
  const std::unordered_map<std::string, double>* caps = nullptr;
  std::vector<netlist::PinId> pins;  // supervised pins
  std::vector<double> target;        // arrival times (ps)
};

struct SurrogateLog {
  std::vector<double> loss;  // per epoch, epoch 0 before training
};

/// Adam on the mean squared arrival error (in units of 100 ps) over all examples.
SurrogateLog train_surrogate(Surrogate& s, const std::vector<SurrogateExample>& data, const sta::ClockSpec& clock,
                             std::size_t epochs, double lr);

}  // namespace paragate::pipeline
