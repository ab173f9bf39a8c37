// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "paragate/netlist/netlist.hpp"
#include "paragate/synth/synth.hpp"

namespace testutil {

inline std::shared_ptr<const paragate::netlist::CellLibrary> desk() {
  static auto lib = std::make_shared<const paragate::netlist::CellLibrary>(paragate::netlist::desk_library());
  return lib;
}

// a -> INV -> n1 -> BUF -> y
inline const char* kChain = R"(module chain (a, y);
  input a;
  output y;
  wire n1;
  INV_X1 u1 (.A(a), .Y(n1));
  BUF_X1 u2 (.A(n1), .Y(y));
endmodule
)";

inline paragate::netlist::Netlist chain() { return paragate::netlist::parse_netlist(kChain, desk()); }

inline paragate::synth::GeneratedDesign generated(std::size_t cells, std::uint64_t seed, double dff = 0.1) {
  paragate::synth::DesignSpec s;
  s.name = "gen" + std::to_string(seed);
  s.cells = cells;
  s.seed = seed;
  s.dff_fraction = dff;
  s.depth = cells < 40 ? 4 : 12;
  return paragate::synth::generate(s, desk());
}

}  // namespace testutil
