// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <deque>

#include "paragate/netlist/netlist.hpp"

namespace paragate::netlist {
namespace {

// Calls f(succ) for each combinational successor of `pin`.
template <typename F>
void for_each_successor(const Netlist& n, PinId pin, F&& f) {
  const Pin& p = n.pins()[pin];
  if (p.is_driver()) {
    if (p.net == kNone) return;
    for (PinId s : n.nets()[p.net].sinks) f(s);
  } else if (p.kind == PinKind::CellInput) {
    const CellDef& def = n.cell_def(p.inst);
    if (def.is_sequential) return;
    f(n.cells()[p.inst].pins[def.output_pin()]);
  }
}

}  // namespace

std::vector<PinId> find_combinational_cycle(const Netlist& n) {
  const std::size_t count = n.pins().size();
  // 0 = unvisited, 1 = on stack, 2 = done
  std::vector<std::uint8_t> color(count, 0);
  struct Frame {
    PinId pin;
    std::vector<PinId> next;
    std::size_t i;
  };
  for (PinId root = 0; root < count; ++root) {
    if (color[root] != 0) continue;
    std::vector<Frame> stack;
    auto push = [&](PinId v) {
      color[v] = 1;
      Frame fr{v, {}, 0};
      for_each_successor(n, v, [&](PinId s) { fr.next.push_back(s); });
      stack.push_back(std::move(fr));
    };
    push(root);
    while (!stack.empty()) {
      Frame& top = stack.back();
      if (top.i == top.next.size()) {
        color[top.pin] = 2;
        stack.pop_back();
        continue;
      }
      const PinId s = top.next[top.i++];
      if (color[s] == 1) {
        std::vector<PinId> cycle;
        auto it = std::find_if(stack.begin(), stack.end(), [&](const Frame& f) { return f.pin == s; });
        for (; it != stack.end(); ++it) cycle.push_back(it->pin);
        return cycle;
      }
      if (color[s] == 0) push(s);
    }
  }
  return {};
}

Levelization levelize(const Netlist& n) {
  const std::size_t count = n.pins().size();
  std::vector<std::uint32_t> indeg(count, 0);
  for (PinId p = 0; p < count; ++p) {
    for_each_successor(n, p, [&](PinId s) { ++indeg[s]; });
  }
  Levelization lv;
  lv.order.reserve(count);
  lv.level.assign(count, 0);
  std::deque<PinId> queue;
  for (PinId p = 0; p < count; ++p) {
    if (indeg[p] == 0) queue.push_back(p);
  }
  while (!queue.empty()) {
    const PinId p = queue.front();
    queue.pop_front();
    lv.order.push_back(p);
    lv.max_level = std::max(lv.max_level, lv.level[p]);
    for_each_successor(n, p, [&](PinId s) {
      lv.level[s] = std::max(lv.level[s], lv.level[p] + 1);
      if (--indeg[s] == 0) queue.push_back(s);
    });
  }
  if (lv.order.size() != count) {
    auto cycle = find_combinational_cycle(n);
    std::string witness;
    for (PinId p : cycle) witness += (witness.empty() ? "" : " -> ") + n.pin_name(p);
    throw NetlistError(NetlistErrorKind::CombinationalLoop, "combinational loop: " + witness);
  }
  return lv;
}

}  // namespace paragate::netlist
