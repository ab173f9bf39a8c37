// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>
#include <unordered_map>

#include "paragate/common/text.hpp"
#include "paragate/synth/synth.hpp"

namespace paragate::synth {

using netlist::InstId;
using netlist::kNone;
using netlist::NetId;
using netlist::Netlist;
using netlist::PinId;

namespace {

struct WeightedCell {
  const char* name;
  double weight;
};

constexpr WeightedCell kCombMix[] = {
    {"INV_X1", 10}, {"INV_X2", 4},  {"INV_X4", 2},  {"BUF_X1", 4},   {"BUF_X2", 2},   {"NAND2_X1", 14}, {"NOR2_X1", 10},
    {"AND2_X1", 8}, {"OR2_X1", 8},  {"XOR2_X1", 5}, {"NAND3_X1", 6}, {"AOI21_X1", 6}, {"MUX2_X1", 4},
};
constexpr const char* kDffCell = "DFF_X1";

// Hilbert index -> cell on an n x n grid (n a power of two).
void hilbert_d2xy(std::uint64_t n, std::uint64_t d, std::uint64_t& x, std::uint64_t& y) {
  x = y = 0;
  std::uint64_t t = d;
  for (std::uint64_t s = 1; s < n; s *= 2) {
    const std::uint64_t rx = 1 & (t / 2);
    const std::uint64_t ry = 1 & (t ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    t /= 4;
  }
}

struct Signal {
  std::string net;
  double locus = 0.0;
  std::size_t level = 0;
  std::size_t sinks = 0;
  bool is_pi = false;
};

struct CellPlan {
  std::string name;
  std::string cell;
  double locus = 0.0;
  std::size_t level = 0;
  std::vector<std::pair<std::string, std::size_t>> inputs;  // pin -> signal
  std::string out_pin;
  std::size_t out = 0;
};

// Signals sorted by locus, for nearest-neighbour picks along the curve.
class LocusIndex {
 public:
  void assign(std::vector<std::pair<double, std::size_t>> v) {
    std::sort(v.begin(), v.end());
    v_ = std::move(v);
  }
  void add(const std::vector<std::pair<double, std::size_t>>& more) {
    auto mid = v_.size();
    v_.insert(v_.end(), more.begin(), more.end());
    std::sort(v_.begin() + static_cast<std::ptrdiff_t>(mid), v_.end());
    std::inplace_merge(v_.begin(), v_.begin() + static_cast<std::ptrdiff_t>(mid), v_.end());
  }
  [[nodiscard]] bool empty() const { return v_.empty(); }
  [[nodiscard]] std::size_t size() const { return v_.size(); }
  std::size_t near(double u, std::mt19937_64& rng, int window) const {
    auto it = std::lower_bound(v_.begin(), v_.end(), std::make_pair(u, std::size_t{0}));
    auto pos = static_cast<std::ptrdiff_t>(it - v_.begin());
    std::uniform_int_distribution<int> off(-window, window - 1);
    pos += off(rng);
    pos = std::clamp<std::ptrdiff_t>(pos, 0, static_cast<std::ptrdiff_t>(v_.size()) - 1);
    return v_[static_cast<std::size_t>(pos)].second;
  }
  std::size_t any(std::mt19937_64& rng) const {
    std::uniform_int_distribution<std::size_t> d(0, v_.size() - 1);
    return v_[d(rng)].second;
  }

 private:
  std::vector<std::pair<double, std::size_t>> v_;
};

void check_spec(const DesignSpec& s) {
  auto bad = [&](const std::string& why) { throw SynthError(SynthErrorKind::InfeasibleSpec, s.name + ": " + why); };
  if (s.cells == 0) bad("cell count must be positive");
  if (s.depth == 0) bad("logic depth must be positive");
  for (double f : {s.dff_fraction, s.locality, s.hub_fraction, s.hub_probability}) {
    if (!(f >= 0.0 && f <= 1.0)) bad("fractions must lie in [0,1]");
  }
  if (!(s.delta >= 0.0)) bad("domain shift must be non-negative");
  const auto dffs = static_cast<std::size_t>(std::llround(s.dff_fraction * static_cast<double>(s.cells)));
  if (s.cells - std::min(dffs, s.cells) < s.depth) bad("logic depth exceeds the combinational cell budget");
  const auto& o = s.oracle;
  if (!(o.c0 > 0.0) || o.c_wire < 0.0 || o.c_fanout < 0.0 || o.c_congestion < 0.0 || o.noise_sigma < 0.0 ||
      o.spring_iterations < 0) {
    bad("oracle coefficients must be non-negative with c0 > 0");
  }
}

double round_g6(double v) { return std::strtod(text::format_g6(v).c_str(), nullptr); }

}  // namespace

double oracle_cap(const OracleParams& p, const NetRecord& r) {
  const double base = p.c0 + p.c_wire * r.wirelength + p.c_fanout * static_cast<double>(r.fanout) +
                      p.c_congestion * r.congestion * r.congestion;
  return round_g6(base * std::exp(p.noise_sigma * r.noise_z));
}

DesignSpec domain_shift(const DesignSpec& spec, double delta) {
  if (!(delta >= 0.0)) throw SynthError(SynthErrorKind::InfeasibleSpec, "domain shift must be non-negative");
  if (delta == 0.0) return spec;
  DesignSpec s = spec;
  s.delta += delta;
  s.oracle.noise_sigma *= 1.0 + s.oracle.sigma_gain * delta;
  s.oracle.c_congestion *= 1.0 + s.oracle.congestion_gain * delta;
  return s;
}

GeneratedDesign generate(const DesignSpec& spec, std::shared_ptr<const netlist::CellLibrary> lib) {
  check_spec(spec);
  for (const auto& wc : kCombMix) {
    if (!lib->find(wc.name)) throw SynthError(SynthErrorKind::InfeasibleSpec, std::string("library lacks ") + wc.name);
  }
  if (!lib->find(kDffCell)) throw SynthError(SynthErrorKind::InfeasibleSpec, "library lacks DFF_X1");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  // About one cell pitch along the curve, whatever the design size.
  std::normal_distribution<double> jitter(0.0, 1.0 / static_cast<double>(spec.cells));

  const std::size_t n_dff = static_cast<std::size_t>(std::llround(spec.dff_fraction * static_cast<double>(spec.cells)));
  const std::size_t n_comb = spec.cells - n_dff;
  const std::size_t n_pi = std::max<std::size_t>(2, static_cast<std::size_t>(std::sqrt(static_cast<double>(spec.cells))));

  std::vector<Signal> sig;
  std::vector<std::pair<double, std::size_t>> sources;
  for (std::size_t i = 0; i < n_pi; ++i) {
    sig.push_back({"pi" + std::to_string(i), (static_cast<double>(i) + 0.5) / static_cast<double>(n_pi), 0, 0, true});
    sources.emplace_back(sig.back().locus, sig.size() - 1);
  }
  std::vector<double> dff_locus(n_dff);
  std::vector<std::size_t> dff_q(n_dff);
  for (std::size_t i = 0; i < n_dff; ++i) {
    dff_locus[i] = unit(rng);
    sig.push_back({"q" + std::to_string(i), dff_locus[i], 0, 0, false});
    dff_q[i] = sig.size() - 1;
    sources.emplace_back(dff_locus[i], dff_q[i]);
  }
  std::vector<std::size_t> hubs;
  {
    const std::size_t n_hub =
        std::max<std::size_t>(1, static_cast<std::size_t>(spec.hub_fraction * static_cast<double>(sources.size())));
    std::vector<std::size_t> idx(sources.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < std::min(n_hub, idx.size()); ++i) hubs.push_back(sources[idx[i]].second);
  }

  std::vector<double> weights;
  for (const auto& wc : kCombMix) weights.push_back(wc.weight);
  std::discrete_distribution<std::size_t> pick_cell(weights.begin(), weights.end());

  // Level assignment: the first `depth` cells pin every level, the rest spread uniformly.
  std::vector<CellPlan> comb(n_comb);
  std::uniform_int_distribution<std::size_t> pick_level(1, spec.depth);
  for (std::size_t i = 0; i < n_comb; ++i) {
    comb[i].cell = kCombMix[pick_cell(rng)].name;
    comb[i].locus = unit(rng);
    comb[i].level = i < spec.depth ? i + 1 : pick_level(rng);
  }
  std::stable_sort(comb.begin(), comb.end(), [](const CellPlan& a, const CellPlan& b) { return a.level < b.level; });

  LocusIndex avail;   // everything below the current level
  LocusIndex prev;    // exactly one level below
  LocusIndex comb_out;
  avail.assign(sources);
  prev.assign(sources);
  std::size_t next_level_start = 0;
  std::vector<std::pair<double, std::size_t>> level_outs;
  for (std::size_t i = 0; i < n_comb; ++i) {
    CellPlan& c = comb[i];
    if (i == next_level_start) {
      // New level: outputs of the finished level become available.
      if (i > 0) {
        avail.add(level_outs);
        prev.assign(level_outs);
        comb_out.add(level_outs);
        level_outs.clear();
      }
      next_level_start = i;
      while (next_level_start < n_comb && comb[next_level_start].level == c.level) ++next_level_start;
    }
    c.name = "u" + std::to_string(i);
    const auto& def = lib->cell(*lib->find(c.cell));
    std::vector<std::size_t> used;
    bool first = true;
    for (const auto& p : def.pins) {
      if (p.direction != netlist::PinDirection::Input) continue;
      std::size_t s = 0;
      for (int attempt = 0; attempt < 8; ++attempt) {
        if (first) {
          s = prev.near(c.locus + jitter(rng), rng, 3);
        } else {
          const double r = unit(rng);
          if (r < spec.hub_probability && !hubs.empty()) {
            s = hubs[std::uniform_int_distribution<std::size_t>(0, hubs.size() - 1)(rng)];
          } else if (unit(rng) < spec.locality) {
            s = avail.near(c.locus + jitter(rng), rng, 4);
          } else {
            s = avail.any(rng);
          }
        }
        if (std::find(used.begin(), used.end(), s) == used.end()) break;
      }
      first = false;
      used.push_back(s);
      ++sig[s].sinks;
      c.inputs.emplace_back(p.name, s);
    }
    c.out_pin = def.pins[def.output_pin()].name;
    sig.push_back({"n" + std::to_string(i), c.locus, c.level, 0, false});
    c.out = sig.size() - 1;
    level_outs.emplace_back(c.locus, c.out);
  }
  comb_out.add(level_outs);

  std::vector<std::size_t> dff_d(n_dff);
  for (std::size_t i = 0; i < n_dff; ++i) {
    dff_d[i] = comb_out.near(dff_locus[i] + jitter(rng), rng, 4);
    ++sig[dff_d[i]].sinks;
  }

  // Assemble: used inputs, clock, outputs for every unloaded signal.
  netlist::NetlistBuilder b(spec.name, lib);
  std::vector<NetId> net_of(sig.size(), kNone);
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (sig[i].is_pi && sig[i].sinks > 0) net_of[i] = b.add_input(sig[i].net);
  }
  NetId clk = kNone;
  if (n_dff > 0) clk = b.add_input("clk");
  for (std::size_t i = 0; i < sig.size(); ++i) {
    if (sig[i].is_pi) continue;
    net_of[i] = sig[i].sinks == 0 ? b.add_output(sig[i].net) : b.add_net(sig[i].net);
  }
  for (const auto& c : comb) {
    std::vector<std::pair<std::string, NetId>> bind;
    for (const auto& [pin, s] : c.inputs) bind.emplace_back(pin, net_of[s]);
    bind.emplace_back(c.out_pin, net_of[c.out]);
    b.add_instance(c.name, c.cell, bind);
  }
  for (std::size_t i = 0; i < n_dff; ++i) {
    b.add_instance("r" + std::to_string(i), kDffCell,
                   {{"D", net_of[dff_d[i]]}, {"CK", clk}, {"Q", net_of[dff_q[i]]}});
  }
  // Canonical form: the design as it reads back from disk.
  Netlist built = std::move(b).build();
  Netlist n = netlist::parse_netlist(netlist::write_netlist(built), lib);

  // Placement: Hilbert-mapped loci, then spring relaxation toward net
  // centroids. The clock net is not a spring.
  const double side = std::sqrt(static_cast<double>(spec.cells));
  std::uint64_t grid_n = 1;
  while (static_cast<double>(grid_n) < side) grid_n *= 2;
  auto place_locus = [&](double u) {
    const auto cells_total = grid_n * grid_n;
    auto d = static_cast<std::uint64_t>(std::clamp(u, 0.0, 1.0) * static_cast<double>(cells_total));
    d = std::min(d, cells_total - 1);
    std::uint64_t hx = 0, hy = 0;
    hilbert_d2xy(grid_n, d, hx, hy);
    const double scale = side / static_cast<double>(grid_n);
    return std::pair{(static_cast<double>(hx) + unit(rng)) * scale, (static_cast<double>(hy) + unit(rng)) * scale};
  };
  std::unordered_map<std::string, double> locus_by_net;
  for (const auto& s : sig) locus_by_net.emplace(s.net, s.locus);

  std::vector<double> ix(n.cells().size()), iy(n.cells().size());
  for (InstId i = 0; i < n.cells().size(); ++i) {
    const auto& inst = n.cells()[i];
    const auto& def = n.cell_def(i);
    const NetId out = n.pins()[inst.pins[def.output_pin()]].net;
    auto [x, y] = place_locus(locus_by_net.at(n.nets()[out].name));
    ix[i] = x;
    iy[i] = y;
  }
  // Area I/O: a port sits where its net's locus maps; the clock enters at the centre.
  const std::size_t n_ports = n.ports().size();
  std::vector<double> px(n_ports), py(n_ports);
  for (std::size_t k = 0; k < n_ports; ++k) {
    const auto it = locus_by_net.find(n.nets()[n.ports()[k].net].name);
    if (it == locus_by_net.end()) {
      px[k] = py[k] = 0.5 * side;
    } else {
      std::tie(px[k], py[k]) = place_locus(it->second);
    }
  }
  auto pin_pos = [&](PinId p) -> std::pair<double, double> {
    const auto& pin = n.pins()[p];
    if (pin.is_port()) return {px[pin.lib_pin], py[pin.lib_pin]};
    return {ix[pin.inst], iy[pin.inst]};
  };
  auto is_clock_net = [&](NetId net) {
    for (PinId s : n.nets()[net].sinks) {
      const auto* d = n.pin_def(s);
      if (d && d->is_clock) return true;
    }
    return false;
  };
  std::vector<char> spring(n.nets().size());
  for (NetId k = 0; k < n.nets().size(); ++k) spring[k] = !is_clock_net(k);
  std::vector<double> cx(n.nets().size()), cy(n.nets().size());
  for (int it = 0; it < spec.oracle.spring_iterations; ++it) {
    for (NetId k = 0; k < n.nets().size(); ++k) {
      const auto& net = n.nets()[k];
      double sx = 0, sy = 0;
      std::size_t cnt = 0;
      for (const auto& list : {&net.drivers, &net.sinks}) {
        for (PinId p : *list) {
          auto [x, y] = pin_pos(p);
          sx += x;
          sy += y;
          ++cnt;
        }
      }
      cx[k] = cnt ? sx / static_cast<double>(cnt) : 0.0;
      cy[k] = cnt ? sy / static_cast<double>(cnt) : 0.0;
    }
    std::vector<double> nx(ix.size()), ny(iy.size());
    for (InstId i = 0; i < n.cells().size(); ++i) {
      double sx = 0, sy = 0;
      std::size_t cnt = 0;
      for (PinId p : n.cells()[i].pins) {
        const NetId net = n.pins()[p].net;
        if (net == kNone || !spring[net]) continue;
        sx += cx[net];
        sy += cy[net];
        ++cnt;
      }
      nx[i] = cnt ? 0.5 * ix[i] + 0.5 * sx / static_cast<double>(cnt) : ix[i];
      ny[i] = cnt ? 0.5 * iy[i] + 0.5 * sy / static_cast<double>(cnt) : iy[i];
    }
    ix.swap(nx);
    iy.swap(ny);
  }

  // Half-perimeter wirelength and RUDY congestion on a coarse grid.
  const std::size_t G = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(side / 4.0)));
  const double bin = side / static_cast<double>(G);
  struct Box {
    double x0, y0, x1, y1;
  };
  std::vector<Box> box(n.nets().size());
  std::vector<double> hpwl(n.nets().size());
  auto to_bin = [&](double v) {
    return std::min<std::size_t>(G - 1, static_cast<std::size_t>(std::max(0.0, v) / bin));
  };
  std::vector<double> diff((G + 1) * (G + 1), 0.0);
  for (NetId k = 0; k < n.nets().size(); ++k) {
    const auto& net = n.nets()[k];
    Box bx{1e300, 1e300, -1e300, -1e300};
    for (const auto& list : {&net.drivers, &net.sinks}) {
      for (PinId p : *list) {
        auto [x, y] = pin_pos(p);
        bx.x0 = std::min(bx.x0, x);
        bx.y0 = std::min(bx.y0, y);
        bx.x1 = std::max(bx.x1, x);
        bx.y1 = std::max(bx.y1, y);
      }
    }
    box[k] = bx;
    hpwl[k] = (bx.x1 - bx.x0) + (bx.y1 - bx.y0);
    const std::size_t a0 = to_bin(bx.x0), a1 = to_bin(bx.x1), b0 = to_bin(bx.y0), b1 = to_bin(bx.y1);
    const double area = static_cast<double>((a1 - a0 + 1) * (b1 - b0 + 1));
    const double d = hpwl[k] / area;
    diff[b0 * (G + 1) + a0] += d;
    diff[b0 * (G + 1) + a1 + 1] -= d;
    diff[(b1 + 1) * (G + 1) + a0] -= d;
    diff[(b1 + 1) * (G + 1) + a1 + 1] += d;
  }
  std::vector<double> dens(G * G);
  for (std::size_t y = 0; y < G; ++y) {
    for (std::size_t x = 0; x < G; ++x) {
      double v = diff[y * (G + 1) + x];
      if (x > 0) v += diff[y * (G + 1) + x - 1];
      if (y > 0) v += diff[(y - 1) * (G + 1) + x];
      if (x > 0 && y > 0) v -= diff[(y - 1) * (G + 1) + x - 1];
      diff[y * (G + 1) + x] = v;
      dens[y * G + x] = v;
    }
  }
  const double mean_d = std::accumulate(dens.begin(), dens.end(), 0.0) / static_cast<double>(dens.size());
  const double max_d = *std::max_element(dens.begin(), dens.end());
  // Prefix sums of density for box averages.
  std::vector<double> pre((G + 1) * (G + 1), 0.0);
  for (std::size_t y = 0; y < G; ++y) {
    for (std::size_t x = 0; x < G; ++x) {
      pre[(y + 1) * (G + 1) + x + 1] =
          dens[y * G + x] + pre[y * (G + 1) + x + 1] + pre[(y + 1) * (G + 1) + x] - pre[y * (G + 1) + x];
    }
  }

  GeneratedDesign out;
  OracleManifest& m = out.manifest;
  m.spec = spec;
  m.grid = G;
  m.max_density = max_d;
  m.mean_density = mean_d;
  m.cells = n.cells().size();
  m.dffs = n_dff;
  m.pins = n.pins().size();
  // Noise draws come from their own stream so the domain knob never moves the topology.
  std::mt19937_64 noise_rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::unordered_map<std::string, double> caps;
  m.nets.reserve(n.nets().size());
  for (NetId k = 0; k < n.nets().size(); ++k) {
    const std::size_t a0 = to_bin(box[k].x0), a1 = to_bin(box[k].x1), b0 = to_bin(box[k].y0), b1 = to_bin(box[k].y1);
    const double sum = pre[(b1 + 1) * (G + 1) + a1 + 1] - pre[b0 * (G + 1) + a1 + 1] - pre[(b1 + 1) * (G + 1) + a0] +
                       pre[b0 * (G + 1) + a0];
    const double area = static_cast<double>((a1 - a0 + 1) * (b1 - b0 + 1));
    NetRecord r;
    r.name = n.nets()[k].name;
    r.wirelength = hpwl[k];
    r.fanout = n.nets()[k].sinks.size();
    r.congestion = mean_d > 0.0 ? std::max(0.0, sum / area / mean_d - 1.0) : 0.0;
    r.noise_z = gauss(noise_rng);
    r.cap_ff = oracle_cap(spec.oracle, r);
    caps.emplace(r.name, r.cap_ff);
    m.nets.push_back(std::move(r));
  }
  out.golden = spef::make_pspef(n, caps);
  out.golden.program = "paragate-oracle";
  out.netlist = std::move(n);
  return out;
}

}  // namespace paragate::synth
