// One PASS/FAIL line per acceptance criterion. Exit status is non-zero when
// any criterion fails.
//
// usage: acceptance <scenario-dir> [work-dir]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "distb/adversary.hpp"
#include "distb/consensus.hpp"
#include "distb/experiment.hpp"
#include "distb/fabric.hpp"
#include "distb/simulation.hpp"

namespace fs = std::filesystem;
using namespace distb;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("[{}] {:<2} {:<28} {}\n", pass ? "PASS" : "FAIL", id, name, detail)
            << std::flush;
}

double rel_diff(double a, double b) {
  const double m = std::max(std::abs(a), std::abs(b));
  return m == 0.0 ? 0.0 : std::abs(a - b) / m;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs a scenario file with output into `dir`, timing the whole experiment.
struct Timed {
  Report report;
  double wall = 0.0;
};

Timed run_file(const fs::path& cfg, const fs::path& dir) {
  const Scenario s = load_scenario(cfg);
  RunOptions o;
  o.out_dir = dir;
  const auto t0 = Clock::now();
  Timed t{run_experiment(s, o), 0.0};
  t.wall = seconds_since(t0);
  write_report(t.report, o);
  return t;
}

// 1
void tamper_evidence() {
  const auto t0 = Clock::now();
  Scenario s;
  s.seed = 42;
  s.duration_s = 60;
  s.variant = VariantSel::Distb;
  Simulation sim(s, Variant::Distb);
  sim.run();
  const Chain& chain = *sim.chain();
  if (chain.size() < 50) {
    report(1, "tamper evidence", false, fmt::format("only {} blocks produced", chain.size()));
    return;
  }
  std::vector<Bytes> encoded;
  for (std::size_t i = 0; i < 50; ++i) encoded.push_back(encode_block(chain.at(i)));

  auto verifies = [&](const std::vector<Bytes>& enc) {
    std::vector<Block> blocks;
    try {
      for (const auto& e : enc) blocks.push_back(decode_block(e));
    } catch (const std::exception&) {
      return false;
    }
    return verify_chain(blocks, chain.shared_registry(), chain.max_block_txs());
  };

  const bool clean = verifies(encoded);
  RngStream rng(42, 4);
  int detected = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<Bytes> copy = encoded;
    Bytes& victim = copy[rng.below(copy.size())];
    victim[rng.below(victim.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    if (!verifies(copy)) ++detected;
  }
  const double wall = seconds_since(t0);
  report(1, "tamper evidence", clean && detected == 100 && wall < 5.0,
         fmt::format("untampered={} detected={}/100 wall={:.2f}s", clean, detected, wall));
}

// 2
void quorum_exactness() {
  std::vector<std::array<std::uint8_t, 32>> seeds(12);
  auto registry = std::make_shared<KeyRegistry>();
  registry->scheme = SignatureScheme::Ed25519;
  std::vector<KeyPair> keys;
  for (EntityId id = 1; id <= 12; ++id) {
    std::array<std::uint8_t, 32> seed{};
    seed[0] = static_cast<std::uint8_t>(id);
    keys.push_back(derive_keypair(registry->scheme, seed));
    registry->keys[id] = keys.back().public_key;
  }
  const Hash32 h = sha256(Bytes{7});
  int cases = 0, mismatches = 0;
  for (std::uint32_t bp : {6000u, 6600u, 7500u, 8000u}) {
    const double tau = bp / 10000.0;
    for (std::uint32_t m = 1; m <= 12; ++m) {
      const std::uint32_t need = (bp * m + 9999) / 10000;
      if (quorum_size(tau, m) != need) ++mismatches;
      for (std::uint32_t a = 0; a <= m; ++a) {
        std::vector<Vote> votes;
        for (EntityId id = 1; id <= m; ++id) {
          votes.push_back(make_vote(id, h, id <= a, keys[id - 1], registry->scheme));
        }
        const TallyResult r = tally(h, votes, m, tau);
        ++cases;
        if (r.accepted != (a >= need) || r.accepts != a) ++mismatches;
      }
    }
  }
  report(2, "quorum exactness", mismatches == 0,
         fmt::format("cases={} mismatches={}", cases, mismatches));
}

// 3
void forged_boundary() {
  std::string outcomes;
  bool ok = true;
  for (std::uint32_t k = 0; k <= 10; ++k) {
    Kernel kernel(42);
    auto registry = std::make_shared<KeyRegistry>();
    std::vector<KeyPair> keys;
    for (EntityId id = 1; id <= 10; ++id) {
      std::array<std::uint8_t, 32> seed{};
      seed[0] = static_cast<std::uint8_t>(id);
      keys.push_back(derive_keypair(registry->scheme, seed));
      registry->keys[id] = keys.back().public_key;
    }
    ConsensusConfig cfg;
    cfg.tau = 0.66;
    ConsensusNet net(kernel, cfg, registry);
    for (EntityId id = 1; id <= 10; ++id) net.add_miner(id, keys[id - 1], id <= k);
    const EntityId proposer = k > 0 ? 1 : 2;
    RngStream rng(42, proposer * 8 + 6);
    net.inject_forged(proposer, forge_block(proposer, net.miner(proposer).replica, SimTime{}, rng));
    kernel.run_until(SimTime::ms(1000));
    const bool admitted = net.counters().forged_admitted == 1;
    outcomes += admitted ? 'A' : 'r';
    if (admitted != (k >= 7)) ok = false;
  }
  report(3, "forged-block boundary", ok,
         fmt::format("k=0..10 -> {} (r=rejected, A=admitted; expected admission from k=7)",
                     outcomes));
}

void conservation_detail(const RunResult& r, std::uint64_t& windows, std::uint64_t& bad) {
  std::uint64_t sent = 0, finished = 0;
  for (const auto& s : r.samples) {
    ++windows;
    sent += s.window.sent;
    finished += s.window.delivered + s.window.dropped();
    if (sent != finished + s.in_flight || s.cumulative_sent != sent) ++bad;
  }
  bad += r.conservation_violations;
}

// 4
void fig7(const Timed& t) {
  const RunResult* core = t.report.find(Variant::Core);
  const RunResult* distb = t.report.find(Variant::Distb);
  if (core == nullptr || distb == nullptr || core->samples.empty() || distb->samples.empty()) {
    report(4, "fig7 node failure", false, "missing runs");
    return;
  }
  const double c0 = core->samples.front().node_failure_pct;
  const double d0 = distb->samples.front().node_failure_pct;
  const double cf = core->samples.back().node_failure_pct;
  const double df = distb->samples.back().node_failure_pct;
  const bool ok = c0 <= 5.0 && d0 <= 5.0 && cf >= 85.0 && df >= 33.0 && df <= 48.0 && t.wall < 60.0;
  report(4, "fig7 node failure", ok,
         fmt::format("first window core={:.1f}% distb={:.1f}%; final core={:.1f}% distb={:.1f}%; "
                     "wall={:.1f}s",
                     c0, d0, cf, df, t.wall));
}

// 5
struct ShapeResult {
  bool ok = false;
  std::string detail;
};

ShapeResult shape(const Timed& t) {
  const RunResult* core = t.report.find(Variant::Core);
  const RunResult* distb = t.report.find(Variant::Distb);
  if (core == nullptr || distb == nullptr || core->samples.empty() ||
      core->samples.size() != distb->samples.size()) {
    return {false, "missing runs"};
  }
  const auto& cs = core->samples;
  const auto& ds = distb->samples;
  const double thr0 = rel_diff(cs[0].throughput_pps, ds[0].throughput_pps);
  const double sec0 = rel_diff(cs[0].security_rate_pct, ds[0].security_rate_pct);

  const std::uint64_t win = t.report.scenario.window_ms;
  const std::uint64_t start = t.report.scenario.attack.start.ticks();
  std::size_t post = 0, sec_wins = 0, thr_wins = 0;
  double min_margin = 1e9;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const std::uint64_t begin = cs[i].window_end.ticks() - std::min(cs[i].window_end.ticks(), win);
    if (begin < start + win) continue;
    ++post;
    const double margin = ds[i].security_rate_pct - cs[i].security_rate_pct;
    min_margin = std::min(min_margin, margin);
    if (margin > 0) ++sec_wins;
    if (ds[i].throughput_pps >= cs[i].throughput_pps) ++thr_wins;
  }
  const double thr_frac = post == 0 ? 0.0 : static_cast<double>(thr_wins) / static_cast<double>(post);
  const bool ok = thr0 < 0.05 && sec0 < 0.05 && post > 0 && sec_wins == post && thr_frac >= 0.8;
  return {ok, fmt::format("first window dthr={:.1f}% dsec={:.1f}%; post-warm-up security {}/{} "
                          "(min margin {:.2f}), throughput {}/{}",
                          100 * thr0, 100 * sec0, sec_wins, post, min_margin, thr_wins, post)};
}

// 8
void path_setup() {
  Kernel kernel(1);
  Fabric fabric(kernel, FabricConfig{});
  auto& topo = fabric.topology();
  for (EntityId s = 1; s <= 3; ++s) topo.add_switch(s, {100.0 * s, 0.0});
  topo.add_link(1, 2, fabric.config().link);
  topo.add_link(2, 3, fabric.config().link);
  topo.attach(100, 1);
  topo.attach(200, 3);
  std::uint64_t delivered = 0;
  fabric.on_deliver([&](EntityId host, FabricPacket&&) { delivered += host == 200; });
  auto send = [&](std::uint64_t id) {
    fabric.inject(100, FabricPacket{PacketHeader{id, 100, 200, PacketKind::Data, 256}, {}});
  };
  send(1);
  kernel.run_until(SimTime::ms(100));
  const auto first = fabric.counters();
  const bool setup = first.packet_ins == 1 && first.flow_mods_sent == 3 && delivered == 1;
  for (std::uint64_t id = 2; id <= 100; ++id) {
    kernel.schedule(SimTime::ms(100 + 10 * id), 100, EventKind::PacketSend, [&send, id] { send(id); });
  }
  kernel.run_until(SimTime::ms(2000));
  const std::uint64_t extra = fabric.counters().packet_ins - first.packet_ins;
  report(8, "3-switch path setup", setup && extra == 0 && delivered == 100,
         fmt::format("packet_ins={} flow_mods={} first_delivered={}; then 99 packets 10 ms apart: "
                     "extra_packet_ins={} delivered={}",
                     first.packet_ins, first.flow_mods_sent, setup, extra, delivered));
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <scenario-dir> [work-dir]\n";
    return 2;
  }
  const fs::path scenarios = argv[1];
  const fs::path work = argc > 2 ? fs::path(argv[2]) : fs::temp_directory_path() / "distb-acceptance";
  fs::create_directories(work);

  try {
    tamper_evidence();
    quorum_exactness();
    forged_boundary();

    const Timed f7 = run_file(scenarios / "fig7.cfg", work / "fig7");
    fig7(f7);

    const Timed f5 = run_file(scenarios / "fig5.cfg", work / "fig5");
    const Timed f6 = run_file(scenarios / "fig6.cfg", work / "fig6");
    const ShapeResult s5 = shape(f5);
    const ShapeResult s6 = shape(f6);
    report(5, "fig5/fig6 shape", s5.ok && s6.ok,
           fmt::format("fig5: {} | fig6: {}", s5.detail, s6.detail));

    const Timed f6b = run_file(scenarios / "fig6.cfg", work / "fig6-repeat");
    const std::string a = read_file(work / "fig6" / f6.report.scenario.csv);
    const std::string b = read_file(work / "fig6-repeat" / f6b.report.scenario.csv);
    report(6, "determinism", !a.empty() && a == b,
           fmt::format("fig6 CSV twice with seed {}: {} bytes, identical={}",
                       f6.report.scenario.seed, a.size(), a == b));

    std::uint64_t windows = 0, bad = 0;
    for (const Timed* t : {&f5, &f6, &f6b, &f7}) {
      for (const auto& r : t->report.runs) conservation_detail(r, windows, bad);
    }
    report(7, "conservation", windows > 0 && bad == 0,
           fmt::format("{} window closes over 8 runs, violations={}", windows, bad));

    path_setup();

    bool perf_ok = f5.report.scenario.nodes_total() == 50 && f5.report.scenario.duration_s == 600.0;
    std::string perf;
    for (const auto& r : f5.report.runs) {
      perf_ok = perf_ok && r.totals.sent >= 100000 && r.wall_seconds < 60.0;
      perf += fmt::format("{}: {} packets, {} events, {:.1f}s wall; ", to_string(r.variant),
                          r.totals.sent, r.events, r.wall_seconds);
    }
    report(9, "performance", perf_ok,
           fmt::format("{} nodes, {:.0f} s simulated; {}", f5.report.scenario.nodes_total(),
                       f5.report.scenario.duration_s, perf));
  } catch (const std::exception& e) {
    std::cout << "[FAIL] aborted: " << e.what() << '\n';
    return 1;
  }
  std::cout << (failures == 0 ? "all criteria passed\n" : fmt::format("{} criteria failed\n", failures));
  return failures == 0 ? 0 : 1;
}
