#include <doctest.h>

#include <algorithm>
#include <functional>
#include <set>

#include "distb/fabric.hpp"

using namespace distb;

namespace {

PacketHeader header(EntityId src, EntityId dst, PacketKind kind = PacketKind::Data) {
  return PacketHeader{1, src, dst, kind, 1024};
}

FlowRule rule(std::uint64_t id, std::uint32_t prio, FlowMatch m, Action a) {
  FlowRule r;
  r.rule_id = id;
  r.priority = prio;
  r.match = m;
  r.action = a;
  r.idle_timeout = SimTime::ms(100);
  return r;
}

/// Switches 1..n along a line, host 100 on switch 1 and host 200 on switch n.
struct Line {
  Kernel kernel{1};
  Fabric fabric;
  std::vector<EntityId> delivered;
  std::vector<DropReason> dropped;

  Line(std::uint32_t n, ControllerMode mode) : fabric(kernel, config(mode)) {
    for (EntityId s = 1; s <= n; ++s) fabric.topology().add_switch(s, {100.0 * s, 0.0});
    for (EntityId s = 1; s < n; ++s) fabric.topology().add_link(s, s + 1, fabric.config().link);
    fabric.topology().attach(100, 1);
    fabric.topology().attach(200, n);
    fabric.on_deliver([this](EntityId host, FabricPacket&&) { delivered.push_back(host); });
    fabric.on_drop([this](FabricPacket&&, DropReason r) { dropped.push_back(r); });
  }

  static FabricConfig config(ControllerMode mode) {
    FabricConfig c;
    c.controller.mode = mode;
    return c;
  }

  void send(std::uint64_t id, EntityId src = 100, EntityId dst = 200) {
    fabric.inject(src, FabricPacket{PacketHeader{id, src, dst, PacketKind::Data, 256}, {}});
  }
};

/// Lexicographically smallest among the minimum-hop simple paths.
std::optional<std::vector<EntityId>> brute_force_path(
    const std::map<EntityId, std::vector<EntityId>>& adj, const std::set<EntityId>& dead,
    EntityId from, EntityId to) {
  std::optional<std::vector<EntityId>> best;
  std::vector<EntityId> path{from};
  std::function<void()> dfs = [&] {
    const EntityId at = path.back();
    if (at == to) {
      if (!best || path.size() < best->size() || (path.size() == best->size() && path < *best)) {
        best = path;
      }
      return;
    }
    for (EntityId next : adj.at(at)) {
      if (dead.count(next) || std::find(path.begin(), path.end(), next) != path.end()) continue;
      path.push_back(next);
      dfs();
      path.pop_back();
    }
  };
  if (dead.count(from) || dead.count(to)) return std::nullopt;
  dfs();
  return best;
}

}  // namespace

TEST_CASE("flow table picks the highest priority, then the lowest rule id") {
  FlowTable t;
  const auto h = header(1, 2);
  CHECK(t.lookup(h, SimTime{}) == nullptr);
  t.install(rule(5, 10, {std::nullopt, 2, std::nullopt}, Action::forward(7)));
  t.install(rule(3, 10, {1, std::nullopt, std::nullopt}, Action::forward(8)));
  t.install(rule(9, 5, {}, Action::drop()));
  CHECK(t.lookup(h, SimTime{})->rule_id == 3);
  t.install(rule(11, 20, {1, 2, PacketKind::Ledger}, Action::drop()));
  CHECK(t.lookup(h, SimTime{})->rule_id == 3);
  CHECK(t.lookup(header(1, 2, PacketKind::Ledger), SimTime{})->rule_id == 11);
  CHECK(t.lookup(header(4, 4), SimTime{})->rule_id == 9);
  CHECK(t.match_and_touch(header(4, 5), SimTime{}) == Action::drop());
}

TEST_CASE("install replaces a rule with the same priority and match") {
  FlowTable t;
  CHECK_FALSE(t.install(rule(1, 10, {std::nullopt, 2, std::nullopt}, Action::forward(7))));
  CHECK(t.install(rule(2, 10, {std::nullopt, 2, std::nullopt}, Action::forward(9))));
  CHECK(t.size() == 1);
  CHECK(t.lookup(header(1, 2), SimTime{})->action == Action::forward(9));
}

TEST_CASE("idle rules expire unless hit") {
  FlowTable t;
  t.install(rule(1, 10, {std::nullopt, 2, std::nullopt}, Action::forward(7)));
  t.install(rule(2, 10, {std::nullopt, 3, std::nullopt}, Action::forward(8)));
  CHECK(t.match_and_touch(header(1, 2), SimTime::ms(90)) == Action::forward(7));
  CHECK(t.lookup(header(1, 3), SimTime::ms(150)) == nullptr);
  CHECK(t.lookup(header(1, 2), SimTime::ms(150)) != nullptr);
  CHECK(t.match_and_touch(header(1, 3), SimTime::ms(150)) == Action::to_controller());
  CHECK(t.purge_expired(SimTime::ms(150)) == 1);
  CHECK(t.size() == 1);
}

TEST_CASE("link queue at 150 offered over 100 served loses a third") {
  LinkParams p;
  p.capacity_pps = 100.0;
  p.queue_limit = 10;
  p.latency = SimTime::ms(2);
  LinkQueue q(p);
  std::uint64_t offered = 0, accepted = 0;
  for (std::uint64_t ms = 0; ms < 60000;) {
    ++offered;
    if (q.enqueue(SimTime::ms(ms), 1024)) ++accepted;
    ms += (offered % 3 == 0) ? 6 : 7;  // 150 per second on average
  }
  const double loss = 1.0 - static_cast<double>(accepted) / static_cast<double>(offered);
  CHECK(loss == doctest::Approx(1.0 / 3.0).epsilon(0.02));
}

TEST_CASE("link queue serves in order and adds latency") {
  LinkParams p;
  p.capacity_pps = 100.0;
  p.queue_limit = 2;
  p.latency = SimTime::ms(5);
  LinkQueue q(p);
  CHECK(q.enqueue(SimTime{}, 1024) == SimTime::ms(15));
  CHECK(q.enqueue(SimTime{}, 512) == SimTime::ms(20));
  CHECK_FALSE(q.enqueue(SimTime{}, 1024).has_value());
  CHECK(q.occupancy(SimTime::ms(10)) == 1);
  CHECK(q.enqueue(SimTime::ms(10), 1024) == SimTime::ms(30));
}

TEST_CASE("shortest paths match exhaustive search on random graphs") {
  RngStream rng(77, 1);
  for (int trial = 0; trial < 60; ++trial) {
    Topology topo;
    const std::uint32_t n = 3 + static_cast<std::uint32_t>(rng.below(5));
    for (EntityId s = 1; s <= n; ++s) topo.add_switch(s, {0.0, 0.0});
    for (EntityId a = 1; a <= n; ++a)
      for (EntityId b = a + 1; b <= n; ++b)
        if (rng.bernoulli(0.4)) topo.add_link(a, b, LinkParams{});
    std::set<EntityId> dead;
    if (rng.bernoulli(0.3)) {
      const EntityId d = 1 + rng.below(n);
      dead.insert(d);
      topo.set_alive(d, false);
    }
    std::map<EntityId, std::vector<EntityId>> adj;
    for (EntityId s = 1; s <= n; ++s) adj[s];
    for (const auto& [s, ns] : topo.adjacency()) adj[s] = ns;
    for (EntityId a = 1; a <= n; ++a) {
      for (EntityId b = 1; b <= n; ++b) {
        CAPTURE(trial);
        CAPTURE(a);
        CAPTURE(b);
        CHECK(topo.shortest_path(a, b) == brute_force_path(adj, dead, a, b));
      }
    }
  }
}

TEST_CASE("nearest switch skips dead switches and breaks ties by id") {
  Topology topo;
  topo.add_switch(1, {0, 0});
  topo.add_switch(2, {10, 0});
  topo.add_switch(3, {20, 0});
  CHECK(topo.nearest_switch({5, 0}) == 1u);
  CHECK(topo.nearest_switch({11, 0}) == 2u);
  topo.set_alive(2, false);
  CHECK(topo.nearest_switch({11, 0}) == 3u);
  CHECK(topo.nearest_switch({9, 0}) == 1u);
  topo.set_alive(1, false);
  topo.set_alive(3, false);
  CHECK_FALSE(topo.nearest_switch({11, 0}).has_value());
}

TEST_CASE("three-switch path setup installs one rule per hop and no further misses") {
  for (auto mode : {ControllerMode::Core, ControllerMode::Distb}) {
    Line line(3, mode);
    line.send(1);
    line.kernel.run_until(SimTime::ms(100));
    CHECK(line.fabric.counters().packet_ins == 1);
    CHECK(line.fabric.counters().flow_mods_sent == 3);
    CHECK(line.delivered == std::vector<EntityId>{200});
    for (EntityId s = 1; s <= 3; ++s) {
      REQUIRE(line.fabric.table(s).size() == 1);
      const EntityId next = s < 3 ? s + 1 : 200;
      CHECK(line.fabric.table(s).rules()[0].action == Action::forward(next));
    }
    for (std::uint64_t id = 2; id <= 20; ++id) line.send(id);
    line.kernel.run_until(SimTime::ms(400));
    CHECK(line.fabric.counters().packet_ins == 1);
    CHECK(line.delivered.size() == 20);
    CHECK(line.dropped.empty());
  }
}

TEST_CASE("core routes by destination, distb per flow") {
  for (auto mode : {ControllerMode::Core, ControllerMode::Distb}) {
    Line line(3, mode);
    line.fabric.topology().attach(101, 1);
    line.send(1, 100);
    line.kernel.run_until(SimTime::ms(100));
    line.send(2, 101);
    line.kernel.run_until(SimTime::ms(200));
    CHECK(line.delivered.size() == 2);
    CHECK(line.fabric.counters().packet_ins == (mode == ControllerMode::Core ? 1u : 2u));
  }
}

TEST_CASE("unadmitted sources get a drop rule at ingress") {
  Line line(3, ControllerMode::Distb);
  line.fabric.topology().attach(666, 1);
  line.fabric.controller().set_admission([](EntityId src, PacketKind) { return src != 666; });
  line.send(1, 666);
  line.kernel.run_until(SimTime::ms(50));
  CHECK(line.fabric.counters().packet_ins == 1);
  CHECK(line.fabric.table(1).rules().at(0).action == Action::drop());
  for (std::uint64_t id = 2; id < 10; ++id) line.send(id, 666);
  line.send(10, 100);
  line.kernel.run_until(SimTime::ms(150));
  CHECK(line.fabric.counters().packet_ins == 2);
  CHECK(line.fabric.counters().dropped_filtered == 9);
  CHECK(line.delivered == std::vector<EntityId>{200});
}

TEST_CASE("core mode does not filter sources") {
  Line line(2, ControllerMode::Core);
  line.fabric.topology().attach(666, 1);
  line.fabric.controller().set_admission([](EntityId, PacketKind) { return false; });
  line.send(1, 666);
  line.kernel.run_until(SimTime::ms(50));
  CHECK(line.delivered == std::vector<EntityId>{200});
}

TEST_CASE("a failed switch loses its rules and traffic reroutes") {
  Kernel kernel(1);
  Fabric fabric(kernel, FabricConfig{});
  auto& topo = fabric.topology();
  for (EntityId s = 1; s <= 4; ++s) topo.add_switch(s, {0, 0});
  topo.add_link(1, 2, LinkParams{});
  topo.add_link(2, 3, LinkParams{});
  topo.add_link(3, 4, LinkParams{});
  topo.add_link(4, 1, LinkParams{});
  topo.attach(100, 1);
  topo.attach(200, 3);
  int delivered = 0;
  fabric.on_deliver([&](EntityId, FabricPacket&&) { ++delivered; });
  auto send = [&](std::uint64_t id) {
    fabric.inject(100, FabricPacket{PacketHeader{id, 100, 200, PacketKind::Data, 256}, {}});
  };
  send(1);
  kernel.run_until(SimTime::ms(100));
  CHECK(fabric.table(1).rules().at(0).action == Action::forward(2));
  fabric.fail_switch(2);
  CHECK(fabric.table(1).size() == 1);
  kernel.run_until(SimTime::ms(100) + fabric.config().control_latency);
  CHECK(fabric.table(1).size() == 0);
  CHECK_FALSE(fabric.install_rule(2, rule(99, 1, {}, Action::drop())));
  CHECK(fabric.counters().flow_mods_lost == 1);
  send(2);
  kernel.run_until(SimTime::ms(300));
  CHECK(delivered == 2);
  CHECK(fabric.counters().packet_ins == 2);
  CHECK(fabric.table(1).rules().at(0).action == Action::forward(4));
}

TEST_CASE("packets to unreachable hosts are dropped as no route") {
  Line line(2, ControllerMode::Core);
  line.send(1, 100, 999);
  line.kernel.run_until(SimTime::ms(50));
  CHECK(line.dropped == std::vector<DropReason>{DropReason::NoRoute});
  CHECK(line.fabric.counters().dropped_no_route == 1);
}

TEST_CASE("host egress congestion drops with reason congestion") {
  Line line(1, ControllerMode::Core);
  line.send(1);
  line.kernel.run_until(SimTime::ms(50));
  for (std::uint64_t id = 2; id < 200; ++id) line.send(id);
  line.kernel.run_until(SimTime::ms(1000));
  CHECK(line.fabric.counters().dropped_congestion > 0);
  CHECK(line.delivered.size() + line.dropped.size() == 199);
  for (auto r : line.dropped) CHECK(r == DropReason::Congestion);
}
