#include "distb/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include <fmt/format.h>

#include "distb/adversary.hpp"

namespace distb {

WorldLayout WorldLayout::from(const Scenario& s) {
  WorldLayout w;
  EntityId next = kSystemId + 1;
  auto fill = [&next](std::vector<EntityId>& v, std::uint32_t n) {
    for (std::uint32_t i = 0; i < n; ++i) v.push_back(next++);
  };
  fill(w.switches, s.switches);
  fill(w.gateways, s.gateways);
  fill(w.miners, s.miners);
  fill(w.sensors, s.sensors);
  fill(w.attackers, s.attack.attacker_count);
  return w;
}

namespace {

struct DataBody {
  DataPacket pkt;
  std::optional<Transaction> tx;
  bool junk = false;
};

struct LedgerBody {
  EntityId to = 0;
  LedgerMessage msg;
};

constexpr std::uint64_t kLedgerPacketBase = std::uint64_t{1} << 63;
constexpr SimTime kFloodTick = SimTime::ms(10);
constexpr std::uint64_t kPurposes = 7;

enum class Role : std::uint8_t { Switch, Gateway, Miner, Sensor, Attacker };

FabricConfig fabric_config(const Scenario& s, Variant v) {
  FabricConfig c;
  c.controller.mode = v == Variant::Core ? ControllerMode::Core : ControllerMode::Distb;
  c.controller.idle_timeout = SimTime::ms(s.idle_timeout_ms);
  c.link.latency = SimTime::ms(s.link_latency_ms);
  c.link.capacity_pps = s.link_capacity_pps;
  c.link.queue_limit = s.queue_limit;
  c.access_latency = SimTime::ms(s.access_latency_ms);
  c.control_latency = SimTime::ms(s.control_latency_ms);
  return c;
}

}  // namespace

struct Simulation::Impl {
  Impl(const Scenario& s, Variant v)
      : sc(s),
        variant(v),
        mode(v == Variant::Core ? ControllerMode::Core : ControllerMode::Distb),
        layout(WorldLayout::from(s)),
        kernel(s.seed),
        fabric(kernel, fabric_config(s, v)),
        registry(std::make_shared<KeyRegistry>()),
        metrics(v, SimTime::ms(s.window_ms), s.nodes_total()),
        compromise(s.attack, mode),
        end(SimTime::seconds(s.duration_s)) {
    result.variant = v;
    build();
  }

  Scenario sc;
  Variant variant;
  ControllerMode mode;
  WorldLayout layout;
  Kernel kernel;
  Fabric fabric;
  std::shared_ptr<KeyRegistry> registry;
  std::map<EntityId, KeyPair> keys;
  std::unique_ptr<ConsensusNet> consensus;
  MetricsRecorder metrics;
  CompromiseProcess compromise;
  SimTime end;

  std::map<EntityId, Role> roles;
  std::map<EntityId, bool> alive;
  std::vector<SensorNode> sensors;
  std::map<EntityId, Position> host_pos;
  std::map<EntityId, double> flood_credit;
  std::map<EntityId, std::uint64_t> junk_seq;
  std::vector<EntityId> compromised_miners;
  std::uint64_t ledger_seq = 0;

  RunResult result;
  bool keep_outcomes = false;
  std::vector<OutcomeRecord> outcomes;
  std::ostream* audit = nullptr;
  bool ran = false;

  RngStream& rng(EntityId id, StreamPurpose p) { return kernel.rng(stream_id(id, p)); }

  SensorNode& sensor(EntityId id) { return sensors.at(id - layout.sensors.front()); }

  void finish(std::uint64_t pkt_id, Outcome o) {
    metrics.record(pkt_id, o);
    if (keep_outcomes) outcomes.push_back({pkt_id, kernel.now(), o});
  }

  void log(const std::string& line) {
    if (audit != nullptr) *audit << line << '\n';
  }

  void build() {
    const EntityId last = layout.attackers.empty()
                              ? (layout.sensors.empty() ? layout.miners.back() : layout.sensors.back())
                              : layout.attackers.back();
    for (EntityId id = kSystemId + 1; id <= last; ++id) {
      for (std::uint64_t p = 0; p < kPurposes; ++p) kernel.register_stream(id * 8 + p);
    }

    // Metric windows first so that they sort ahead of same-tick traffic.
    for (std::uint64_t k = 1; SimTime::ms(k * sc.window_ms) <= end; ++k) {
      kernel.schedule(SimTime::ms(k * sc.window_ms), kSystemId, EventKind::MetricWindow,
                      [this] { metrics.close_window(kernel.now()); });
    }
    if (end.ticks() % sc.window_ms != 0) {
      kernel.schedule(end, kSystemId, EventKind::MetricWindow,
                      [this] { metrics.close_window(kernel.now()); });
    }

    build_switches();
    if (mode == ControllerMode::Distb) build_keys();
    build_static_hosts();
    build_sensors();
    build_attackers();
    wire_fabric();
    if (mode == ControllerMode::Distb) build_ledger();
    schedule_attacks();
    fabric.start_rule_sweeps();
  }

  void build_switches() {
    auto& topo = fabric.topology();
    const auto n = static_cast<std::uint32_t>(layout.switches.size());
    const auto cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(n))));
    const std::uint32_t rows = (n + cols - 1) / cols;
    for (std::uint32_t k = 0; k < n; ++k) {
      const std::uint32_t r = k / cols, c = k % cols;
      const Position p{(c + 0.5) * sc.field.width_m / cols, (r + 0.5) * sc.field.height_m / rows};
      topo.add_switch(layout.switches[k], p);
      roles[layout.switches[k]] = Role::Switch;
      alive[layout.switches[k]] = true;
    }
    const LinkParams link = fabric.config().link;
    for (std::uint32_t k = 0; k < n; ++k) {
      const std::uint32_t c = k % cols;
      if (c + 1 < cols && k + 1 < n) topo.add_link(layout.switches[k], layout.switches[k + 1], link);
      if (k + cols < n) topo.add_link(layout.switches[k], layout.switches[k + cols], link);
    }
  }

  void build_keys() {
    registry->scheme = sc.fast_crypto ? SignatureScheme::FastMac : SignatureScheme::Ed25519;
    auto add = [&](EntityId id) {
      std::array<std::uint8_t, 32> seed{};
      RngStream& r = rng(id, StreamPurpose::Keys);
      for (std::size_t i = 0; i < seed.size(); i += 8) {
        const std::uint64_t w = r.next_u64();
        for (std::size_t b = 0; b < 8; ++b) seed[i + b] = static_cast<std::uint8_t>(w >> (8 * b));
      }
      keys[id] = derive_keypair(registry->scheme, seed);
      registry->keys[id] = keys[id].public_key;
    };
    for (EntityId id : layout.gateways) add(id);
    for (EntityId id : layout.miners) add(id);
    for (EntityId id : layout.sensors) add(id);
  }

  void build_static_hosts() {
    auto& topo = fabric.topology();
    const auto s = layout.switches.size();
    for (std::size_t i = 0; i < layout.gateways.size(); ++i) {
      const EntityId sw = layout.switches[i * s / layout.gateways.size()];
      const EntityId id = layout.gateways[i];
      host_pos[id] = topo.switches().at(sw);
      topo.attach(id, sw);
      roles[id] = Role::Gateway;
      alive[id] = true;
    }
    for (std::size_t j = 0; j < layout.miners.size(); ++j) {
      const auto idx = static_cast<std::size_t>((static_cast<double>(j) + 0.5) *
                                                static_cast<double>(s) /
                                                static_cast<double>(layout.miners.size()));
      const EntityId sw = layout.switches[std::min(idx, s - 1)];
      const EntityId id = layout.miners[j];
      host_pos[id] = topo.switches().at(sw);
      topo.attach(id, sw);
      roles[id] = Role::Miner;
      alive[id] = true;
    }
  }

  void build_sensors() {
    for (EntityId id : layout.sensors) {
      SensorNode n;
      n.id = id;
      n.gen_interval = SimTime::ms(sc.gen_interval_ms);
      n.packet_size = sc.packet_size;
      n.radio_range_m = sc.radio_range_m;
      RngStream& mob = rng(id, StreamPurpose::Mobility);
      n.pos = sc.field.uniform_point(mob);
      choose_waypoint(n, sc.field, sc.waypoint, mob);
      sensors.push_back(n);
      roles[id] = Role::Sensor;
      alive[id] = true;
      attach_host(id, n.pos);

      const SimTime phase =
          SimTime::ms(rng(id, StreamPurpose::Payload).below(std::max<std::uint64_t>(sc.gen_interval_ms, 1)));
      kernel.schedule(phase, id, EventKind::PacketSend, [this, id] { generate(id); });
      kernel.schedule(SimTime::ms(sc.mobility_step_ms), id, EventKind::MobilityStep,
                      [this, id] { move(id); });
    }
  }

  void build_attackers() {
    for (EntityId id : layout.attackers) {
      roles[id] = Role::Attacker;
      const Position p = sc.field.uniform_point(rng(id, StreamPurpose::Mobility));
      host_pos[id] = p;
      attach_host(id, p);
    }
  }

  void wire_fabric() {
    fabric.on_deliver([this](EntityId host, FabricPacket&& p) { on_deliver(host, std::move(p)); });
    fabric.on_drop([this](FabricPacket&& p, DropReason r) { on_drop(std::move(p), r); });
    fabric.on_hop([this](EntityId sw, FabricPacket& p) { on_hop(sw, p); });
    if (mode == ControllerMode::Distb) {
      fabric.controller().set_admission(
          [reg = registry](EntityId src, PacketKind) { return reg->keys.count(src) != 0; });
    }
  }

  void build_ledger() {
    ConsensusConfig cfg;
    cfg.tau = sc.tau;
    cfg.round_period = SimTime::ms(sc.round_period_ms);
    cfg.vote_window = SimTime::ms(sc.vote_window_ms);
    cfg.max_block_txs = sc.max_block_txs;
    consensus = std::make_unique<ConsensusNet>(kernel, cfg, registry);
    for (std::size_t j = 0; j < layout.miners.size(); ++j) {
      const bool bad = j < sc.attack.compromised_miners;
      consensus->add_miner(layout.miners[j], keys.at(layout.miners[j]), bad);
      if (bad) compromised_miners.push_back(layout.miners[j]);
    }
    consensus->set_transport([this](EntityId from, EntityId to, LedgerMessage msg) {
      PacketHeader h{kLedgerPacketBase | ledger_seq++, from, to, PacketKind::Ledger,
                     msg.wire_size()};
      fabric.inject(from, FabricPacket{h, LedgerBody{to, std::move(msg)}});
    });
    consensus->set_audit([this](const std::string& line) { log(line); });
    consensus->start(cfg.round_period);
  }

  void schedule_attacks() {
    const AttackProfile& a = sc.attack;
    if (!a.active()) return;
    if (a.compromise_attempt_rate > 0.0) {
      auto targets = [&](const std::vector<EntityId>& ids) {
        for (EntityId id : ids) schedule_attempt(id, SimTime{});
      };
      targets(layout.switches);
      targets(layout.gateways);
      targets(layout.miners);
      targets(layout.sensors);
    }
    if (a.flood_rate > 0.0) {
      for (EntityId id : layout.attackers) {
        flood_credit[id] = 0.0;
        kernel.schedule(a.start, id, EventKind::PacketSend, [this, id] { flood(id); });
      }
    }
    if (mode == ControllerMode::Distb && a.forge_block_rate > 0.0 && !compromised_miners.empty()) {
      schedule_forge(SimTime{});
    }
  }

  // --- hosts -------------------------------------------------------------

  void attach_host(EntityId id, Position p) {
    auto& topo = fabric.topology();
    const auto sw = topo.nearest_switch(p);
    if (sw) {
      topo.attach(id, *sw);
    } else {
      topo.detach(id);
    }
  }

  std::optional<EntityId> nearest_gateway(Position p) const {
    std::optional<EntityId> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (EntityId g : layout.gateways) {
      if (!alive.at(g)) continue;
      const double d = distance(p, host_pos.at(g));
      if (d < best_d) {
        best_d = d;
        best = g;
      }
    }
    return best;
  }

  // --- traffic -----------------------------------------------------------

  void generate(EntityId id) {
    SensorNode& n = sensor(id);
    if (!n.alive) return;
    const SimTime now = kernel.now();
    const auto gw = nearest_gateway(n.pos);
    const EntityId dst = gw ? *gw : layout.gateways.front();
    DataBody body;
    body.pkt = generate_packet(n, now, dst, rng(id, StreamPurpose::Payload));
    metrics.on_sent(body.pkt.pkt_id);
    if (mode == ControllerMode::Distb) {
      body.tx = make_transaction(id, body.pkt.pkt_id, body.pkt.payload_digest, now, keys.at(id),
                                 registry->scheme);
    }
    kernel.schedule_in(n.gen_interval, id, EventKind::PacketSend, [this, id] { generate(id); });

    if (!gw) {
      finish(body.pkt.pkt_id, Outcome::DroppedNoRoute);
      return;
    }
    if (distance(n.pos, host_pos.at(dst)) <= n.radio_range_m) {
      kernel.schedule_in(fabric.config().access_latency, dst, EventKind::PacketArrive,
                         [this, dst, b = std::move(body)]() mutable { deliver_data(dst, b); });
      return;
    }
    PacketHeader h{body.pkt.pkt_id, id, dst, PacketKind::Data, body.pkt.size};
    fabric.inject(id, FabricPacket{h, std::move(body)});
  }

  void move(EntityId id) {
    SensorNode& n = sensor(id);
    if (!n.alive) return;
    const SimTime step = SimTime::ms(sc.mobility_step_ms);
    step_mobility(n, kernel.now() - step, step, sc.field, sc.waypoint,
                  rng(id, StreamPurpose::Mobility));
    attach_host(id, n.pos);
    kernel.schedule_in(step, id, EventKind::MobilityStep, [this, id] { move(id); });
  }

  void deliver_data(EntityId gw, DataBody& b) {
    const std::uint64_t pkt_id = b.pkt.pkt_id;
    if (roles.at(gw) != Role::Gateway || !alive.at(gw)) {
      finish(pkt_id, Outcome::DroppedNoRoute);
      return;
    }
    const Hash32 digest = sha256(b.pkt.payload);
    if (mode == ControllerMode::Core) {
      finish(pkt_id, digest == b.pkt.payload_digest ? Outcome::DeliveredVerified
                                                    : Outcome::DeliveredInsecure);
      return;
    }
    const bool ok = b.tx && b.tx->origin == b.pkt.src && b.tx->pkt_id == pkt_id &&
                    b.tx->payload_digest == digest && verify_transaction(*b.tx, *registry);
    if (!ok) {
      finish(pkt_id, Outcome::DroppedSecurity);
      return;
    }
    finish(pkt_id, Outcome::DeliveredVerified);
    consensus->submit(std::move(*b.tx));
  }

  void on_deliver(EntityId host, FabricPacket&& p) {
    if (p.header.kind == PacketKind::Ledger) {
      auto& lb = std::any_cast<LedgerBody&>(p.body);
      consensus->deliver(lb.to, std::move(lb.msg));
      return;
    }
    auto& b = std::any_cast<DataBody&>(p.body);
    if (b.junk) {
      ++result.junk_delivered;
      return;
    }
    deliver_data(host, b);
  }

  void on_drop(FabricPacket&& p, DropReason reason) {
    if (p.header.kind == PacketKind::Ledger) {
      const auto& lb = std::any_cast<const LedgerBody&>(p.body);
      consensus->undeliverable(lb.to, lb.msg);
      return;
    }
    const auto& b = std::any_cast<const DataBody&>(p.body);
    if (b.junk) {
      ++result.junk_dropped;
      return;
    }
    switch (reason) {
      case DropReason::NoRoute: finish(b.pkt.pkt_id, Outcome::DroppedNoRoute); break;
      case DropReason::Congestion: finish(b.pkt.pkt_id, Outcome::DroppedCongestion); break;
      case DropReason::Filtered: finish(b.pkt.pkt_id, Outcome::DroppedSecurity); break;
    }
  }

  void on_hop(EntityId sw, FabricPacket& p) {
    const AttackProfile& a = sc.attack;
    if (p.header.kind != PacketKind::Data || !a.active() || a.tamper_prob <= 0.0 ||
        kernel.now() < a.start) {
      return;
    }
    auto* b = std::any_cast<DataBody>(&p.body);
    if (b == nullptr || b->junk) return;
    RngStream& r = rng(sw, StreamPurpose::Tamper);
    if (r.bernoulli(a.tamper_prob)) tamper(b->pkt, r);
  }

  // --- attacks -----------------------------------------------------------

  void flood(EntityId attacker) {
    flood_credit[attacker] += sc.attack.flood_rate * kFloodTick.to_seconds();
    std::vector<EntityId> targets;
    for (EntityId g : layout.gateways) {
      if (alive.at(g)) targets.push_back(g);
    }
    while (flood_credit[attacker] >= 1.0) {
      flood_credit[attacker] -= 1.0;
      if (targets.empty()) continue;
      const std::uint64_t seq = junk_seq[attacker]++;
      const EntityId dst = targets[seq % targets.size()];
      DataBody body;
      body.junk = true;
      body.pkt.pkt_id = (attacker << 32) | seq;
      body.pkt.src = attacker;
      body.pkt.dst = dst;
      body.pkt.size = sc.packet_size;
      ++result.junk_sent;
      PacketHeader h{body.pkt.pkt_id, attacker, dst, PacketKind::Data, sc.packet_size};
      fabric.inject(attacker, FabricPacket{h, std::move(body)});
    }
    if (kernel.now() + kFloodTick <= end) {
      kernel.schedule_in(kFloodTick, attacker, EventKind::PacketSend,
                         [this, attacker] { flood(attacker); });
    }
  }

  void schedule_attempt(EntityId target, SimTime after) {
    const auto t = compromise.next_attempt(after, rng(target, StreamPurpose::Compromise));
    if (!t || *t > end) return;
    kernel.schedule(*t, target, EventKind::AttackAttempt, [this, target] { attempt(target); });
  }

  void attempt(EntityId target) {
    if (!alive.at(target)) return;
    const CompromiseEvent ev =
        compromise.attempt(target, kernel.now(), rng(target, StreamPurpose::Compromise));
    ++result.compromise_attempts;
    log(fmt::format("t={} compromise target={} succeeded={} detected={}", ev.t.ticks(), target,
                    ev.succeeded, ev.detected));
    if (ev.succeeded) {
      ++result.compromise_successes;
      kill(target);
      return;
    }
    if (ev.detected) ++result.compromise_detected;
    schedule_attempt(target, kernel.now());
  }

  void kill(EntityId id) {
    alive[id] = false;
    metrics.on_node_failed(id);
    auto& topo = fabric.topology();
    switch (roles.at(id)) {
      case Role::Sensor:
        sensor(id).alive = false;
        topo.detach(id);
        break;
      case Role::Gateway: topo.detach(id); break;
      case Role::Miner:
        if (consensus) consensus->set_alive(id, false);
        break;
      case Role::Switch: {
        fabric.fail_switch(id);
        for (auto& n : sensors) {
          if (n.alive && topo.attachment(n.id) == id) attach_host(n.id, n.pos);
        }
        for (const auto& [host, pos] : host_pos) {
          if (alive.count(host) != 0 && !alive.at(host)) continue;
          if (topo.attachment(host) == id) attach_host(host, pos);
        }
        break;
      }
      case Role::Attacker: break;
    }
  }

  void schedule_forge(SimTime after) {
    RngStream& r = rng(compromised_miners.front(), StreamPurpose::Forge);
    const double gap = r.exponential(sc.attack.forge_block_rate);
    if (!(gap < 1e12)) return;
    const SimTime t = std::max(after, sc.attack.start) + SimTime::seconds(gap);
    if (t > end) return;
    kernel.schedule(t, compromised_miners.front(), EventKind::BlockPropose, [this] { forge(); });
  }

  void forge() {
    std::vector<EntityId> live;
    for (EntityId m : compromised_miners) {
      if (consensus->miner(m).alive) live.push_back(m);
    }
    RngStream& r = rng(compromised_miners.front(), StreamPurpose::Forge);
    if (!live.empty()) {
      const EntityId attacker = live[r.below(live.size())];
      Block b = forge_block(attacker, consensus->miner(attacker).replica, kernel.now(), r);
      log(fmt::format("t={} forge miner={} height={}", kernel.now().ticks(), attacker,
                      b.header.height));
      consensus->inject_forged(attacker, std::move(b));
    }
    schedule_forge(kernel.now());
  }

  RunResult run() {
    if (ran) throw std::logic_error("Simulation::run called twice");
    ran = true;
    const auto t0 = std::chrono::steady_clock::now();
    const RunSummary summary = kernel.run_until(end);
    result.samples = metrics.samples();
    result.totals = metrics.cumulative();
    result.in_flight_at_end = metrics.in_flight();
    result.conservation_violations = metrics.conservation_violations();
    result.fabric = fabric.counters();
    result.events = summary.events_processed;
    if (consensus) {
      result.consensus = consensus->counters();
      const Chain& c = consensus->best_honest_chain();
      result.chain_height = c.height();
      result.chain_valid = verify_chain(c);
      result.replicas_consistent = consensus->honest_replicas_consistent();
    }
    result.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
  }
};

Simulation::Simulation(const Scenario& scenario, Variant variant)
    : impl_(std::make_unique<Impl>(scenario, variant)) {}

Simulation::~Simulation() = default;

void Simulation::set_trace(std::ostream* out) { impl_->kernel.set_trace(out); }
void Simulation::set_audit(std::ostream* out) { impl_->audit = out; }
void Simulation::keep_outcomes(bool on) { impl_->keep_outcomes = on; }
RunResult Simulation::run() { return impl_->run(); }
const WorldLayout& Simulation::layout() const { return impl_->layout; }
const Fabric& Simulation::fabric() const { return impl_->fabric; }
const Chain* Simulation::chain() const {
  return impl_->consensus ? &impl_->consensus->best_honest_chain() : nullptr;
}
const ConsensusNet* Simulation::consensus() const { return impl_->consensus.get(); }
const std::vector<OutcomeRecord>& Simulation::outcomes() const { return impl_->outcomes; }

}  // namespace distb
