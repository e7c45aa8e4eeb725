#pragma once

#include <any>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <variant>
#include <vector>

#include "distb/kernel.hpp"
#include "distb/mobility.hpp"

namespace distb {

enum class PacketKind : std::uint8_t { Data, Ledger, Control };

const char* to_string(PacketKind kind);

struct PacketHeader {
  std::uint64_t pkt_id = 0;
  EntityId src = 0;
  EntityId dst = 0;
  PacketKind kind = PacketKind::Data;
  std::uint32_t size = 0;
};

/// Unset fields are wildcards.
struct FlowMatch {
  std::optional<EntityId> src;
  std::optional<EntityId> dst;
  std::optional<PacketKind> kind;

  bool matches(const PacketHeader& h) const {
    return (!src || *src == h.src) && (!dst || *dst == h.dst) && (!kind || *kind == h.kind);
  }
  bool operator==(const FlowMatch&) const = default;
};

struct Action {
  enum class Type : std::uint8_t { Forward, Drop, ToController };

  Type type = Type::ToController;
  EntityId port = 0;

  static Action forward(EntityId port) { return {Type::Forward, port}; }
  static Action drop() { return {Type::Drop, 0}; }
  static Action to_controller() { return {Type::ToController, 0}; }

  bool operator==(const Action&) const = default;
};

struct FlowRule {
  std::uint64_t rule_id = 0;
  std::uint32_t priority = 0;
  FlowMatch match;
  Action action;
  SimTime idle_timeout = SimTime::seconds(10);
  SimTime last_hit{};

  bool expired(SimTime now) const { return now - last_hit > idle_timeout; }
};

/// Priority flow table. Lookup skips expired rules; ties on priority go to
/// the lowest rule_id.
class FlowTable {
 public:
  /// Pure lookup; nullptr on table miss.
  const FlowRule* lookup(const PacketHeader& h, SimTime now) const;
  /// Lookup that refreshes the hit rule's idle timer.
  Action match_and_touch(const PacketHeader& h, SimTime now);

  /// Replaces any rule with identical (priority, match). Returns true on replace.
  bool install(FlowRule rule);
  std::size_t purge_expired(SimTime now);
  template <typename Pred>
  std::size_t remove_if(Pred pred) {
    return std::erase_if(rules_, pred);
  }
  void clear() { rules_.clear(); }

  const std::vector<FlowRule>& rules() const { return rules_; }
  std::size_t size() const { return rules_.size(); }

 private:
  std::vector<FlowRule> rules_;
};

struct PacketIn {
  PacketHeader header;
  EntityId in_switch = 0;
};
struct FlowMod {
  FlowRule rule;
};
struct PortStatus {
  EntityId peer = 0;
  bool up = false;
};

struct SouthboundMsg {
  enum class Kind : std::uint8_t { PacketIn, FlowMod, PortStatus };

  Kind kind = Kind::PacketIn;
  EntityId switch_id = 0;
  std::variant<PacketIn, FlowMod, PortStatus> body;
};

struct LinkParams {
  SimTime latency = SimTime::ms(2);
  /// Capacity in reference-size (1024 byte) packets per second.
  double capacity_pps = 1000.0;
  std::uint32_t queue_limit = 64;
};

inline constexpr double kReferencePacketBytes = 1024.0;

/// One direction of a link: a FIFO server with a bounded queue.
class LinkQueue {
 public:
  explicit LinkQueue(LinkParams params) : params_(params) {}

  /// Arrival tick at the far end, or nullopt when the queue is full.
  std::optional<SimTime> enqueue(SimTime now, std::uint32_t size_bytes);
  std::size_t occupancy(SimTime now);

  const LinkParams& params() const { return params_; }

 private:
  LinkParams params_;
  double busy_until_ms_ = 0.0;
  std::deque<double> departures_;
};

enum class ControllerMode : std::uint8_t { Core, Distb };

const char* to_string(ControllerMode mode);

/// Switch graph with host attachments. Neighbor sets are id-ordered.
class Topology {
 public:
  void add_switch(EntityId id, Position pos);
  void add_link(EntityId a, EntityId b, LinkParams params);
  void attach(EntityId host, EntityId sw);
  void detach(EntityId host);
  void set_alive(EntityId sw, bool alive);

  bool has_switch(EntityId id) const { return switches_.count(id) != 0; }
  bool alive(EntityId sw) const;
  std::optional<EntityId> attachment(EntityId host) const;
  const std::map<EntityId, Position>& switches() const { return switches_; }
  const std::map<EntityId, std::vector<EntityId>>& adjacency() const { return adjacency_; }
  LinkQueue& link(EntityId from, EntityId to);
  const std::map<std::pair<EntityId, EntityId>, LinkQueue>& links() const { return links_; }

  /// Nearest alive switch to `p`; ties by lowest id.
  std::optional<EntityId> nearest_switch(Position p) const;

  /// Hop-count shortest path over alive switches, both ends included.
  /// At each step the lowest-id neighbor on some shortest path is taken.
  std::optional<std::vector<EntityId>> shortest_path(EntityId from, EntityId to) const;

 private:
  std::map<EntityId, Position> switches_;
  std::map<EntityId, bool> alive_;
  std::map<EntityId, std::vector<EntityId>> adjacency_;
  std::map<std::pair<EntityId, EntityId>, LinkQueue> links_;
  std::map<EntityId, EntityId> attached_;
};

struct ControllerConfig {
  ControllerMode mode = ControllerMode::Core;
  SimTime idle_timeout = SimTime::seconds(10);
  std::uint32_t route_priority = 10;
  std::uint32_t drop_priority = 100;
};

/// Result of a PacketIn: the FlowMods to send, or no route.
struct RouteDecision {
  std::vector<SouthboundMsg> flow_mods;
  bool routed = false;
  bool filtered = false;
};

/// Route computation and admission for table misses.
///
/// Core mode installs destination-based wildcard routes. Distb mode
/// installs per-flow (src, dst) routes after checking the source against
/// the ledger identity registry, and a Drop rule at ingress otherwise.
class Controller {
 public:
  using Admission = std::function<bool(EntityId src, PacketKind kind)>;

  Controller(ControllerConfig config, const Topology& topology)
      : config_(config), topology_(&topology) {}

  void set_admission(Admission admit) { admit_ = std::move(admit); }
  const ControllerConfig& config() const { return config_; }

  RouteDecision handle_packet_in(const SouthboundMsg& msg, SimTime now);

 private:
  ControllerConfig config_;
  const Topology* topology_;
  Admission admit_;
  std::uint64_t next_rule_id_ = 1;
};

enum class DropReason : std::uint8_t { NoRoute, Congestion, Filtered };

struct FabricPacket {
  PacketHeader header;
  std::any body;
};

struct FabricCounters {
  std::uint64_t packet_ins = 0;
  std::uint64_t flow_mods_sent = 0;
  std::uint64_t flow_mods_lost = 0;
  std::uint64_t port_status = 0;
  std::uint64_t forwarded_hops = 0;
  std::uint64_t dropped_no_route = 0;
  std::uint64_t dropped_congestion = 0;
  std::uint64_t dropped_filtered = 0;
};

struct FabricConfig {
  ControllerConfig controller;
  LinkParams link;
  SimTime access_latency = SimTime::ms(1);
  SimTime control_latency = SimTime::ms(2);
};

/// Data plane plus controller, driven by the kernel.
class Fabric {
 public:
  using DeliverFn = std::function<void(EntityId host, FabricPacket&&)>;
  using DropFn = std::function<void(FabricPacket&&, DropReason)>;
  using HopFn = std::function<void(EntityId sw, FabricPacket&)>;

  Fabric(Kernel& kernel, FabricConfig config);

  Fabric(const Fabric&) = delete;
  Fabric& operator=(const Fabric&) = delete;

  Topology& topology() { return topology_; }
  const Topology& topology() const { return topology_; }
  Controller& controller() { return controller_; }
  const FabricConfig& config() const { return config_; }

  void on_deliver(DeliverFn fn) { deliver_ = std::move(fn); }
  void on_drop(DropFn fn) { drop_ = std::move(fn); }
  /// Called on every arrival at an alive switch, before the table lookup.
  void on_hop(HopFn fn) { hop_ = std::move(fn); }

  /// Sends from a host through its attached switch.
  void inject(EntityId from_host, FabricPacket pkt);
  /// Processes a packet arriving at a switch at now().
  void arrive(EntityId sw, FabricPacket pkt);

  /// Installs a rule directly. Returns false (and counts a lost FlowMod)
  /// when the switch is dead.
  bool install_rule(EntityId sw, FlowRule rule);
  Action match_packet(EntityId sw, const PacketHeader& h) const;

  /// Marks a switch failed; its table is lost and the controller purges
  /// every rule that forwards into it.
  void fail_switch(EntityId sw);

  FlowTable& table(EntityId sw) { return tables_.at(sw); }
  const FlowTable& table(EntityId sw) const { return tables_.at(sw); }
  const FabricCounters& counters() const { return counters_; }

  /// Registers the periodic idle-timeout sweep.
  void start_rule_sweeps();

  /// Northbound dump: topology, tables, counters.
  void dump(std::ostream& out) const;

 private:
  void drop(FabricPacket&& pkt, DropReason reason);
  void send_packet_in(EntityId sw, FabricPacket pkt);
  /// Table lookup and forwarding, without the hop hook.
  void process(EntityId sw, FabricPacket pkt);

  Kernel* kernel_;
  FabricConfig config_;
  Topology topology_;
  Controller controller_;
  std::map<EntityId, FlowTable> tables_;
  /// Egress queue of each switch port facing an attached host.
  std::map<std::pair<EntityId, EntityId>, LinkQueue> host_ports_;
  FabricCounters counters_;
  DeliverFn deliver_;
  DropFn drop_;
  HopFn hop_;
};

}  // namespace distb
