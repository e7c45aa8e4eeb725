#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "distb/crypto.hpp"
#include "distb/kernel.hpp"

namespace distb {

struct Position {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Position&) const = default;
};

double distance(Position a, Position b);

struct Field {
  double width_m = 3000.0;
  double height_m = 3000.0;

  bool contains(Position p) const {
    return p.x >= 0.0 && p.x <= width_m && p.y >= 0.0 && p.y <= height_m;
  }
  Position uniform_point(RngStream& rng) const {
    const double x = rng.uniform(0.0, width_m);
    return {x, rng.uniform(0.0, height_m)};
  }
};

struct WaypointParams {
  double speed_min_mps = 1.0;
  double speed_max_mps = 20.0;
  double pause_min_s = 0.0;
  double pause_max_s = 2.0;
};

struct WaypointState {
  Position waypoint;
  double speed_mps = 0.0;
  SimTime pause_until{};
};

enum class NodeRole : std::uint8_t { Sensor, Gateway, Switch, Controller, Miner };

const char* to_string(NodeRole role);

struct SensorNode {
  EntityId id = 0;
  Position pos;
  WaypointState motion;
  NodeRole role = NodeRole::Sensor;
  SimTime gen_interval = SimTime::ms(200);
  std::uint32_t packet_size = 256;
  double radio_range_m = 250.0;
  bool alive = true;
  std::uint64_t packets_generated = 0;
};

struct DataPacket {
  std::uint64_t pkt_id = 0;
  EntityId src = 0;
  EntityId dst = 0;
  std::uint32_t size = 0;
  SimTime created{};
  Hash32 payload_digest{};
  Bytes payload;
  /// Ground truth for metrics and tests only. Protocol code must detect
  /// tampering through payload_digest.
  bool tampered = false;
};

/// Picks a fresh waypoint and speed; does not move the node.
void choose_waypoint(SensorNode& node, const Field& field, const WaypointParams& params,
                     RngStream& rng);

/// Advances `node` by `dt` starting at `now` under random waypoint motion.
///
/// A node sitting on its waypoint whose pause has elapsed draws a new
/// waypoint and speed and stays put for this step. A node reaching its
/// waypoint mid-step stops there and pauses for a uniform pause time.
Position step_mobility(SensorNode& node, SimTime now, SimTime dt, const Field& field,
                       const WaypointParams& params, RngStream& rng);

/// Packet ids are `(src << 32) | per-node sequence`, unique within a run.
DataPacket generate_packet(SensorNode& node, SimTime now, EntityId dst, RngStream& payload_rng);

/// Alive nodes within `node.radio_range_m` of `node`, excluding itself, in id order.
std::vector<EntityId> neighbors(const SensorNode& node, std::span<const SensorNode> world);

}  // namespace distb
