#include "distb/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distb {

double distance(Position a, Position b) { return std::hypot(a.x - b.x, a.y - b.y); }

const char* to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Sensor: return "sensor";
    case NodeRole::Gateway: return "gateway";
    case NodeRole::Switch: return "switch";
    case NodeRole::Controller: return "controller";
    case NodeRole::Miner: return "miner";
  }
  return "unknown";
}

void choose_waypoint(SensorNode& node, const Field& field, const WaypointParams& params,
                     RngStream& rng) {
  node.motion.waypoint = field.uniform_point(rng);
  node.motion.speed_mps = rng.uniform(params.speed_min_mps, params.speed_max_mps);
}

Position step_mobility(SensorNode& node, SimTime now, SimTime dt, const Field& field,
                       const WaypointParams& params, RngStream& rng) {
  if (dt.ticks() == 0 || !node.alive) return node.pos;

  const SimTime end = now + dt;
  if (node.motion.pause_until >= end) return node.pos;

  if (node.pos == node.motion.waypoint) {
    choose_waypoint(node, field, params, rng);
    return node.pos;
  }

  const SimTime start = std::max(now, node.motion.pause_until);
  const double travel_s = (end - start).to_seconds();
  const double dx = node.motion.waypoint.x - node.pos.x;
  const double dy = node.motion.waypoint.y - node.pos.y;
  const double remaining = std::hypot(dx, dy);
  const double reach = node.motion.speed_mps * travel_s;

  if (reach >= remaining) {
    node.pos = node.motion.waypoint;
    const double arrival_s = remaining / node.motion.speed_mps;
    const double pause_s = rng.uniform(params.pause_min_s, params.pause_max_s);
    node.motion.pause_until = start + SimTime::seconds(arrival_s + pause_s);
  } else {
    node.pos.x += dx / remaining * reach;
    node.pos.y += dy / remaining * reach;
  }
  node.pos.x = std::clamp(node.pos.x, 0.0, field.width_m);
  node.pos.y = std::clamp(node.pos.y, 0.0, field.height_m);
  return node.pos;
}

DataPacket generate_packet(SensorNode& node, SimTime now, EntityId dst, RngStream& payload_rng) {
  if (!node.alive) throw std::logic_error("packet generation on a dead node");
  if (node.role != NodeRole::Sensor) throw std::logic_error("packet generation on a non-sensor");

  DataPacket pkt;
  pkt.pkt_id = (node.id << 32) | node.packets_generated++;
  pkt.src = node.id;
  pkt.dst = dst;
  pkt.size = node.packet_size;
  pkt.created = now;
  pkt.payload.resize(node.packet_size);
  for (std::size_t i = 0; i < pkt.payload.size(); i += 8) {
    std::uint64_t word = payload_rng.next_u64();
    for (std::size_t j = i; j < std::min(i + 8, pkt.payload.size()); ++j) {
      pkt.payload[j] = static_cast<std::uint8_t>(word);
      word >>= 8;
    }
  }
  pkt.payload_digest = sha256(pkt.payload);
  return pkt;
}

std::vector<EntityId> neighbors(const SensorNode& node, std::span<const SensorNode> world) {
  std::vector<EntityId> out;
  for (const auto& other : world) {
    if (other.id == node.id || !other.alive) continue;
    if (distance(node.pos, other.pos) <= node.radio_range_m) out.push_back(other.id);
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace distb
