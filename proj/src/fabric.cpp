#include "distb/fabric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include <fmt/format.h>

namespace distb {

const char* to_string(PacketKind kind) {
  switch (kind) {
    case PacketKind::Data: return "data";
    case PacketKind::Ledger: return "ledger";
    case PacketKind::Control: return "control";
  }
  return "unknown";
}

const char* to_string(ControllerMode mode) {
  return mode == ControllerMode::Core ? "core" : "distb";
}

const FlowRule* FlowTable::lookup(const PacketHeader& h, SimTime now) const {
  const FlowRule* best = nullptr;
  for (const auto& rule : rules_) {
    if (rule.expired(now) || !rule.match.matches(h)) continue;
    if (best == nullptr || rule.priority > best->priority ||
        (rule.priority == best->priority && rule.rule_id < best->rule_id)) {
      best = &rule;
    }
  }
  return best;
}

Action FlowTable::match_and_touch(const PacketHeader& h, SimTime now) {
  const FlowRule* hit = lookup(h, now);
  if (hit == nullptr) return Action::to_controller();
  auto& rule = const_cast<FlowRule&>(*hit);
  rule.last_hit = now;
  return rule.action;
}

bool FlowTable::install(FlowRule rule) {
  for (auto& existing : rules_) {
    if (existing.priority == rule.priority && existing.match == rule.match) {
      existing = std::move(rule);
      return true;
    }
  }
  rules_.push_back(std::move(rule));
  return false;
}

std::size_t FlowTable::purge_expired(SimTime now) {
  return std::erase_if(rules_, [now](const FlowRule& r) { return r.expired(now); });
}

std::optional<SimTime> LinkQueue::enqueue(SimTime now, std::uint32_t size_bytes) {
  const double now_ms = static_cast<double>(now.ticks());
  while (!departures_.empty() && departures_.front() <= now_ms) departures_.pop_front();
  if (departures_.size() >= params_.queue_limit) return std::nullopt;

  const double service_ms =
      1000.0 * (static_cast<double>(size_bytes) / kReferencePacketBytes) / params_.capacity_pps;
  const double depart = std::max(now_ms, busy_until_ms_) + service_ms;
  busy_until_ms_ = depart;
  departures_.push_back(depart);
  return SimTime(static_cast<std::uint64_t>(std::floor(depart))) + params_.latency;
}

std::size_t LinkQueue::occupancy(SimTime now) {
  const double now_ms = static_cast<double>(now.ticks());
  while (!departures_.empty() && departures_.front() <= now_ms) departures_.pop_front();
  return departures_.size();
}

void Topology::add_switch(EntityId id, Position pos) {
  switches_[id] = pos;
  alive_[id] = true;
  adjacency_[id];
}

void Topology::add_link(EntityId a, EntityId b, LinkParams params) {
  if (!has_switch(a) || !has_switch(b) || a == b) {
    throw std::invalid_argument(fmt::format("bad link {}-{}", a, b));
  }
  auto insert_sorted = [](std::vector<EntityId>& v, EntityId x) {
    auto it = std::lower_bound(v.begin(), v.end(), x);
    if (it == v.end() || *it != x) v.insert(it, x);
  };
  insert_sorted(adjacency_[a], b);
  insert_sorted(adjacency_[b], a);
  links_.insert_or_assign({a, b}, LinkQueue(params));
  links_.insert_or_assign({b, a}, LinkQueue(params));
}

void Topology::attach(EntityId host, EntityId sw) { attached_[host] = sw; }
void Topology::detach(EntityId host) { attached_.erase(host); }
void Topology::set_alive(EntityId sw, bool alive) { alive_.at(sw) = alive; }

bool Topology::alive(EntityId sw) const {
  auto it = alive_.find(sw);
  return it != alive_.end() && it->second;
}

std::optional<EntityId> Topology::attachment(EntityId host) const {
  auto it = attached_.find(host);
  if (it == attached_.end()) return std::nullopt;
  return it->second;
}

LinkQueue& Topology::link(EntityId from, EntityId to) { return links_.at({from, to}); }

std::optional<EntityId> Topology::nearest_switch(Position p) const {
  std::optional<EntityId> best;
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& [id, pos] : switches_) {
    if (!alive(id)) continue;
    const double d = distance(p, pos);
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

std::optional<std::vector<EntityId>> Topology::shortest_path(EntityId from, EntityId to) const {
  if (!alive(from) || !alive(to)) return std::nullopt;
  std::map<EntityId, std::size_t> dist;
  std::queue<EntityId> frontier;
  dist[to] = 0;
  frontier.push(to);
  while (!frontier.empty()) {
    const EntityId cur = frontier.front();
    frontier.pop();
    for (EntityId next : adjacency_.at(cur)) {
      if (!alive(next) || dist.count(next) != 0) continue;
      dist[next] = dist[cur] + 1;
      frontier.push(next);
    }
  }
  if (dist.count(from) == 0) return std::nullopt;

  std::vector<EntityId> path{from};
  EntityId cur = from;
  while (cur != to) {
    const std::size_t want = dist[cur] - 1;
    for (EntityId next : adjacency_.at(cur)) {
      auto it = dist.find(next);
      if (it != dist.end() && it->second == want) {
        cur = next;
        break;
      }
    }
    path.push_back(cur);
  }
  return path;
}

RouteDecision Controller::handle_packet_in(const SouthboundMsg& msg, SimTime now) {
  RouteDecision decision;
  const auto& in = std::get<PacketIn>(msg.body);
  const PacketHeader& h = in.header;
  const bool per_flow = config_.mode == ControllerMode::Distb;

  auto make_mod = [&](EntityId sw, FlowMatch match, Action action, std::uint32_t priority) {
    FlowRule rule;
    rule.rule_id = next_rule_id_++;
    rule.priority = priority;
    rule.match = match;
    rule.action = action;
    rule.idle_timeout = config_.idle_timeout;
    rule.last_hit = now;
    decision.flow_mods.push_back(SouthboundMsg{SouthboundMsg::Kind::FlowMod, sw, FlowMod{rule}});
  };

  if (per_flow && admit_ && !admit_(h.src, h.kind)) {
    make_mod(in.in_switch, FlowMatch{h.src, std::nullopt, std::nullopt}, Action::drop(),
             config_.drop_priority);
    decision.filtered = true;
    return decision;
  }

  const auto egress = topology_->attachment(h.dst);
  if (!egress) return decision;
  const auto path = topology_->shortest_path(in.in_switch, *egress);
  if (!path) return decision;

  for (std::size_t i = 0; i < path->size(); ++i) {
    const EntityId next = i + 1 < path->size() ? (*path)[i + 1] : h.dst;
    FlowMatch match{per_flow ? std::optional<EntityId>(h.src) : std::nullopt, h.dst, h.kind};
    make_mod((*path)[i], match, Action::forward(next), config_.route_priority);
  }
  decision.routed = true;
  return decision;
}

Fabric::Fabric(Kernel& kernel, FabricConfig config)
    : kernel_(&kernel), config_(config), controller_(config.controller, topology_) {}

void Fabric::drop(FabricPacket&& pkt, DropReason reason) {
  switch (reason) {
    case DropReason::NoRoute: ++counters_.dropped_no_route; break;
    case DropReason::Congestion: ++counters_.dropped_congestion; break;
    case DropReason::Filtered: ++counters_.dropped_filtered; break;
  }
  if (drop_) drop_(std::move(pkt), reason);
}

void Fabric::inject(EntityId from_host, FabricPacket pkt) {
  if (pkt.header.dst == from_host) {
    kernel_->schedule_in(SimTime{}, from_host, EventKind::PacketArrive,
                         [this, from_host, p = std::move(pkt)]() mutable {
                           if (deliver_) deliver_(from_host, std::move(p));
                         });
    return;
  }
  const auto sw = topology_.attachment(from_host);
  if (!sw || !topology_.alive(*sw)) {
    drop(std::move(pkt), DropReason::NoRoute);
    return;
  }
  kernel_->schedule_in(config_.access_latency, *sw, EventKind::PacketArrive,
                       [this, s = *sw, p = std::move(pkt)]() mutable { arrive(s, std::move(p)); });
}

void Fabric::arrive(EntityId sw, FabricPacket pkt) {
  if (!topology_.alive(sw)) {
    drop(std::move(pkt), DropReason::NoRoute);
    return;
  }
  if (hop_) hop_(sw, pkt);
  process(sw, std::move(pkt));
}

void Fabric::process(EntityId sw, FabricPacket pkt) {
  if (!topology_.alive(sw)) {
    drop(std::move(pkt), DropReason::NoRoute);
    return;
  }
  const Action action = tables_[sw].match_and_touch(pkt.header, kernel_->now());
  switch (action.type) {
    case Action::Type::ToController:
      send_packet_in(sw, std::move(pkt));
      return;
    case Action::Type::Drop:
      drop(std::move(pkt), DropReason::Filtered);
      return;
    case Action::Type::Forward:
      break;
  }

  const EntityId port = action.port;
  if (port == pkt.header.dst && topology_.attachment(port) == sw) {
    auto it = host_ports_.find({sw, port});
    if (it == host_ports_.end()) {
      LinkParams params = config_.link;
      params.latency = config_.access_latency;
      it = host_ports_.emplace(std::make_pair(sw, port), LinkQueue(params)).first;
    }
    const auto arrival = it->second.enqueue(kernel_->now(), pkt.header.size);
    if (!arrival) {
      drop(std::move(pkt), DropReason::Congestion);
      return;
    }
    ++counters_.forwarded_hops;
    kernel_->schedule(*arrival, port, EventKind::PacketArrive,
                      [this, port, p = std::move(pkt)]() mutable {
                        if (deliver_) deliver_(port, std::move(p));
                      });
    return;
  }
  const auto& adj = topology_.adjacency().at(sw);
  if (!std::binary_search(adj.begin(), adj.end(), port)) {
    drop(std::move(pkt), DropReason::NoRoute);
    return;
  }
  const auto arrival = topology_.link(sw, port).enqueue(kernel_->now(), pkt.header.size);
  if (!arrival) {
    drop(std::move(pkt), DropReason::Congestion);
    return;
  }
  ++counters_.forwarded_hops;
  kernel_->schedule(*arrival, port, EventKind::PacketArrive,
                    [this, port, p = std::move(pkt)]() mutable { arrive(port, std::move(p)); });
}

void Fabric::send_packet_in(EntityId sw, FabricPacket pkt) {
  ++counters_.packet_ins;
  SouthboundMsg msg{SouthboundMsg::Kind::PacketIn, sw, PacketIn{pkt.header, sw}};
  kernel_->schedule_in(
      config_.control_latency, kSystemId, EventKind::PacketArrive,
      [this, sw, msg = std::move(msg), p = std::move(pkt)]() mutable {
        RouteDecision decision = controller_.handle_packet_in(msg, kernel_->now());
        if (!decision.routed && !decision.filtered) {
          drop(std::move(p), DropReason::NoRoute);
          return;
        }
        for (auto& mod : decision.flow_mods) {
          ++counters_.flow_mods_sent;
          kernel_->schedule_in(config_.control_latency, mod.switch_id, EventKind::RuleTimeout,
                               [this, mod = std::move(mod)]() mutable {
                                 auto rule = std::get<FlowMod>(mod.body).rule;
                                 rule.last_hit = kernel_->now();
                                 install_rule(mod.switch_id, std::move(rule));
                               });
        }
        kernel_->schedule_in(config_.control_latency, sw, EventKind::PacketArrive,
                             [this, sw, p = std::move(p)]() mutable { process(sw, std::move(p)); });
      });
}

bool Fabric::install_rule(EntityId sw, FlowRule rule) {
  if (!topology_.alive(sw)) {
    ++counters_.flow_mods_lost;
    return false;
  }
  tables_[sw].install(std::move(rule));
  return true;
}

Action Fabric::match_packet(EntityId sw, const PacketHeader& h) const {
  auto it = tables_.find(sw);
  if (it == tables_.end()) return Action::to_controller();
  const FlowRule* rule = it->second.lookup(h, kernel_->now());
  return rule ? rule->action : Action::to_controller();
}

void Fabric::fail_switch(EntityId sw) {
  if (!topology_.alive(sw)) return;
  topology_.set_alive(sw, false);
  tables_[sw].clear();
  ++counters_.port_status;
  kernel_->schedule_in(config_.control_latency, kSystemId, EventKind::PacketArrive, [this, sw] {
    for (auto& [id, table] : tables_) {
      table.remove_if([sw](const FlowRule& r) {
        return r.action.type == Action::Type::Forward && r.action.port == sw;
      });
    }
  });
}

void Fabric::start_rule_sweeps() {
  const SimTime period = config_.controller.idle_timeout;
  if (period.ticks() == 0) return;
  kernel_->schedule_in(period, kSystemId, EventKind::RuleTimeout, [this] {
    for (auto& [id, table] : tables_) table.purge_expired(kernel_->now());
    start_rule_sweeps();
  });
}

void Fabric::dump(std::ostream& out) const {
  out << "[topology]\n";
  for (const auto& [id, pos] : topology_.switches()) {
    out << fmt::format("switch {} pos=({:.1f},{:.1f}) alive={} neighbors=", id, pos.x, pos.y,
                       topology_.alive(id));
    const auto& adj = topology_.adjacency().at(id);
    for (std::size_t i = 0; i < adj.size(); ++i) out << (i ? "," : "") << adj[i];
    out << '\n';
  }
  out << "[flow_tables]\n";
  for (const auto& [id, table] : tables_) {
    for (const auto& r : table.rules()) {
      auto field = [](const std::optional<EntityId>& v) {
        return v ? std::to_string(*v) : std::string("*");
      };
      std::string action;
      switch (r.action.type) {
        case Action::Type::Forward: action = fmt::format("forward:{}", r.action.port); break;
        case Action::Type::Drop: action = "drop"; break;
        case Action::Type::ToController: action = "controller"; break;
      }
      out << fmt::format("switch={} rule={} prio={} src={} dst={} kind={} action={} last_hit_ms={}\n",
                         id, r.rule_id, r.priority, field(r.match.src), field(r.match.dst),
                         r.match.kind ? to_string(*r.match.kind) : "*", action,
                         r.last_hit.ticks());
    }
  }
  out << "[counters]\n";
  out << fmt::format(
      "packet_ins={}\nflow_mods_sent={}\nflow_mods_lost={}\nport_status={}\nforwarded_hops={}\n"
      "dropped_no_route={}\ndropped_congestion={}\ndropped_filtered={}\n",
      counters_.packet_ins, counters_.flow_mods_sent, counters_.flow_mods_lost,
      counters_.port_status, counters_.forwarded_hops, counters_.dropped_no_route,
      counters_.dropped_congestion, counters_.dropped_filtered);
}

}  // namespace distb
