#include "distb/adversary.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace distb {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string("attack.") + name + " must be in [0, 1]");
  }
}

void check_rate(double r, const char* name) {
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw std::invalid_argument(std::string("attack.") + name + " must be a finite rate >= 0");
  }
}

}  // namespace

void AttackProfile::validate() const {
  check_probability(tamper_prob, "tamper_prob");
  check_probability(compromise_success_core, "compromise_success_core");
  check_probability(compromise_success_distb, "compromise_success_distb");
  check_rate(flood_rate, "flood_rate");
  check_rate(compromise_attempt_rate, "compromise_attempt_rate");
  check_rate(forge_block_rate, "forge_block_rate");
  if (compromise_success_distb > compromise_success_core) {
    throw std::invalid_argument(
        "attack.compromise_success_distb must not exceed attack.compromise_success_core");
  }
}

void tamper(DataPacket& pkt, RngStream& rng) {
  if (pkt.payload.empty()) return;
  const std::size_t at = rng.below(pkt.payload.size());
  const auto mask = static_cast<std::uint8_t>(1 + rng.below(255));
  pkt.payload[at] ^= mask;
  pkt.tampered = true;
}

Block forge_block(EntityId attacker, const Chain& view, SimTime now, RngStream& rng,
                  std::size_t tx_count) {
  const auto& registry = view.registry();
  PublicKey key{};
  if (auto it = registry.keys.find(attacker); it != registry.keys.end()) key = it->second;

  Block b;
  for (std::size_t i = 0; i < std::max<std::size_t>(tx_count, 1); ++i) {
    Transaction tx;
    tx.origin = attacker;
    tx.pkt_id = rng.next_u64();
    for (auto& byte : tx.payload_digest) byte = static_cast<std::uint8_t>(rng.next_u64());
    tx.timestamp = now;
    tx.pubkey = key;
    for (auto& byte : tx.signature) byte = static_cast<std::uint8_t>(rng.next_u64());
    tx.tx_id = tx.compute_id();
    b.txs.push_back(tx);
  }
  const BlockHeader& head = view.head().header;
  b.header.height = head.height + 1;
  b.header.prev_hash = hash_block(head);
  b.header.tx_root = merkle_root(b.txs);
  b.header.timestamp = std::max(now, head.timestamp);
  b.header.miner = attacker;
  return b;
}

CompromiseEvent attempt_compromise(EntityId target, ControllerMode mode,
                                   const AttackProfile& profile, SimTime now, double draw) {
  CompromiseEvent ev;
  ev.t = now;
  ev.target = target;
  ev.succeeded = draw < profile.compromise_success(mode);
  ev.detected = mode == ControllerMode::Distb && !ev.succeeded;
  return ev;
}

std::optional<SimTime> CompromiseProcess::next_attempt(SimTime after, RngStream& rng) const {
  if (!profile_.active() || profile_.compromise_attempt_rate <= 0.0) return std::nullopt;
  const double gap_s = rng.exponential(profile_.compromise_attempt_rate);
  if (!(gap_s < 1e12)) return std::nullopt;
  const SimTime base = std::max(after, profile_.start);
  return base + SimTime::seconds(gap_s);
}

}  // namespace distb
