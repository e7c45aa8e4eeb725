#pragma once

#include <cstdint>

#include "distb/fabric.hpp"
#include "distb/kernel.hpp"
#include "distb/ledger.hpp"
#include "distb/mobility.hpp"

namespace distb {

struct AttackProfile {
  /// Per hop of a data packet through a switch.
  double tamper_prob = 0.0;
  /// Junk packets per second injected by each attacker.
  double flood_rate = 0.0;
  /// Compromise attempts per second aimed at each node.
  double compromise_attempt_rate = 0.0;
  double compromise_success_core = 0.0;
  double compromise_success_distb = 0.0;
  /// Forged blocks per second offered by the compromised miners.
  double forge_block_rate = 0.0;
  std::uint32_t attacker_count = 0;
  /// Miners under adversary control from the start of the run.
  std::uint32_t compromised_miners = 0;
  /// No attack activity before this time.
  SimTime start{};

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  double compromise_success(ControllerMode mode) const {
    return mode == ControllerMode::Core ? compromise_success_core : compromise_success_distb;
  }
  bool active() const { return attacker_count > 0; }
};

struct CompromiseEvent {
  SimTime t{};
  EntityId target = 0;
  bool succeeded = false;
  /// Failed attempts in distb mode are caught by ledger identity checks.
  bool detected = false;
};

/// Flips one payload byte. The digest is left alone, so only an integrity
/// check against the original digest can notice.
void tamper(DataPacket& pkt, RngStream& rng);

/// Block that links correctly to `view`'s head and carries attacker
/// transactions whose signatures honest validation rejects.
Block forge_block(EntityId attacker, const Chain& view, SimTime now, RngStream& rng,
                  std::size_t tx_count = 2);

/// One attempt with success probability for `mode`; `draw` is uniform in [0,1).
CompromiseEvent attempt_compromise(EntityId target, ControllerMode mode,
                                   const AttackProfile& profile, SimTime now, double draw);

/// Per-target attempt process: exponential gaps at compromise_attempt_rate
/// and one uniform draw per attempt, both from the target's own stream.
/// Scaling the rate rescales attempt times without changing the draws, so
/// failure counts are monotone in both rate and success probability.
class CompromiseProcess {
 public:
  CompromiseProcess(const AttackProfile& profile, ControllerMode mode)
      : profile_(profile), mode_(mode) {}

  /// Time of the next attempt after `after`, or nullopt when attempts are off.
  std::optional<SimTime> next_attempt(SimTime after, RngStream& rng) const;
  CompromiseEvent attempt(EntityId target, SimTime now, RngStream& rng) const {
    return attempt_compromise(target, mode_, profile_, now, rng.uniform01());
  }

 private:
  AttackProfile profile_;
  ControllerMode mode_;
};

}  // namespace distb
