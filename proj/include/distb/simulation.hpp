#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <vector>

#include "distb/consensus.hpp"
#include "distb/fabric.hpp"
#include "distb/metrics.hpp"
#include "distb/scenario.hpp"

namespace distb {

/// Stream ids are entity_id * 8 + purpose.
enum class StreamPurpose : std::uint64_t {
  Mobility = 0,
  Payload = 1,
  Keys = 2,
  Compromise = 3,
  Tamper = 4,
  Flood = 5,
  Forge = 6,
};

constexpr std::uint64_t stream_id(EntityId id, StreamPurpose purpose) {
  return id * 8 + static_cast<std::uint64_t>(purpose);
}

struct OutcomeRecord {
  std::uint64_t pkt_id = 0;
  SimTime t{};
  Outcome outcome = Outcome::DroppedNoRoute;
};

struct RunResult {
  Variant variant = Variant::Core;
  std::vector<MetricSample> samples;
  Counters totals;
  std::uint64_t in_flight_at_end = 0;
  std::uint64_t conservation_violations = 0;

  FabricCounters fabric;
  ConsensusCounters consensus;
  std::uint64_t chain_height = 0;
  bool chain_valid = true;
  bool replicas_consistent = true;

  std::uint64_t junk_sent = 0;
  std::uint64_t junk_delivered = 0;
  std::uint64_t junk_dropped = 0;
  std::uint64_t compromise_attempts = 0;
  std::uint64_t compromise_successes = 0;
  std::uint64_t compromise_detected = 0;

  std::uint64_t events = 0;
  double wall_seconds = 0.0;
};

/// Entity id layout of a world built from a scenario.
struct WorldLayout {
  EntityId controller = kSystemId;
  std::vector<EntityId> switches;
  std::vector<EntityId> gateways;
  std::vector<EntityId> miners;
  std::vector<EntityId> sensors;
  std::vector<EntityId> attackers;

  static WorldLayout from(const Scenario& s);
};

/// One isolated run of one variant: its own kernel, fabric, ledger and
/// metrics. Nothing is shared between instances.
class Simulation {
 public:
  Simulation(const Scenario& scenario, Variant variant);
  ~Simulation();

  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  void set_trace(std::ostream* out);
  void set_audit(std::ostream* out);
  /// Keeps a per-packet outcome log for independent recounts.
  void keep_outcomes(bool on);

  /// Runs to scenario.duration_s. Call once.
  RunResult run();

  const WorldLayout& layout() const;
  const Fabric& fabric() const;
  /// Longest honest replica; nullptr for the core variant.
  const Chain* chain() const;
  const ConsensusNet* consensus() const;
  const std::vector<OutcomeRecord>& outcomes() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace distb
