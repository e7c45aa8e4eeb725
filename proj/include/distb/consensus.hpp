#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <unordered_set>
#include <vector>

#include "distb/kernel.hpp"
#include "distb/ledger.hpp"

namespace distb {

inline constexpr double kMinThreshold = 0.60;
inline constexpr double kMaxThreshold = 0.80;

/// Thrown for a consent threshold outside the 60-80% band.
class ThresholdError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void check_threshold(double tau);

/// ceil(tau * miners_total), computed exactly for tau given to four decimals.
std::uint32_t quorum_size(double tau, std::uint32_t miners_total);

/// Counts one vote per miner for `block_hash` (first vote wins); votes for
/// other blocks are ignored. Absent miners count as non-accepting.
TallyResult tally(const Hash32& block_hash, std::span<const Vote> votes,
                  std::uint32_t miners_total, double tau);

struct ConsensusConfig {
  double tau = 0.66;
  SimTime round_period = SimTime::ms(1000);
  /// Votes arriving later than this after the proposal are ignored.
  SimTime vote_window = SimTime::ms(500);
  std::size_t max_block_txs = 64;
};

struct LedgerMessage {
  enum class Kind : std::uint8_t { Proposal, VoteMsg, Commit };

  Kind kind = Kind::Proposal;
  std::uint64_t instance = 0;
  EntityId sender = 0;
  std::shared_ptr<const Block> block;
  Vote vote;

  /// Bytes on the wire, for link serialization.
  std::uint32_t wire_size() const;
};

struct Round {
  std::uint64_t round_id = 0;
  EntityId proposer = 0;
  SimTime deadline{};
};

struct MinerState {
  EntityId id = 0;
  KeyPair key;
  Chain replica;
  bool alive = true;
  /// Adversary-controlled: rejects honest blocks, accepts forged ones.
  bool compromised = false;
  bool stale = false;
};

struct ConsensusCounters {
  std::uint64_t rounds = 0;
  std::uint64_t rounds_skipped = 0;
  std::uint64_t blocks_committed = 0;
  std::uint64_t blocks_rejected = 0;
  std::uint64_t forged_attempted = 0;
  std::uint64_t forged_admitted = 0;
  std::uint64_t forged_appended = 0;
  std::uint64_t syncs = 0;
  std::uint64_t stale_marks = 0;
  std::uint64_t txs_submitted = 0;
  std::uint64_t txs_discarded = 0;
};

/// Threshold-consent admission over a set of miner replicas.
///
/// Each round a round-robin proposer assembles a block from the pool and
/// sends it to every miner; miners answer with signed votes; at the end of
/// the vote window the proposer tallies and, on admission, broadcasts the
/// block with its votes. Receivers re-validate before appending and pull
/// missing heights from the sender when they are behind.
class ConsensusNet {
 public:
  using SendFn = std::function<void(EntityId from, EntityId to, LedgerMessage msg)>;
  using AuditFn = std::function<void(const std::string& line)>;

  ConsensusNet(Kernel& kernel, ConsensusConfig config, std::shared_ptr<const KeyRegistry> registry);

  ConsensusNet(const ConsensusNet&) = delete;
  ConsensusNet& operator=(const ConsensusNet&) = delete;

  void add_miner(EntityId id, KeyPair key, bool compromised = false);
  void set_transport(SendFn send) { send_ = std::move(send); }
  void set_audit(AuditFn audit) { audit_ = std::move(audit); }

  /// Schedules the first round at `first` and every round_period after.
  void start(SimTime first);

  void submit(Transaction tx);

  /// Starts round `round_id` now. Returns the round, or nullopt when it
  /// was skipped (dead proposer or nothing to propose).
  std::optional<Round> run_round();

  /// Up to max_block_txs oldest pooled txs that pass signature and
  /// duplicate checks against the proposer's replica; the rest stay pooled.
  std::optional<Block> propose_block(EntityId proposer);

  Vote cast_vote(EntityId miner, const Block& block) const;

  /// Opens a voting instance for an externally built (forged) block.
  void inject_forged(EntityId proposer, Block block);

  void deliver(EntityId to, LedgerMessage msg);
  /// Transport reports a message that could not be delivered.
  void undeliverable(EntityId to, const LedgerMessage& msg);

  void set_alive(EntityId miner, bool alive);

  const std::map<EntityId, MinerState>& miners() const { return miners_; }
  MinerState& miner(EntityId id) { return miners_.at(id); }
  const MinerState& miner(EntityId id) const { return miners_.at(id); }
  const std::deque<Transaction>& pool() const { return pool_; }
  const ConsensusCounters& counters() const { return counters_; }
  const ConsensusConfig& config() const { return config_; }
  std::uint32_t miners_total() const { return static_cast<std::uint32_t>(miners_.size()); }

  /// Longest replica among honest miners.
  const Chain& best_honest_chain() const;
  /// No two honest replicas hold different blocks at the same height.
  bool honest_replicas_consistent() const;

 private:
  struct Instance {
    EntityId proposer = 0;
    std::shared_ptr<const Block> block;
    Hash32 hash{};
    std::vector<Vote> votes;
    std::set<EntityId> voted;
    bool forged = false;
    bool open = true;
  };

  void open_instance(EntityId proposer, Block block, bool forged);
  void close_instance(std::uint64_t id);
  void on_proposal(EntityId miner, const LedgerMessage& msg);
  void on_vote(const LedgerMessage& msg);
  void on_commit(EntityId miner, const LedgerMessage& msg);
  void send(EntityId from, EntityId to, LedgerMessage msg);
  void schedule_round(SimTime at);

  Kernel* kernel_;
  ConsensusConfig config_;
  std::shared_ptr<const KeyRegistry> registry_;
  std::map<EntityId, MinerState> miners_;
  std::vector<EntityId> order_;
  std::deque<Transaction> pool_;
  std::map<std::uint64_t, Instance> instances_;
  std::unordered_set<Hash32, Hash32Hasher> forged_hashes_;
  std::uint64_t next_round_ = 0;
  std::uint64_t next_instance_ = 1;
  ConsensusCounters counters_;
  SendFn send_;
  AuditFn audit_;
};

}  // namespace distb
