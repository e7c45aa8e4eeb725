#include "distb/consensus.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace distb {

void check_threshold(double tau) {
  // Four-decimal tolerance so that 0.6 and 0.8 typed in a config are accepted.
  if (!(tau >= kMinThreshold - 1e-9 && tau <= kMaxThreshold + 1e-9)) {
    throw ThresholdError(fmt::format(
        "consent threshold {} is outside the admissible 0.60-0.80 band (at least 60-80 percent "
        "of miners must consent)",
        tau));
  }
}

std::uint32_t quorum_size(double tau, std::uint32_t miners_total) {
  const auto basis_points = static_cast<std::uint64_t>(std::llround(tau * 10000.0));
  return static_cast<std::uint32_t>((basis_points * miners_total + 9999) / 10000);
}

TallyResult tally(const Hash32& block_hash, std::span<const Vote> votes,
                  std::uint32_t miners_total, double tau) {
  check_threshold(tau);
  TallyResult r;
  r.block_hash = block_hash;
  r.miners_total = miners_total;
  r.threshold = tau;
  std::unordered_set<EntityId> seen;
  for (const auto& v : votes) {
    if (v.block_hash != block_hash) continue;
    if (!seen.insert(v.miner).second) continue;
    if (v.accept) ++r.accepts;
  }
  r.accepted = r.accepts >= quorum_size(tau, miners_total);
  return r;
}

std::uint32_t LedgerMessage::wire_size() const {
  constexpr std::uint32_t kHeader = 88 + 16;
  // Compact relay: receivers already hold pooled transactions, so a block
  // travels as its header plus tx ids.
  constexpr std::uint32_t kTx = 32;
  constexpr std::uint32_t kVote = 105;
  if (kind == Kind::VoteMsg || !block) return kVote;
  return kHeader + kTx * static_cast<std::uint32_t>(block->txs.size()) +
         kVote * static_cast<std::uint32_t>(block->votes.size());
}

ConsensusNet::ConsensusNet(Kernel& kernel, ConsensusConfig config,
                           std::shared_ptr<const KeyRegistry> registry)
    : kernel_(&kernel), config_(config), registry_(std::move(registry)) {
  check_threshold(config_.tau);
}

void ConsensusNet::add_miner(EntityId id, KeyPair key, bool compromised) {
  miners_.emplace(id, MinerState{id, key, Chain(registry_, config_.max_block_txs), true,
                                 compromised, false});
  order_.push_back(id);
  std::sort(order_.begin(), order_.end());
}

void ConsensusNet::start(SimTime first) { schedule_round(first); }

void ConsensusNet::schedule_round(SimTime at) {
  kernel_->schedule(at, kSystemId, EventKind::BlockPropose, [this, at] {
    run_round();
    schedule_round(at + config_.round_period);
  });
}

void ConsensusNet::submit(Transaction tx) {
  ++counters_.txs_submitted;
  pool_.push_back(std::move(tx));
}

std::optional<Round> ConsensusNet::run_round() {
  ++counters_.rounds;
  const std::uint64_t round_id = next_round_++;
  if (order_.empty()) {
    ++counters_.rounds_skipped;
    return std::nullopt;
  }
  const EntityId proposer = order_[round_id % order_.size()];
  if (!miners_.at(proposer).alive) {
    ++counters_.rounds_skipped;
    return std::nullopt;
  }
  auto block = propose_block(proposer);
  if (!block) {
    ++counters_.rounds_skipped;
    return std::nullopt;
  }
  open_instance(proposer, std::move(*block), false);
  return Round{round_id, proposer, kernel_->now() + config_.vote_window};
}

std::optional<Block> ConsensusNet::propose_block(EntityId proposer) {
  const MinerState& m = miners_.at(proposer);
  if (!m.alive || pool_.empty()) return std::nullopt;

  Block b;
  std::unordered_set<Hash32, Hash32Hasher> chosen;
  while (!pool_.empty() && b.txs.size() < config_.max_block_txs) {
    Transaction tx = std::move(pool_.front());
    pool_.pop_front();
    if (!verify_transaction(tx, *registry_) || m.replica.contains_tx(tx.tx_id) ||
        !chosen.insert(tx.tx_id).second) {
      ++counters_.txs_discarded;
      continue;
    }
    b.txs.push_back(std::move(tx));
  }
  if (b.txs.empty()) return std::nullopt;

  const BlockHeader& head = m.replica.head().header;
  b.header.height = head.height + 1;
  b.header.prev_hash = hash_block(head);
  b.header.tx_root = merkle_root(b.txs);
  b.header.timestamp = std::max(kernel_->now(), head.timestamp);
  b.header.miner = proposer;
  return b;
}

Vote ConsensusNet::cast_vote(EntityId miner, const Block& block) const {
  const MinerState& m = miners_.at(miner);
  const Hash32 h = hash_block(block.header);
  const bool accept = m.compromised ? forged_hashes_.count(h) != 0
                                    : m.replica.validate(block) == BlockStatus::Ok;
  return make_vote(miner, h, accept, m.key, registry_->scheme);
}

void ConsensusNet::inject_forged(EntityId proposer, Block block) {
  ++counters_.forged_attempted;
  forged_hashes_.insert(hash_block(block.header));
  open_instance(proposer, std::move(block), true);
}

void ConsensusNet::open_instance(EntityId proposer, Block block, bool forged) {
  const std::uint64_t id = next_instance_++;
  Instance inst;
  inst.proposer = proposer;
  inst.hash = hash_block(block.header);
  inst.block = std::make_shared<const Block>(std::move(block));
  inst.forged = forged;
  const Vote own = cast_vote(proposer, *inst.block);
  inst.votes.push_back(own);
  inst.voted.insert(proposer);
  auto block_ptr = inst.block;
  instances_.emplace(id, std::move(inst));

  for (EntityId to : order_) {
    if (to == proposer) continue;
    LedgerMessage msg;
    msg.kind = LedgerMessage::Kind::Proposal;
    msg.instance = id;
    msg.sender = proposer;
    msg.block = block_ptr;
    send(proposer, to, std::move(msg));
  }
  kernel_->schedule_in(config_.vote_window, proposer, EventKind::Vote,
                       [this, id] { close_instance(id); });
}

void ConsensusNet::close_instance(std::uint64_t id) {
  auto it = instances_.find(id);
  if (it == instances_.end()) return;
  Instance inst = std::move(it->second);
  instances_.erase(it);

  const TallyResult result = tally(inst.hash, inst.votes, miners_total(), config_.tau);
  const MinerState& proposer = miners_.at(inst.proposer);
  const bool admitted = result.accepted && proposer.alive;

  if (audit_) {
    audit_(fmt::format("t={} instance={} proposer={} height={} accepts={}/{} admitted={} forged={} "
                       "hash={}",
                       kernel_->now().ticks(), id, inst.proposer, inst.block->header.height,
                       result.accepts, result.miners_total, admitted, inst.forged,
                       to_hex(inst.hash).substr(0, 16)));
  }

  if (!admitted) {
    ++counters_.blocks_rejected;
    if (!inst.forged) {
      for (auto tx = inst.block->txs.rbegin(); tx != inst.block->txs.rend(); ++tx) {
        pool_.push_front(*tx);
      }
    }
    return;
  }
  if (inst.forged) ++counters_.forged_admitted;

  auto committed = std::make_shared<Block>(*inst.block);
  std::sort(inst.votes.begin(), inst.votes.end(),
            [](const Vote& a, const Vote& b) { return a.miner < b.miner; });
  committed->votes = std::move(inst.votes);

  LedgerMessage msg;
  msg.kind = LedgerMessage::Kind::Commit;
  msg.instance = id;
  msg.sender = inst.proposer;
  msg.block = std::move(committed);

  const auto before = miners_.at(inst.proposer).replica.height();
  on_commit(inst.proposer, msg);
  const bool proposer_appended = miners_.at(inst.proposer).replica.height() > before;
  if (!inst.forged && proposer_appended) ++counters_.blocks_committed;
  if (!inst.forged && !proposer_appended) {
    for (auto tx = msg.block->txs.rbegin(); tx != msg.block->txs.rend(); ++tx) {
      pool_.push_front(*tx);
    }
  }

  for (EntityId to : order_) {
    if (to != inst.proposer) send(inst.proposer, to, msg);
  }
}

void ConsensusNet::send(EntityId from, EntityId to, LedgerMessage msg) {
  if (send_) {
    send_(from, to, std::move(msg));
    return;
  }
  kernel_->schedule_in(SimTime{}, to, EventKind::Vote,
                       [this, to, m = std::move(msg)] { deliver(to, m); });
}

void ConsensusNet::deliver(EntityId to, LedgerMessage msg) {
  switch (msg.kind) {
    case LedgerMessage::Kind::Proposal: on_proposal(to, msg); break;
    case LedgerMessage::Kind::VoteMsg: on_vote(msg); break;
    case LedgerMessage::Kind::Commit: on_commit(to, msg); break;
  }
}

void ConsensusNet::undeliverable(EntityId to, const LedgerMessage& msg) {
  if (msg.kind != LedgerMessage::Kind::Commit) return;
  auto it = miners_.find(to);
  if (it == miners_.end() || it->second.stale) return;
  it->second.stale = true;
  ++counters_.stale_marks;
}

void ConsensusNet::on_proposal(EntityId miner, const LedgerMessage& msg) {
  const MinerState& m = miners_.at(miner);
  if (!m.alive) return;
  LedgerMessage reply;
  reply.kind = LedgerMessage::Kind::VoteMsg;
  reply.instance = msg.instance;
  reply.sender = miner;
  reply.vote = cast_vote(miner, *msg.block);
  send(miner, msg.sender, std::move(reply));
}

void ConsensusNet::on_vote(const LedgerMessage& msg) {
  auto it = instances_.find(msg.instance);
  if (it == instances_.end()) return;
  Instance& inst = it->second;
  if (msg.vote.block_hash != inst.hash || !verify_vote(msg.vote, *registry_)) return;
  if (!inst.voted.insert(msg.vote.miner).second) return;
  inst.votes.push_back(msg.vote);
}

void ConsensusNet::on_commit(EntityId miner, const LedgerMessage& msg) {
  MinerState& m = miners_.at(miner);
  if (!m.alive) return;
  const std::uint64_t target = msg.block->header.height;
  if (target <= m.replica.height()) return;

  auto admit = [&](const std::shared_ptr<const Block>& b) {
    std::vector<Vote> valid;
    for (const auto& v : b->votes) {
      if (verify_vote(v, *registry_)) valid.push_back(v);
    }
    const TallyResult t = tally(hash_block(b->header), valid, miners_total(), config_.tau);
    return m.replica.append(b, t) == BlockStatus::Ok;
  };

  if (target > m.replica.height() + 1) {
    const MinerState& source = miners_.at(msg.sender);
    ++counters_.syncs;
    while (m.replica.height() + 1 < target && m.replica.height() + 1 <= source.replica.height()) {
      if (!admit(source.replica.shared_at(m.replica.height() + 1))) break;
    }
  }
  if (m.replica.height() + 1 == target && admit(msg.block)) {
    m.stale = false;
    if (forged_hashes_.count(hash_block(msg.block->header)) != 0) ++counters_.forged_appended;
  }
}

void ConsensusNet::set_alive(EntityId miner, bool alive) { miners_.at(miner).alive = alive; }

const Chain& ConsensusNet::best_honest_chain() const {
  const MinerState* best = nullptr;
  for (const auto& [id, m] : miners_) {
    if (m.compromised) continue;
    if (best == nullptr || m.replica.height() > best->replica.height()) best = &m;
  }
  if (best == nullptr) best = &miners_.begin()->second;
  return best->replica;
}

bool ConsensusNet::honest_replicas_consistent() const {
  if (miners_.empty()) return true;
  const Chain& ref = best_honest_chain();
  for (const auto& [id, m] : miners_) {
    if (m.compromised) continue;
    for (std::uint64_t h = 0; h <= m.replica.height(); ++h) {
      if (hash_block(m.replica.at(h).header) != hash_block(ref.at(h).header)) return false;
    }
  }
  return true;
}

}  // namespace distb
