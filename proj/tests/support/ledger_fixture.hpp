#pragma once

#include <map>
#include <memory>
#include <vector>

#include "distb/consensus.hpp"
#include "distb/ledger.hpp"

namespace fixture {

using namespace distb;

inline std::array<std::uint8_t, 32> seed_for(EntityId id) {
  std::array<std::uint8_t, 32> seed{};
  for (int i = 0; i < 8; ++i) seed[i] = static_cast<std::uint8_t>(id >> (8 * i));
  seed[31] = 0xA5;
  return seed;
}

/// Registered participants 1..n with deterministic keys.
struct Keys {
  SignatureScheme scheme;
  std::map<EntityId, KeyPair> pairs;
  std::shared_ptr<KeyRegistry> registry = std::make_shared<KeyRegistry>();

  explicit Keys(std::uint32_t n, SignatureScheme s = SignatureScheme::Ed25519) : scheme(s) {
    registry->scheme = s;
    for (EntityId id = 1; id <= n; ++id) {
      pairs[id] = derive_keypair(s, seed_for(id));
      registry->keys[id] = pairs[id].public_key;
    }
  }

  Transaction tx(EntityId origin, std::uint64_t seq, SimTime t) const {
    const std::uint64_t pkt = (origin << 32) | seq;
    ByteWriter w;
    w.u64(pkt);
    return make_transaction(origin, pkt, sha256(w.bytes()), t, pairs.at(origin), scheme);
  }

  /// Next block on `chain` holding `txs`, with accept votes from `voters`.
  Block block(const Chain& chain, std::vector<Transaction> txs, SimTime t, EntityId miner,
              const std::vector<EntityId>& voters) const {
    Block b;
    b.header.height = chain.height() + 1;
    b.header.prev_hash = hash_block(chain.head().header);
    b.header.timestamp = t;
    b.header.miner = miner;
    b.txs = std::move(txs);
    b.header.tx_root = merkle_root(b.txs);
    const Hash32 h = hash_block(b.header);
    for (EntityId v : voters) b.votes.push_back(make_vote(v, h, true, pairs.at(v), scheme));
    return b;
  }
};

inline TallyResult admitted(const Block& b) {
  TallyResult t;
  t.block_hash = hash_block(b.header);
  t.accepted = true;
  return t;
}

}  // namespace fixture
