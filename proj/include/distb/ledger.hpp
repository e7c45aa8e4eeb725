#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "distb/crypto.hpp"
#include "distb/kernel.hpp"

namespace distb {

struct Hash32Hasher {
  std::size_t operator()(const Hash32& h) const {
    std::size_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[i];
    return v;
  }
};

/// Public keys of every registered participant, fixed at bootstrap.
struct KeyRegistry {
  SignatureScheme scheme = SignatureScheme::Ed25519;
  std::unordered_map<EntityId, PublicKey> keys;

  bool is_registered(EntityId id, const PublicKey& key) const {
    auto it = keys.find(id);
    return it != keys.end() && it->second == key;
  }
};

struct Transaction {
  Hash32 tx_id{};
  EntityId origin = 0;
  std::uint64_t pkt_id = 0;
  Hash32 payload_digest{};
  SimTime timestamp{};
  PublicKey pubkey{};
  Signature signature{};

  /// origin(8) | pkt_id(8) | payload_digest(32) | timestamp(8) | pubkey(32)
  Bytes body() const;
  Hash32 compute_id() const { return sha256(body()); }
};

Transaction make_transaction(EntityId origin, std::uint64_t pkt_id, const Hash32& payload_digest,
                             SimTime timestamp, const KeyPair& key, SignatureScheme scheme);
bool verify_transaction(const Transaction& tx, const KeyRegistry& registry);

struct BlockHeader {
  std::uint64_t height = 0;
  Hash32 prev_hash{};
  Hash32 tx_root{};
  SimTime timestamp{};
  EntityId miner = kSystemId;
};

struct Vote {
  EntityId miner = 0;
  Hash32 block_hash{};
  bool accept = false;
  Signature signature{};

  /// miner(8) | block_hash(32) | accept(1)
  Bytes message() const;
};

Vote make_vote(EntityId miner, const Hash32& block_hash, bool accept, const KeyPair& key,
               SignatureScheme scheme);
bool verify_vote(const Vote& vote, const KeyRegistry& registry);

struct TallyResult {
  Hash32 block_hash{};
  std::uint32_t accepts = 0;
  std::uint32_t miners_total = 0;
  double threshold = 0.66;
  bool accepted = false;
};

struct Block {
  BlockHeader header;
  std::vector<Transaction> txs;
  std::vector<Vote> votes;
};

/// SHA-256 of height(8 BE) | prev_hash | tx_root | timestamp(8 BE) | miner(8 BE).
Hash32 hash_block(const BlockHeader& header);

/// Binary Merkle tree over tx ids; the last node of an odd level is paired
/// with itself. An empty list hashes to SHA-256 of the empty string.
Hash32 merkle_root(std::span<const Hash32> leaves);
Hash32 merkle_root(const std::vector<Transaction>& txs);

Block genesis();

enum class BlockStatus : std::uint8_t {
  Ok,
  BadLink,
  BadHeight,
  BadRoot,
  BadSig,
  Duplicate,
  BadTime,
  BadSize,
  NoQuorum,
};

const char* to_string(BlockStatus status);

/// Byte encoding of a whole block (header, txs, votes) for export and
/// tamper tests. decode_block throws std::out_of_range / invalid_argument
/// on malformed input.
Bytes encode_block(const Block& block);
Block decode_block(std::span<const std::uint8_t> bytes);

/// A miner's replica of the single sequential chain.
class Chain {
 public:
  Chain(std::shared_ptr<const KeyRegistry> registry, std::size_t max_block_txs = 64);

  const Block& head() const { return *blocks_.back(); }
  std::uint64_t height() const { return blocks_.back()->header.height; }
  std::size_t size() const { return blocks_.size(); }
  const Block& at(std::uint64_t height) const { return *blocks_.at(height); }
  std::shared_ptr<const Block> shared_at(std::uint64_t height) const { return blocks_.at(height); }
  const std::vector<std::shared_ptr<const Block>>& blocks() const { return blocks_; }
  const KeyRegistry& registry() const { return *registry_; }
  std::shared_ptr<const KeyRegistry> shared_registry() const { return registry_; }
  std::size_t max_block_txs() const { return max_block_txs_; }

  bool contains_tx(const Hash32& tx_id) const { return tx_index_.count(tx_id) != 0; }

  /// Checks `block` as the next child of head(), in the order link, height,
  /// root, signatures, duplicates, time; returns the first failure.
  BlockStatus validate(const Block& block) const;

  /// Appends when validation passes and the tally admitted this block.
  /// The chain is unchanged on any other outcome.
  BlockStatus append(std::shared_ptr<const Block> block, const TallyResult& tally);

 private:
  void push(std::shared_ptr<const Block> block);

  std::shared_ptr<const KeyRegistry> registry_;
  std::size_t max_block_txs_;
  std::vector<std::shared_ptr<const Block>> blocks_;
  std::unordered_set<Hash32, Hash32Hasher> tx_index_;
};

/// Replays every block against a fresh replica and checks the admission
/// votes each block carries.
bool verify_chain(std::span<const Block> blocks, std::shared_ptr<const KeyRegistry> registry,
                  std::size_t max_block_txs = 64);
bool verify_chain(const Chain& chain);

struct ByTxId {
  Hash32 tx_id;
};
struct ByHeight {
  std::uint64_t height;
};
struct ByOrigin {
  EntityId origin;
};
struct HeightRange {
  std::uint64_t from;
  std::uint64_t to;
};
using Selector = std::variant<ByTxId, ByHeight, ByOrigin, HeightRange>;

/// "tx:<64 hex>", "height:<n>", "origin:<id>", "range:<a>-<b>".
/// Throws std::invalid_argument on anything else.
Selector parse_selector(std::string_view text);

struct QueryResult {
  std::vector<const Block*> blocks;
  std::vector<const Transaction*> txs;
};

/// Block selectors fill `blocks`; tx and origin selectors fill `txs`.
QueryResult query(const Chain& chain, const Selector& selector);

/// One JSON object per block per line.
void export_chain(const Chain& chain, std::ostream& out);

}  // namespace distb
