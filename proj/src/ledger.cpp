#include "distb/ledger.hpp"

#include <charconv>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace distb {

Bytes Transaction::body() const {
  ByteWriter w;
  w.u64(origin).u64(pkt_id).raw(payload_digest).u64(timestamp.ticks()).raw(pubkey);
  return w.take();
}

Transaction make_transaction(EntityId origin, std::uint64_t pkt_id, const Hash32& payload_digest,
                             SimTime timestamp, const KeyPair& key, SignatureScheme scheme) {
  Transaction tx;
  tx.origin = origin;
  tx.pkt_id = pkt_id;
  tx.payload_digest = payload_digest;
  tx.timestamp = timestamp;
  tx.pubkey = key.public_key;
  const Bytes body = tx.body();
  tx.tx_id = sha256(body);
  tx.signature = sign(scheme, key, body);
  return tx;
}

bool verify_transaction(const Transaction& tx, const KeyRegistry& registry) {
  return registry.is_registered(tx.origin, tx.pubkey) &&
         verify(registry.scheme, tx.pubkey, tx.body(), tx.signature);
}

Bytes Vote::message() const {
  ByteWriter w;
  w.u64(miner).raw(block_hash).u8(accept ? 1 : 0);
  return w.take();
}

Vote make_vote(EntityId miner, const Hash32& block_hash, bool accept, const KeyPair& key,
               SignatureScheme scheme) {
  Vote v{miner, block_hash, accept, {}};
  v.signature = sign(scheme, key, v.message());
  return v;
}

bool verify_vote(const Vote& vote, const KeyRegistry& registry) {
  auto it = registry.keys.find(vote.miner);
  if (it == registry.keys.end()) return false;
  return verify(registry.scheme, it->second, vote.message(), vote.signature);
}

Hash32 hash_block(const BlockHeader& header) {
  ByteWriter w;
  w.u64(header.height)
      .raw(header.prev_hash)
      .raw(header.tx_root)
      .u64(header.timestamp.ticks())
      .u64(header.miner);
  return sha256(w.bytes());
}

Hash32 merkle_root(std::span<const Hash32> leaves) {
  if (leaves.empty()) return sha256({});
  std::vector<Hash32> level(leaves.begin(), leaves.end());
  std::array<std::uint8_t, 64> pair{};
  while (level.size() > 1) {
    if (level.size() % 2 != 0) level.push_back(level.back());
    std::vector<Hash32> next;
    next.reserve(level.size() / 2);
    for (std::size_t i = 0; i < level.size(); i += 2) {
      std::copy(level[i].begin(), level[i].end(), pair.begin());
      std::copy(level[i + 1].begin(), level[i + 1].end(), pair.begin() + 32);
      next.push_back(sha256(pair));
    }
    level = std::move(next);
  }
  return level.front();
}

Hash32 merkle_root(const std::vector<Transaction>& txs) {
  std::vector<Hash32> ids;
  ids.reserve(txs.size());
  for (const auto& tx : txs) ids.push_back(tx.tx_id);
  return merkle_root(ids);
}

Block genesis() {
  Block b;
  b.header.height = 0;
  b.header.tx_root = sha256({});
  b.header.timestamp = SimTime{};
  b.header.miner = kSystemId;
  return b;
}

const char* to_string(BlockStatus status) {
  switch (status) {
    case BlockStatus::Ok: return "Ok";
    case BlockStatus::BadLink: return "BadLink";
    case BlockStatus::BadHeight: return "BadHeight";
    case BlockStatus::BadRoot: return "BadRoot";
    case BlockStatus::BadSig: return "BadSig";
    case BlockStatus::Duplicate: return "Duplicate";
    case BlockStatus::BadTime: return "BadTime";
    case BlockStatus::BadSize: return "BadSize";
    case BlockStatus::NoQuorum: return "NoQuorum";
  }
  return "Unknown";
}

Bytes encode_block(const Block& block) {
  ByteWriter w;
  const auto& h = block.header;
  w.u64(h.height).raw(h.prev_hash).raw(h.tx_root).u64(h.timestamp.ticks()).u64(h.miner);
  w.u64(block.txs.size());
  for (const auto& tx : block.txs) {
    w.raw(tx.tx_id)
        .u64(tx.origin)
        .u64(tx.pkt_id)
        .raw(tx.payload_digest)
        .u64(tx.timestamp.ticks())
        .raw(tx.pubkey)
        .raw(tx.signature);
  }
  w.u64(block.votes.size());
  for (const auto& v : block.votes) {
    w.u64(v.miner).raw(v.block_hash).u8(v.accept ? 1 : 0).raw(v.signature);
  }
  return w.take();
}

Block decode_block(std::span<const std::uint8_t> bytes) {
  constexpr std::uint64_t kMaxItems = 1u << 20;
  ByteReader r(bytes);
  Block b;
  b.header.height = r.u64();
  b.header.prev_hash = r.fixed<32>();
  b.header.tx_root = r.fixed<32>();
  b.header.timestamp = SimTime(r.u64());
  b.header.miner = r.u64();
  const std::uint64_t n_tx = r.u64();
  if (n_tx > kMaxItems) throw std::invalid_argument("implausible tx count");
  b.txs.resize(n_tx);
  for (auto& tx : b.txs) {
    tx.tx_id = r.fixed<32>();
    tx.origin = r.u64();
    tx.pkt_id = r.u64();
    tx.payload_digest = r.fixed<32>();
    tx.timestamp = SimTime(r.u64());
    tx.pubkey = r.fixed<32>();
    tx.signature = r.fixed<64>();
  }
  const std::uint64_t n_votes = r.u64();
  if (n_votes > kMaxItems) throw std::invalid_argument("implausible vote count");
  b.votes.resize(n_votes);
  for (auto& v : b.votes) {
    v.miner = r.u64();
    v.block_hash = r.fixed<32>();
    const std::uint8_t accept = r.u8();
    if (accept > 1) throw std::invalid_argument("bad vote flag");
    v.accept = accept == 1;
    v.signature = r.fixed<64>();
  }
  if (!r.done()) throw std::invalid_argument("trailing bytes after block");
  return b;
}

Chain::Chain(std::shared_ptr<const KeyRegistry> registry, std::size_t max_block_txs)
    : registry_(std::move(registry)), max_block_txs_(max_block_txs) {
  blocks_.push_back(std::make_shared<const Block>(genesis()));
}

BlockStatus Chain::validate(const Block& block) const {
  const BlockHeader& parent = head().header;
  const BlockHeader& h = block.header;
  if (h.prev_hash != hash_block(parent)) return BlockStatus::BadLink;
  if (h.height != parent.height + 1) return BlockStatus::BadHeight;
  if (block.txs.empty() || block.txs.size() > max_block_txs_) return BlockStatus::BadSize;
  for (const auto& tx : block.txs) {
    if (tx.compute_id() != tx.tx_id) return BlockStatus::BadRoot;
  }
  if (merkle_root(block.txs) != h.tx_root) return BlockStatus::BadRoot;
  for (const auto& tx : block.txs) {
    if (!verify_transaction(tx, *registry_)) return BlockStatus::BadSig;
  }
  std::unordered_set<Hash32, Hash32Hasher> seen;
  for (const auto& tx : block.txs) {
    if (contains_tx(tx.tx_id) || !seen.insert(tx.tx_id).second) return BlockStatus::Duplicate;
  }
  if (h.timestamp < parent.timestamp) return BlockStatus::BadTime;
  return BlockStatus::Ok;
}

BlockStatus Chain::append(std::shared_ptr<const Block> block, const TallyResult& tally) {
  const BlockStatus status = validate(*block);
  if (status != BlockStatus::Ok) return status;
  if (!tally.accepted || tally.block_hash != hash_block(block->header)) return BlockStatus::NoQuorum;
  push(std::move(block));
  return BlockStatus::Ok;
}

void Chain::push(std::shared_ptr<const Block> block) {
  for (const auto& tx : block->txs) tx_index_.insert(tx.tx_id);
  blocks_.push_back(std::move(block));
}

namespace {

bool votes_ok(const Block& block, const KeyRegistry& registry) {
  const Hash32 expected = hash_block(block.header);
  bool any_accept = false;
  std::unordered_set<EntityId> voters;
  for (const auto& v : block.votes) {
    if (v.block_hash != expected || !verify_vote(v, registry)) return false;
    if (!voters.insert(v.miner).second) return false;
    any_accept = any_accept || v.accept;
  }
  return any_accept;
}

bool same_header(const BlockHeader& a, const BlockHeader& b) {
  return a.height == b.height && a.prev_hash == b.prev_hash && a.tx_root == b.tx_root &&
         a.timestamp == b.timestamp && a.miner == b.miner;
}

}  // namespace

bool verify_chain(std::span<const Block> blocks, std::shared_ptr<const KeyRegistry> registry,
                  std::size_t max_block_txs) {
  if (blocks.empty()) return false;
  const Block g = genesis();
  if (!same_header(blocks.front().header, g.header) || !blocks.front().txs.empty() ||
      !blocks.front().votes.empty()) {
    return false;
  }
  Chain replay(registry, max_block_txs);
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    if (replay.validate(b) != BlockStatus::Ok) return false;
    if (!votes_ok(b, *registry)) return false;
    TallyResult admitted;
    admitted.block_hash = hash_block(b.header);
    admitted.accepted = true;
    if (replay.append(std::make_shared<const Block>(b), admitted) != BlockStatus::Ok) return false;
  }
  return true;
}

bool verify_chain(const Chain& chain) {
  std::vector<Block> copy;
  copy.reserve(chain.size());
  for (const auto& b : chain.blocks()) copy.push_back(*b);
  return verify_chain(copy, chain.shared_registry(), chain.max_block_txs());
}

namespace {

std::uint64_t parse_u64(std::string_view s) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("malformed selector number: " + std::string(s));
  }
  return v;
}

Hash32 parse_hash(std::string_view s) {
  if (s.size() != 64) throw std::invalid_argument("tx selector needs 64 hex digits");
  Hash32 out{};
  for (std::size_t i = 0; i < 32; ++i) {
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(s.data() + 2 * i, s.data() + 2 * i + 2, v, 16);
    if (ec != std::errc{} || ptr != s.data() + 2 * i + 2) {
      throw std::invalid_argument("malformed hex in tx selector");
    }
    out[i] = static_cast<std::uint8_t>(v);
  }
  return out;
}

}  // namespace

Selector parse_selector(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw std::invalid_argument("malformed selector: " + std::string(text));
  }
  const auto kind = text.substr(0, colon);
  const auto arg = text.substr(colon + 1);
  if (kind == "tx") return ByTxId{parse_hash(arg)};
  if (kind == "height") return ByHeight{parse_u64(arg)};
  if (kind == "origin") return ByOrigin{parse_u64(arg)};
  if (kind == "range") {
    const auto dash = arg.find('-');
    if (dash == std::string_view::npos) throw std::invalid_argument("range selector needs a-b");
    HeightRange r{parse_u64(arg.substr(0, dash)), parse_u64(arg.substr(dash + 1))};
    if (r.from > r.to) throw std::invalid_argument("range selector with from > to");
    return r;
  }
  throw std::invalid_argument("unknown selector kind: " + std::string(kind));
}

QueryResult query(const Chain& chain, const Selector& selector) {
  QueryResult out;
  std::visit(
      [&](const auto& sel) {
        using T = std::decay_t<decltype(sel)>;
        if constexpr (std::is_same_v<T, ByHeight>) {
          if (sel.height < chain.size()) out.blocks.push_back(&chain.at(sel.height));
        } else if constexpr (std::is_same_v<T, HeightRange>) {
          if (sel.from > sel.to) throw std::invalid_argument("range selector with from > to");
          for (std::uint64_t h = sel.from; h <= sel.to && h < chain.size(); ++h) {
            out.blocks.push_back(&chain.at(h));
          }
        } else if constexpr (std::is_same_v<T, ByTxId>) {
          if (!chain.contains_tx(sel.tx_id)) return;
          for (const auto& b : chain.blocks()) {
            for (const auto& tx : b->txs) {
              if (tx.tx_id == sel.tx_id) out.txs.push_back(&tx);
            }
          }
        } else {
          for (const auto& b : chain.blocks()) {
            for (const auto& tx : b->txs) {
              if (tx.origin == sel.origin) out.txs.push_back(&tx);
            }
          }
        }
      },
      selector);
  return out;
}

void export_chain(const Chain& chain, std::ostream& out) {
  for (const auto& b : chain.blocks()) {
    nlohmann::ordered_json j;
    j["height"] = b->header.height;
    j["hash"] = to_hex(hash_block(b->header));
    j["prev_hash"] = to_hex(b->header.prev_hash);
    j["tx_root"] = to_hex(b->header.tx_root);
    j["timestamp_ms"] = b->header.timestamp.ticks();
    j["miner"] = b->header.miner;
    j["tx_count"] = b->txs.size();
    j["votes"] = b->votes.size();
    out << j.dump() << '\n';
  }
}

}  // namespace distb
