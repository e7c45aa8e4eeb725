#include "distb/crypto.hpp"

#include <stdexcept>
#include <unordered_set>

#include <sodium.h>

namespace distb {

namespace {

struct SodiumInit {
  SodiumInit() {
    if (sodium_init() < 0) throw std::runtime_error("libsodium initialisation failed");
  }
};

void ensure_sodium() { static const SodiumInit init; }

}  // namespace

Hash32 sha256(std::span<const std::uint8_t> data) {
  Hash32 out{};
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

std::string to_hex(std::span<const std::uint8_t> data) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xF]);
  }
  return out;
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) throw std::out_of_range("truncated byte string");
}

std::uint8_t ByteReader::u8() {
  need(1);
  return data_[pos_++];
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_ + i];
  pos_ += 8;
  return v;
}

KeyPair derive_keypair(SignatureScheme scheme, const std::array<std::uint8_t, 32>& seed) {
  ensure_sodium();
  KeyPair kp;
  if (scheme == SignatureScheme::Ed25519) {
    crypto_sign_seed_keypair(kp.public_key.data(), kp.secret_key.data(), seed.data());
  } else {
    kp.public_key = sha256(seed);
    std::copy(seed.begin(), seed.end(), kp.secret_key.begin());
    std::copy(kp.public_key.begin(), kp.public_key.end(), kp.secret_key.begin() + 32);
  }
  return kp;
}

namespace {

Signature fast_mac(const PublicKey& key, std::span<const std::uint8_t> message) {
  Signature sig{};
  crypto_generichash(sig.data(), sig.size(), message.data(), message.size(), key.data(),
                     key.size());
  return sig;
}

}  // namespace

Signature sign(SignatureScheme scheme, const KeyPair& key, std::span<const std::uint8_t> message) {
  ensure_sodium();
  if (scheme == SignatureScheme::FastMac) return fast_mac(key.public_key, message);
  Signature sig{};
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), key.secret_key.data());
  return sig;
}

namespace {

struct DigestHasher {
  std::size_t operator()(const Hash32& h) const {
    std::size_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | h[i];
    return v;
  }
};

// Only successful Ed25519 verifications are remembered, so a hit can never
// turn a bad signature into a good one.
constexpr std::size_t kVerifiedCacheLimit = 1 << 20;

}  // namespace

bool verify(SignatureScheme scheme, const PublicKey& key, std::span<const std::uint8_t> message,
            const Signature& signature) {
  ensure_sodium();
  if (scheme == SignatureScheme::FastMac) {
    const Signature expected = fast_mac(key, message);
    return sodium_memcmp(expected.data(), signature.data(), expected.size()) == 0;
  }
  thread_local std::unordered_set<Hash32, DigestHasher> verified;
  ByteWriter w;
  w.raw(key).raw(signature).raw(message);
  const Hash32 memo = sha256(w.bytes());
  if (verified.count(memo) != 0) return true;
  const bool ok = crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                              key.data()) == 0;
  if (ok) {
    if (verified.size() >= kVerifiedCacheLimit) verified.clear();
    verified.insert(memo);
  }
  return ok;
}

}  // namespace distb
