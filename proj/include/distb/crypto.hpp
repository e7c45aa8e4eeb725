#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace distb {

using Hash32 = std::array<std::uint8_t, 32>;
using PublicKey = std::array<std::uint8_t, 32>;
using Signature = std::array<std::uint8_t, 64>;
using Bytes = std::vector<std::uint8_t>;

Hash32 sha256(std::span<const std::uint8_t> data);
std::string to_hex(std::span<const std::uint8_t> data);

/// Appends fixed-width big-endian fields to a byte string.
class ByteWriter {
 public:
  ByteWriter& u8(std::uint8_t v) {
    out_.push_back(v);
    return *this;
  }
  ByteWriter& u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
    return *this;
  }
  ByteWriter& raw(std::span<const std::uint8_t> data) {
    out_.insert(out_.end(), data.begin(), data.end());
    return *this;
  }
  Bytes take() { return std::move(out_); }
  const Bytes& bytes() const { return out_; }

 private:
  Bytes out_;
};

/// Reads fields written by ByteWriter; throws std::out_of_range on underrun.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8();
  std::uint64_t u64();
  template <std::size_t N>
  std::array<std::uint8_t, N> fixed() {
    std::array<std::uint8_t, N> out{};
    need(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = data_[pos_ + i];
    pos_ += N;
    return out;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

/// Ed25519 is the faithful scheme. FastMac is a keyed BLAKE2b-512 over the
/// message with the public key as key: same sizes and verify contract,
/// roughly two orders of magnitude cheaper, no unforgeability.
enum class SignatureScheme { Ed25519, FastMac };

struct KeyPair {
  PublicKey public_key{};
  std::array<std::uint8_t, 64> secret_key{};
};

KeyPair derive_keypair(SignatureScheme scheme, const std::array<std::uint8_t, 32>& seed);
Signature sign(SignatureScheme scheme, const KeyPair& key, std::span<const std::uint8_t> message);
bool verify(SignatureScheme scheme, const PublicKey& key, std::span<const std::uint8_t> message,
            const Signature& signature);

}  // namespace distb
