#include <doctest.h>

#include <string>

#include "distb/crypto.hpp"
#include "distb/kernel.hpp"
#include "golden_values.hpp"
#include "support/ref_sha256.hpp"

using namespace distb;

namespace {

Bytes from_hex(const std::string& hex) {
  Bytes out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    out.push_back(static_cast<std::uint8_t>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

Bytes text(const std::string& s) { return Bytes(s.begin(), s.end()); }

}  // namespace

TEST_CASE("sha256 of the empty string") {
  CHECK(to_hex(sha256({})) == golden::kSha256Empty);
  CHECK(to_hex(sha256(Bytes(88, 0))) == golden::kZeroHeaderHash);
}

TEST_CASE("sha256 agrees with the reference implementation") {
  RngStream r(5, 5);
  for (std::size_t len : {0u, 1u, 55u, 56u, 63u, 64u, 65u, 119u, 128u, 1000u}) {
    Bytes data(len);
    for (auto& b : data) b = static_cast<std::uint8_t>(r.next_u64());
    CHECK(sha256(data) == ref::sha256(data));
  }
}

TEST_CASE("byte reader round trip and underrun") {
  ByteWriter w;
  w.u64(0x0102030405060708ULL).u8(9).raw(Bytes{1, 2, 3});
  const Bytes b = w.take();
  CHECK(b.size() == 12);
  CHECK(b[0] == 1);
  CHECK(b[7] == 8);
  ByteReader r(b);
  CHECK(r.u64() == 0x0102030405060708ULL);
  CHECK(r.u8() == 9);
  CHECK(r.fixed<3>() == std::array<std::uint8_t, 3>{1, 2, 3});
  CHECK(r.done());
  CHECK_THROWS_AS(r.u8(), std::out_of_range);
}

TEST_CASE("ed25519 matches the published test vector") {
  std::array<std::uint8_t, 32> seed{};
  const Bytes s = from_hex("9d61b19deffd5a60ba844af492ec2cc44449c5697b326919703bac031cae7f60");
  std::copy(s.begin(), s.end(), seed.begin());
  const KeyPair kp = derive_keypair(SignatureScheme::Ed25519, seed);
  CHECK(to_hex(kp.public_key) == "d75a980182b10ab7d54bfed3c964073a0ee172f3daa62325af021a68f707511a");
  const Signature sig = sign(SignatureScheme::Ed25519, kp, {});
  CHECK(to_hex(sig) ==
        "e5564300c360ac729086e2cc806e828a84877f1eb8e5d974d873e065224901555fb8821590a33bacc61e39"
        "701cf9b46bd25bf5f0595bbe24655141438e7a100b");
  CHECK(verify(SignatureScheme::Ed25519, kp.public_key, {}, sig));
}

TEST_CASE("signatures reject any change") {
  for (auto scheme : {SignatureScheme::Ed25519, SignatureScheme::FastMac}) {
    std::array<std::uint8_t, 32> seed{};
    seed[0] = 1;
    const KeyPair kp = derive_keypair(scheme, seed);
    seed[0] = 2;
    const KeyPair other = derive_keypair(scheme, seed);
    const Bytes msg = text("sensor reading 17");
    Signature sig = sign(scheme, kp, msg);
    CHECK(verify(scheme, kp.public_key, msg, sig));
    CHECK(verify(scheme, kp.public_key, msg, sig));
    CHECK_FALSE(verify(scheme, other.public_key, msg, sig));
    Bytes changed = msg;
    changed[3] ^= 1;
    CHECK_FALSE(verify(scheme, kp.public_key, changed, sig));
    sig[10] ^= 0x40;
    CHECK_FALSE(verify(scheme, kp.public_key, msg, sig));
  }
}

TEST_CASE("key derivation is deterministic") {
  std::array<std::uint8_t, 32> seed{};
  seed[5] = 77;
  CHECK(derive_keypair(SignatureScheme::Ed25519, seed).public_key ==
        derive_keypair(SignatureScheme::Ed25519, seed).public_key);
  CHECK(derive_keypair(SignatureScheme::FastMac, seed).public_key == sha256(seed));
}
