#include "attestgate/crypto.hpp"

#include <sodium.h>

#include <algorithm>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

void ensure_sodium() {
  static const bool ready = [] { return sodium_init() >= 0; }();
  if (!ready) {
    throw Error(Errc::Io, "libsodium initialisation failed");
  }
}

}  // namespace

Digest sha256(std::span<const std::uint8_t> data) {
  ensure_sodium();
  Digest out;
  crypto_hash_sha256(out.data(), data.data(), data.size());
  return out;
}

PublicKey PublicKey::from_hex(std::string_view hex) {
  auto raw = attestgate::from_hex(hex);
  if (raw.size() != crypto_sign_PUBLICKEYBYTES) {
    throw Error(Errc::KeyFormat, "public key must be 32 bytes");
  }
  PublicKey pk;
  std::copy(raw.begin(), raw.end(), pk.bytes.begin());
  return pk;
}

SigningKey SigningKey::generate() {
  std::array<std::uint8_t, 32> seed;
  random_fill(seed);
  return from_seed(seed);
}

SigningKey SigningKey::from_seed(std::span<const std::uint8_t> seed) {
  ensure_sodium();
  if (seed.size() != crypto_sign_SEEDBYTES) {
    throw Error(Errc::KeyFormat, "signing key seed must be 32 bytes");
  }
  SigningKey key;
  std::copy(seed.begin(), seed.end(), key.seed_.begin());
  crypto_sign_seed_keypair(key.public_.bytes.data(), key.secret_.data(), key.seed_.data());
  return key;
}

SigningKey SigningKey::from_seed_hex(std::string_view hex) {
  try {
    return from_seed(attestgate::from_hex(hex));
  } catch (const Error& e) {
    throw Error(Errc::KeyFormat, e.what());
  }
}

Signature SigningKey::sign(std::span<const std::uint8_t> message) const {
  Signature sig;
  crypto_sign_detached(sig.data(), nullptr, message.data(), message.size(), secret_.data());
  return sig;
}

bool verify_signature(const PublicKey& key, std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> signature) {
  ensure_sodium();
  if (signature.size() != crypto_sign_BYTES) return false;
  return crypto_sign_verify_detached(signature.data(), message.data(), message.size(),
                                     key.bytes.data()) == 0;
}

Signature signature_from_hex(std::string_view hex) {
  auto raw = from_hex(hex);
  if (raw.size() != crypto_sign_BYTES) {
    throw Error(Errc::ParseError, "signature must be 64 bytes");
  }
  Signature sig;
  std::copy(raw.begin(), raw.end(), sig.begin());
  return sig;
}

void random_fill(std::span<std::uint8_t> out) {
  ensure_sodium();
  randombytes_buf(out.data(), out.size());
}

Digest random_digest() {
  Digest d;
  random_fill(d);
  return d;
}

std::string base64_encode(std::span<const std::uint8_t> data) {
  ensure_sodium();
  constexpr int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(data.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), data.data(), data.size(), variant);
  out.resize(out.size() - 1);  // trailing NUL
  return out;
}

Bytes base64_decode(std::string_view text) {
  ensure_sodium();
  Bytes out(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len,
                        nullptr, sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw Error(Errc::ParseError, "invalid base64 content");
  }
  out.resize(len);
  return out;
}

}  // namespace attestgate
