#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>

#include "attestgate/bytes.hpp"

namespace attestgate {

Digest sha256(std::span<const std::uint8_t> data);
inline Digest sha256(std::string_view data) { return sha256(as_bytes(data)); }

using Signature = std::array<std::uint8_t, 64>;

struct PublicKey {
  std::array<std::uint8_t, 32> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static PublicKey from_hex(std::string_view hex);

  friend bool operator==(const PublicKey&, const PublicKey&) = default;
};

/// Ed25519 signing key, held as its 32-byte seed.
class SigningKey {
 public:
  static SigningKey generate();
  static SigningKey from_seed(std::span<const std::uint8_t> seed);
  static SigningKey from_seed_hex(std::string_view hex);

  const PublicKey& public_key() const { return public_; }
  std::string seed_hex() const { return to_hex(seed_); }

  Signature sign(std::span<const std::uint8_t> message) const;

 private:
  std::array<std::uint8_t, 32> seed_{};
  std::array<std::uint8_t, 64> secret_{};
  PublicKey public_;
};

bool verify_signature(const PublicKey& key, std::span<const std::uint8_t> message,
                      std::span<const std::uint8_t> signature);

Signature signature_from_hex(std::string_view hex);

void random_fill(std::span<std::uint8_t> out);
Digest random_digest();

std::string base64_encode(std::span<const std::uint8_t> data);
Bytes base64_decode(std::string_view text);

}  // namespace attestgate
