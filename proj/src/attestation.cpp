#include "attestgate/attestation.hpp"

#include <algorithm>
#include <cstring>

#include "attestgate/error.hpp"

namespace attestgate {

Digest extend_register(const Digest& pcr, const Digest& event_digest) {
  std::array<std::uint8_t, 64> buf;
  std::copy(pcr.begin(), pcr.end(), buf.begin());
  std::copy(event_digest.begin(), event_digest.end(), buf.begin() + 32);
  return sha256(buf);
}

Digest replay_log(const MeasurementLog& log) {
  Digest pcr = zero_digest();
  for (const auto& e : log) pcr = extend_register(pcr, e.digest);
  return pcr;
}

BootMeasurement measure_boot(const FirmwareBundle& bundle) {
  if (bundle.components.empty()) throw Error(Errc::EmptyBundle, "cannot boot an empty bundle");
  BootMeasurement boot;
  for (const auto& c : bundle.components) boot.log.push_back({c.name, c.digest()});
  boot.pcr = replay_log(boot.log);
  return boot;
}

void to_json(Json& j, const MeasurementEvent& e) { j = Json{{"name", e.name}, {"digest", to_hex(e.digest)}}; }

void from_json(const Json& j, MeasurementEvent& e) {
  e.name = j.at("name").get<std::string>();
  e.digest = digest_from_hex(j.at("digest").get<std::string>());
}

Bytes quote_payload(const AttestationQuote& quote) {
  return canonical_bytes({{"pcr", to_hex(quote.pcr)},
                          {"nonce", to_hex(quote.nonce)},
                          {"log", quote.log},
                          {"device_id", quote.device_id}});
}

Digest quote_digest(const AttestationQuote& quote) { return sha256(quote_payload(quote)); }

DeviceIdentity DeviceIdentity::from_json(const Json& j) {
  try {
    return {j.at("device_id").get<std::string>(), SigningKey::from_seed_hex(j.at("secret_seed_hex").get<std::string>())};
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("identity: ") + e.what());
  }
}

Json DeviceIdentity::to_json() const {
  return {{"device_id", device_id}, {"secret_seed_hex", key.seed_hex()}, {"public_key_hex", key.public_key().hex()}};
}

AttestationQuote generate_quote(const BootMeasurement& boot, const DeviceIdentity& identity, const Digest& nonce) {
  AttestationQuote quote;
  quote.pcr = boot.pcr;
  quote.nonce = nonce;
  quote.log = boot.log;
  quote.device_id = identity.device_id;
  quote.signature = identity.key.sign(quote_payload(quote));
  return quote;
}

const PublicKey* DeviceRegistry::find(const std::string& device_id) const {
  auto it = keys_.find(device_id);
  return it == keys_.end() ? nullptr : &it->second;
}

DeviceRegistry DeviceRegistry::from_json(const Json& j) {
  DeviceRegistry reg;
  try {
    for (const auto& [id, hex] : j.items()) reg.enroll(id, PublicKey::from_hex(hex.get<std::string>()));
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("device registry: ") + e.what());
  }
  return reg;
}

Json DeviceRegistry::to_json() const {
  Json j = Json::object();
  for (const auto& [id, key] : keys_) j[id] = key.hex();
  return j;
}

SoftwareDigest verify_quote(const AttestationQuote& quote, const Digest& expected_nonce,
                            const DeviceRegistry& registry) {
  if (quote.nonce != expected_nonce) throw Error(Errc::NonceMismatch, "quote does not echo the issued nonce");
  const auto* key = registry.find(quote.device_id);
  if (key == nullptr) throw Error(Errc::UnknownDevice, "device '" + quote.device_id + "' is not enrolled");
  if (!verify_signature(*key, quote_payload(quote), quote.signature)) {
    throw Error(Errc::BadSignature, "quote signature does not verify");
  }
  if (replay_log(quote.log) != quote.pcr) {
    throw Error(Errc::LogPcrMismatch, "measurement log does not replay to the quoted register");
  }
  if (quote.log.empty()) throw Error(Errc::EmptyLog, "quote carries an empty measurement log");

  std::vector<ComponentDigest> parts;
  for (const auto& e : quote.log) parts.push_back({e.name, e.digest});
  try {
    return make_software_digest(std::move(parts));
  } catch (const Error& e) {
    throw Error(Errc::LogPcrMismatch, std::string("inconsistent measurement log: ") + e.what());
  }
}

NonceTracker::NonceTracker(std::chrono::seconds ttl, Clock clock) : ttl_(ttl), clock_(std::move(clock)) {
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
}

Digest NonceTracker::issue() {
  auto nonce = random_digest();
  std::lock_guard lock(mutex_);
  auto now = clock_();
  expire_locked(now);
  issued_[nonce] = now + ttl_;
  return nonce;
}

bool NonceTracker::consume(const Digest& nonce) {
  std::lock_guard lock(mutex_);
  auto now = clock_();
  expire_locked(now);
  return issued_.erase(nonce) == 1;
}

std::size_t NonceTracker::outstanding() const {
  std::lock_guard lock(mutex_);
  return issued_.size();
}

void NonceTracker::expire_locked(std::chrono::steady_clock::time_point now) {
  std::erase_if(issued_, [&](const auto& kv) { return kv.second <= now; });
}

}  // namespace attestgate
