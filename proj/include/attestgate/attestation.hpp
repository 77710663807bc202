#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "attestgate/model.hpp"

namespace attestgate {

struct MeasurementEvent {
  std::string name;
  Digest digest{};
  friend bool operator==(const MeasurementEvent&, const MeasurementEvent&) = default;
};

using MeasurementLog = std::vector<MeasurementEvent>;

/// pcr' = sha256(pcr || event_digest)
Digest extend_register(const Digest& pcr, const Digest& event_digest);

/// Folds extend_register over the log starting from 32 zero bytes.
Digest replay_log(const MeasurementLog& log);

struct BootMeasurement {
  MeasurementLog log;
  Digest pcr{};
};

/// One event per component in boot order. Throws Errc::EmptyBundle.
BootMeasurement measure_boot(const FirmwareBundle& bundle);

struct AttestationQuote {
  Digest pcr{};
  Digest nonce{};
  MeasurementLog log;
  std::string device_id;
  Signature signature{};

  friend bool operator==(const AttestationQuote&, const AttestationQuote&) = default;
};

/// The signed payload: canonical_encode({device_id, log, nonce, pcr}).
Bytes quote_payload(const AttestationQuote& quote);

/// Digest identifying a quote for audit records.
Digest quote_digest(const AttestationQuote& quote);

struct DeviceIdentity {
  std::string device_id;
  SigningKey key;

  static DeviceIdentity from_json(const Json& j);
  Json to_json() const;
};

AttestationQuote generate_quote(const BootMeasurement& boot, const DeviceIdentity& identity, const Digest& nonce);

class DeviceRegistry {
 public:
  void enroll(const std::string& device_id, const PublicKey& key) { keys_[device_id] = key; }
  const PublicKey* find(const std::string& device_id) const;

  static DeviceRegistry from_json(const Json& j);
  Json to_json() const;

 private:
  std::map<std::string, PublicKey> keys_;
};

/// Checks nonce equality, the device signature, and that the pcr replays
/// from the log; returns the software digest rebuilt from the log events,
/// which is the certificate lookup key. Throws NonceMismatch, UnknownDevice,
/// BadSignature, LogPcrMismatch or EmptyLog.
SoftwareDigest verify_quote(const AttestationQuote& quote, const Digest& expected_nonce,
                            const DeviceRegistry& registry);

/// Single-use challenge nonces with a fixed lifetime. Thread-safe.
class NonceTracker {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit NonceTracker(std::chrono::seconds ttl = std::chrono::minutes(5), Clock clock = {});

  Digest issue();
  /// True exactly once for an issued, unexpired nonce.
  bool consume(const Digest& nonce);
  std::size_t outstanding() const;

 private:
  void expire_locked(std::chrono::steady_clock::time_point now);

  std::chrono::seconds ttl_;
  Clock clock_;
  mutable std::mutex mutex_;
  std::map<Digest, std::chrono::steady_clock::time_point> issued_;
};

void to_json(Json& j, const MeasurementEvent& e);
void from_json(const Json& j, MeasurementEvent& e);

}  // namespace attestgate
