#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "attestgate/attestation.hpp"
#include "attestgate/policy.hpp"
#include "attestgate/wire.hpp"

namespace attestgate {

enum class Outcome { Allow, AllowWithObligations, Deny };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);

struct Evidence {
  std::string device_id;
  std::optional<Digest> pcr;
  std::optional<Digest> quote_digest;
  std::optional<Digest> aggregate;
  std::optional<Digest> certificate;  // selected body digest
};

struct Decision {
  Outcome outcome = Outcome::Deny;
  std::vector<std::string> reasons;
  std::vector<Obligation> obligations;
  Evidence evidence;
  std::string detail;

  Json to_json() const;
  static Decision from_json(const Json& j);
};

struct AttestationResult {
  bool ok = false;
  std::string error;  // failure detail when !ok
  std::string device_id;
  Digest pcr{};
  Digest quote_digest{};
  SoftwareDigest software;
};

struct CertFetchResult {
  bool available = false;
  std::vector<SignedCertificate> certificates;
  std::string error;
};

/// JSON-lines decision log. Without a path it only keeps records in memory.
class AuditLog {
 public:
  AuditLog() = default;
  explicit AuditLog(const std::filesystem::path& path);
  ~AuditLog();
  AuditLog(const AuditLog&) = delete;
  AuditLog& operator=(const AuditLog&) = delete;

  void append(const Decision& decision);
  std::vector<Json> records() const;

 private:
  mutable std::mutex mutex_;
  std::FILE* file_ = nullptr;
  std::vector<Json> records_;
};

/// Deny[ATTESTATION] on a failed attestation, Deny[CERT_SERVER_UNAVAILABLE]
/// when certificates could not be fetched, Deny[NO_CERTIFICATE] when no
/// trusted, verified, unsuperseded certificate matches the attested digest,
/// Deny(reasons) on a policy failure, AllowWithObligations on grey, else
/// Allow. The decision is appended to `audit` before it is returned.
Decision decide_admission(const AttestationResult& attestation, const CertFetchResult& fetch,
                          const SecurityPolicy& policy, const TrustStore& trust, AuditLog* audit = nullptr);

using CertFetcher = std::function<std::vector<SignedCertificate>(const Digest& aggregate)>;

/// Verifier-side state shared by concurrent admission sessions.
class Verifier {
 public:
  Verifier(SecurityPolicy policy, TrustStore trust, DeviceRegistry registry, CertFetcher fetch,
           AuditLog& audit, std::chrono::seconds nonce_ttl = std::chrono::minutes(5));

  Digest challenge() { return nonces_.issue(); }

  /// Consumes the nonce; a second presentation of the same quote fails.
  AttestationResult check_quote(const AttestationQuote& quote, const Digest& expected_nonce);

  Decision admit(const AttestationQuote& quote, const Digest& expected_nonce);
  /// Records a Deny[ATTESTATION] for a session that never produced a quote.
  Decision reject_session(const std::string& detail);

  const SecurityPolicy& policy() const { return policy_; }

 private:
  SecurityPolicy policy_;
  TrustStore trust_;
  DeviceRegistry registry_;
  CertFetcher fetch_;
  AuditLog& audit_;
  NonceTracker nonces_;
};

/// Accepts prover connections: sends a challenge, reads the quote, decides,
/// and answers {"type":"decision","decision":{...}}.
class VerifierDaemon {
 public:
  VerifierDaemon(Verifier& verifier, const std::string& host, int port,
                 std::chrono::milliseconds session_timeout = std::chrono::milliseconds(10000));
  ~VerifierDaemon();

  int port() const { return listener_.port(); }
  void start();
  void run();
  void stop();

 private:
  void session(Socket sock);

  Verifier& verifier_;
  Listener listener_;
  std::chrono::milliseconds timeout_;
  std::thread acceptor_;
  std::mutex sessions_mutex_;
  std::condition_variable sessions_done_;
  std::size_t active_sessions_ = 0;
  std::atomic<bool> stopping_{false};
};

}  // namespace attestgate
