#pragma once

#include <cstdio>
#include <filesystem>
#include <map>
#include <shared_mutex>
#include <string>
#include <vector>

#include "attestgate/model.hpp"

namespace attestgate {

enum class PutStatus { Stored, Duplicate };

/// Certificates indexed by software aggregate digest, persisted as an
/// append-only JSON-lines journal of canonical-encoded signed certificates.
/// Every record is verified against the store's trust store before it is
/// written; the journal is fsync'ed before put() returns.
///
/// Reads take a shared lock, writes an exclusive one, so readers never see a
/// half-applied put.
class CertificateStore {
 public:
  /// Loads and compacts the journal (creating it when absent).
  /// Throws Errc::CorruptStore on an unparsable record.
  CertificateStore(std::filesystem::path journal, TrustStore trust);
  ~CertificateStore();

  CertificateStore(const CertificateStore&) = delete;
  CertificateStore& operator=(const CertificateStore&) = delete;

  /// Throws UnknownSigner / DigestMismatch / BadSignature (nothing stored)
  /// or StorageFailure.
  PutStatus put(const SignedCertificate& cert);

  /// Newest issued_at first; ties by body digest.
  std::vector<SignedCertificate> get(const Digest& aggregate) const;

  std::size_t size() const;
  void flush();

  const TrustStore& trust() const { return trust_; }

 private:
  void append_line(const std::string& line);

  std::filesystem::path path_;
  TrustStore trust_;
  mutable std::shared_mutex mutex_;
  std::map<Digest, std::vector<SignedCertificate>> by_aggregate_;
  std::map<Digest, Digest> seen_;  // body digest -> aggregate
  std::vector<std::string> unverifiable_;  // kept in the journal, never served
  std::FILE* journal_ = nullptr;
};

}  // namespace attestgate
