#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "attestgate/bytes.hpp"
#include "attestgate/canonical.hpp"
#include "attestgate/cfg.hpp"
#include "attestgate/crypto.hpp"

namespace attestgate {

// ---------------------------------------------------------------------------
// Firmware

/// A named piece of firmware. The content digest is computed on construction
/// and whenever the content is replaced, so it always equals sha256(content).
class Component {
 public:
  Component() : digest_(sha256(Bytes{})) {}
  Component(std::string name, Bytes content) : name(std::move(name)) { set_content(std::move(content)); }

  std::string name;
  std::optional<ControlFlowGraph> cfg;
  std::optional<std::string> supplier;

  const Bytes& content() const { return content_; }
  const Digest& digest() const { return digest_; }
  void set_content(Bytes content) {
    content_ = std::move(content);
    digest_ = sha256(content_);
  }
  bool digest_ok() const { return digest_ == sha256(content_); }

 private:
  Bytes content_;
  Digest digest_{};
};

/// Components are kept in boot order (manifest order). Canonical consumers
/// (hashing, inspection, certificates) sort by name themselves.
struct FirmwareBundle {
  std::string name;
  std::string version;
  std::string device_class;
  std::vector<Component> components;

  const Component* find(std::string_view component) const;
};

/// Throws Errc::DuplicateComponentName.
void check_unique_names(const FirmwareBundle& bundle);

// ---------------------------------------------------------------------------
// Digests

struct ComponentDigest {
  std::string name;
  Digest digest{};
  friend bool operator==(const ComponentDigest&, const ComponentDigest&) = default;
};

struct SoftwareDigest {
  std::vector<ComponentDigest> components;  // sorted by name
  Digest aggregate{};
  friend bool operator==(const SoftwareDigest&, const SoftwareDigest&) = default;
};

/// Sorts by name, rejects duplicates, and sets
/// aggregate = sha256(canonical_encode([{digest, name}, ...])).
SoftwareDigest make_software_digest(std::vector<ComponentDigest> components);

SoftwareDigest hash_bundle(const FirmwareBundle& bundle);

// ---------------------------------------------------------------------------
// Inspection results

enum class Verdict { Clean, Grey, BackdoorFound };

std::string_view to_string(Verdict v);
Verdict verdict_from_string(std::string_view s);

struct VerdictCuts {
  double grey = 0.3;
  double backdoor = 0.8;

  Verdict classify(double score) const {
    if (score >= backdoor) return Verdict::BackdoorFound;
    if (score >= grey) return Verdict::Grey;
    return Verdict::Clean;
  }
};

struct Finding {
  std::string component;
  std::string location;
  std::string kind;
  std::string detail;
  double weight = 0.0;
  friend bool operator==(const Finding&, const Finding&) = default;
};

struct InspectionEntry {
  std::string algorithm;
  Json parameters = Json::object();
  std::set<std::string> backdoor_types;
  std::vector<std::string> component_scope;  // sorted
  double score = 0.0;
  Verdict verdict = Verdict::Clean;
  std::vector<Finding> findings;
  /// Aggregate digest of the scoped components; binds the entry to the bytes
  /// it was computed from.
  Digest scope_digest{};

  friend bool operator==(const InspectionEntry&, const InspectionEntry&) = default;
};

// ---------------------------------------------------------------------------
// Certificates

struct SupplyChainEntry {
  std::string component;
  std::string supplier;
  friend bool operator==(const SupplyChainEntry&, const SupplyChainEntry&) = default;
};

struct CertificateBody {
  SoftwareDigest software_digest;
  std::string bundle_name;
  std::string bundle_version;
  std::string device_class;
  std::vector<InspectionEntry> inspection_entries;
  std::set<std::string> covered_backdoor_types;
  std::string inspector_org;
  std::optional<std::string> engineer;
  std::optional<std::vector<SupplyChainEntry>> supply_chain;
  std::int64_t issued_at = 0;
  std::optional<Digest> supersedes;

  friend bool operator==(const CertificateBody&, const CertificateBody&) = default;
};

struct SignedCertificate {
  CertificateBody body;
  Digest body_digest{};
  Signature signature{};
  std::string signer_key_id;

  friend bool operator==(const SignedCertificate&, const SignedCertificate&) = default;
};

struct VerifiedCertificate {
  CertificateBody body;
  std::string inspector_org;
  Digest body_digest{};
};

Digest body_digest(const CertificateBody& body);

/// Organisation name -> key id -> public key.
class TrustStore {
 public:
  /// Throws Errc::KeyFormat when key_id is already registered for org.
  void add(const std::string& org, const std::string& key_id, const PublicKey& key);
  const PublicKey* find(const std::string& org, const std::string& key_id) const;
  bool has_org(const std::string& org) const { return orgs_.contains(org); }
  const std::map<std::string, std::map<std::string, PublicKey>>& orgs() const { return orgs_; }

  static TrustStore from_json(const Json& j);
  Json to_json() const;

 private:
  std::map<std::string, std::map<std::string, PublicKey>> orgs_;
};

SignedCertificate sign_certificate(const CertificateBody& body, const SigningKey& key,
                                   const std::string& key_id);

/// Checks, in order: body digest recomputation (DigestMismatch), signer
/// registration for (inspector_org, key_id) (UnknownSigner), Ed25519
/// signature over the body digest (BadSignature).
VerifiedCertificate verify_certificate(const SignedCertificate& cert, const TrustStore& trust);

// ---------------------------------------------------------------------------
// JSON

void to_json(Json& j, const ComponentDigest& v);
void from_json(const Json& j, ComponentDigest& v);
void to_json(Json& j, const SoftwareDigest& v);
void from_json(const Json& j, SoftwareDigest& v);
void to_json(Json& j, const Finding& v);
void from_json(const Json& j, Finding& v);
void to_json(Json& j, const InspectionEntry& v);
void from_json(const Json& j, InspectionEntry& v);
void to_json(Json& j, const CertificateBody& v);
void from_json(const Json& j, CertificateBody& v);
void to_json(Json& j, const SignedCertificate& v);
void from_json(const Json& j, SignedCertificate& v);

/// Converts with nlohmann exceptions mapped to Errc::ParseError.
template <typename T>
T parse_as(const Json& j);

SignedCertificate parse_certificate(std::string_view text);

}  // namespace attestgate

#include "attestgate/error.hpp"

namespace attestgate {

template <typename T>
T parse_as(const Json& j) {
  try {
    return j.get<T>();
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
}

}  // namespace attestgate
