#pragma once

#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "attestgate/model.hpp"

namespace attestgate {

namespace reason {
inline constexpr const char* kAttestation = "ATTESTATION";
inline constexpr const char* kNoCertificate = "NO_CERTIFICATE";
inline constexpr const char* kCertServerUnavailable = "CERT_SERVER_UNAVAILABLE";
inline constexpr const char* kCoverage = "COVERAGE";
inline constexpr const char* kAlgorithm = "ALGORITHM";
inline constexpr const char* kBackdoor = "BACKDOOR";
inline constexpr const char* kSupplier = "SUPPLIER";
inline constexpr const char* kEngineer = "ENGINEER";
}  // namespace reason

struct RequiredAlgorithm {
  std::string algorithm;
  /// Subset match against the parameters recorded in the certificate.
  Json parameters = Json::object();
};

struct MonitoringBand {
  double t_strict = 0.2;
  double t_lax = 0.8;
};

struct ObligationTemplates {
  MonitoringBand monitoring;
  std::string logging_level = "verbose";
  bool vlan_quarantine = false;
  std::optional<std::vector<std::string>> ip_allowlist;
  bool minimal_permissions = false;
};

struct SecurityPolicy {
  std::set<std::string> required_backdoor_types;
  std::vector<RequiredAlgorithm> required_algorithms;
  std::set<std::string> trusted_orgs;
  /// When set, every component must have a recorded supplier from this set.
  std::optional<std::set<std::string>> trusted_suppliers;
  double deny_threshold = 0.8;
  double grey_threshold = 0.3;
  ObligationTemplates obligations;
  bool require_engineer_record = false;

  /// Throws Errc::BadParameters unless 0 <= grey < deny <= 1 and
  /// 0 < t_strict < t_lax <= 1.
  void validate() const;

  static SecurityPolicy from_json(const Json& j);
  Json to_json() const;
};

struct Monitoring {
  double anomaly_threshold = 1.0;
};
struct DetailedLogging {
  std::string level;
};
struct NetworkIsolation {
  std::string directive;  // "vlan-quarantine" | "ip-allowlist"
  Json parameters = Json::object();
};
struct MinimalPermissions {
  std::string component;
};

using Obligation = std::variant<Monitoring, DetailedLogging, NetworkIsolation, MinimalPermissions>;

Json obligation_to_json(const Obligation& o);
Obligation obligation_from_json(const Json& j);

struct PolicyOutcome {
  enum class Kind { Pass, Grey, Fail };
  Kind kind = Kind::Pass;
  double grey_score = 0.0;
  std::vector<std::string> reasons;
  std::vector<std::string> grey_components;
};

/// Keeps certificates that verify against `trust`, come from a trusted
/// organisation and are not superseded by another such certificate; returns
/// the newest, ties broken by the smallest body digest.
std::optional<VerifiedCertificate> select_certificate(const std::vector<SignedCertificate>& certs,
                                                      const SecurityPolicy& policy, const TrustStore& trust);

/// Collects every violated check (COVERAGE, ALGORITHM, BACKDOOR, SUPPLIER,
/// ENGINEER); otherwise grey on the maximum entry score when it falls in
/// [grey_threshold, deny_threshold), else pass.
PolicyOutcome evaluate_policy(const CertificateBody& body, const SecurityPolicy& policy);

/// Monitoring threshold interpolates linearly from t_lax at grey_threshold
/// down towards t_strict at deny_threshold, followed by detailed logging and
/// the enabled isolation / minimal-permission templates.
/// Throws Errc::OutOfBand outside [grey_threshold, deny_threshold).
std::vector<Obligation> derive_obligations(double grey_score, const SecurityPolicy& policy,
                                           const std::vector<std::string>& grey_components = {});

}  // namespace attestgate
