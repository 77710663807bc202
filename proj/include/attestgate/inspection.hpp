#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "attestgate/detectors.hpp"
#include "attestgate/model.hpp"

namespace attestgate {

namespace algorithm {
inline constexpr std::string_view kAuthBypass = "auth-bypass-reach@1";
inline constexpr std::string_view kStaticCompare = "static-compare-score@1";
inline constexpr std::string_view kCredentialScan = "credential-scan@1";
inline constexpr std::string_view kProfileDeviation = "profile-deviation@1";
inline constexpr std::string_view kVulnLookup = "vuln-lookup@1";
}  // namespace algorithm

namespace backdoor_type {
inline constexpr const char* kAuthBypass = "auth-bypass";
inline constexpr const char* kHiddenCredential = "hidden-credential";
inline constexpr const char* kHiddenFunctionality = "hidden-functionality";
inline constexpr const char* kKnownVulnerability = "known-vulnerability";
}  // namespace backdoor_type

struct SuiteItem {
  std::string algorithm;
  Json parameters = Json::object();
};

std::vector<SuiteItem> default_suite();
std::vector<SuiteItem> parse_suite(const Json& j);

/// Reference data the detectors consult. Its digests are recorded in entry
/// parameters so a verifier can pin the exact databases used.
struct InspectionContext {
  std::vector<Bytes> credential_patterns;
  std::vector<DeviceClassProfile> profiles;
  CapabilitySignatures capability_signatures;
  AdvisoryDb advisories;

  static InspectionContext defaults();

  Json profile_db_json() const;
  std::string profile_db_sha256() const;
  std::string advisory_db_sha256() const;
  const DeviceClassProfile* profile_for(std::string_view device_class) const;
};

struct InspectionStats {
  /// Number of detector invocations: one per (algorithm, component) for
  /// component-local detectors, one per algorithm for bundle-global ones.
  std::size_t detector_runs = 0;
};

class Detector {
 public:
  virtual ~Detector() = default;

  virtual std::string_view id() const = 0;
  virtual std::set<std::string> backdoor_types() const = 0;
  /// Component-local detectors decompose over components and report an
  /// entry score equal to the maximum finding weight.
  virtual bool component_local() const { return true; }

  /// Validates caller parameters and returns the complete recorded set with
  /// defaults filled in. Throws Errc::BadParameters.
  Json normalize(const Json& parameters, const InspectionContext& ctx) const;

  virtual DetectorResult run_component(const Component& component, const Json& parameters,
                                       const InspectionContext& ctx) const;
  virtual DetectorResult run_bundle(const FirmwareBundle& bundle, const Json& parameters,
                                    const InspectionContext& ctx) const;

 protected:
  virtual void normalize_specific(Json& parameters, const InspectionContext& ctx) const;
};

/// Throws Errc::UnknownAlgorithm.
const Detector& find_detector(std::string_view id);
std::vector<std::string> known_algorithms();

VerdictCuts cuts_from(const Json& normalized_parameters);

/// Aggregate digest over the named components of `bundle`.
/// Throws Errc::DigestMismatch when a name is not in the bundle.
Digest scope_digest(const FirmwareBundle& bundle, const std::vector<std::string>& scope);

std::vector<InspectionEntry> run_inspection(const FirmwareBundle& bundle, const std::vector<SuiteItem>& suite,
                                            const InspectionContext& ctx, InspectionStats* stats = nullptr);

struct IssueOptions {
  std::optional<std::string> engineer;
  bool include_supply_chain = false;
  std::optional<Digest> supersedes;
  std::optional<std::int64_t> issued_at;  // defaults to now
};

/// Throws Errc::DigestMismatch if any entry was not computed from `bundle`.
SignedCertificate issue_certificate(const FirmwareBundle& bundle, const std::vector<InspectionEntry>& entries,
                                    const std::string& inspector_org, const SigningKey& key,
                                    const std::string& key_id, const IssueOptions& options = {});

/// Re-runs detectors only on components whose name, content digest or
/// control-flow sidecar changed (or that are new); findings for unchanged
/// components are carried over from `old_entries`, findings for removed
/// components are dropped. Bundle-global detectors always re-run.
/// Throws Errc::DigestMismatch when old_entries do not match old_bundle.
std::vector<InspectionEntry> reinspect_updated(const FirmwareBundle& old_bundle, const FirmwareBundle& new_bundle,
                                               const std::vector<InspectionEntry>& old_entries,
                                               const std::vector<SuiteItem>& suite, const InspectionContext& ctx,
                                               InspectionStats* stats = nullptr);

}  // namespace attestgate
