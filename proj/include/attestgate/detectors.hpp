#pragma once

#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attestgate/cfg.hpp"
#include "attestgate/model.hpp"

namespace attestgate {

struct DetectorResult {
  double score = 0.0;
  std::vector<Finding> findings;
};

// --- authentication bypass --------------------------------------------------

struct BypassWitness {
  std::string privileged;
  std::vector<std::string> path;  // entry ... privileged, no auth-check node on it
};

/// Privileged nodes reachable from entry through nodes none of which is
/// labelled auth-check, each with a shortest witness path. Sorted by node id.
std::vector<BypassWitness> find_auth_bypasses(const ControlFlowGraph& cfg);

DetectorResult detect_auth_bypass(const ControlFlowGraph& cfg, std::string_view component = {});

// --- comparisons with static data -------------------------------------------

struct CompareSiteReport {
  std::string node;
  Bytes literal;
  std::vector<std::string> guarded;  // sorted node ids
  double weight = 0.0;
};

/// guarded(site) = nodes other than the site reachable from it that cannot be
/// reached from entry once the site node is removed. Computed from the
/// dominator tree: for a site reachable from entry this is the set of nodes
/// it strictly dominates.
std::vector<CompareSiteReport> analyze_static_compares(const ControlFlowGraph& cfg);

DetectorResult score_static_compares(const ControlFlowGraph& cfg, std::string_view component = {});

// --- hard-coded credentials --------------------------------------------------

/// Exact byte-substring search; overlapping occurrences are all reported.
/// Throws Errc::BadParameters on an empty pattern list or an empty pattern.
DetectorResult scan_credentials(const Component& component, std::span<const Bytes> patterns);

// --- device-class profile ----------------------------------------------------

struct DeviceClassProfile {
  std::string class_name;
  std::set<std::string> expected_capabilities;
  std::set<std::string> forbidden_capabilities;
};

using CapabilityMap = std::map<std::string, std::set<std::string>>;
using CapabilitySignatures = std::map<std::string, Bytes>;

/// A component exposes a capability when the capability's byte signature
/// occurs in its content.
CapabilityMap extract_capabilities(const FirmwareBundle& bundle, const CapabilitySignatures& signatures);

/// Throws Errc::ProfileMismatch when the profile is for another device class.
DetectorResult profile_deviation(const FirmwareBundle& bundle, const CapabilityMap& capabilities,
                                 const DeviceClassProfile& profile);

void to_json(Json& j, const DeviceClassProfile& p);
void from_json(const Json& j, DeviceClassProfile& p);

// --- known vulnerabilities ---------------------------------------------------

struct AdvisoryDb {
  std::map<Digest, std::vector<std::string>> advisories;

  static AdvisoryDb from_json(const Json& j);
  Json to_json() const;
};

DetectorResult vuln_lookup(const Component& component, const AdvisoryDb& db);
DetectorResult vuln_lookup(const FirmwareBundle& bundle, const AdvisoryDb& db);

}  // namespace attestgate
