#include "attestgate/inspection.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <memory>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

constexpr const char* kGreyCut = "grey_cut";
constexpr const char* kBackdoorCut = "backdoor_cut";
constexpr const char* kPatterns = "patterns";
constexpr const char* kProfileDb = "profile_db_sha256";
constexpr const char* kAdvisoryDb = "advisory_db_sha256";

std::vector<Bytes> split_patterns(const std::string& joined) {
  std::vector<Bytes> out;
  std::size_t start = 0;
  while (start <= joined.size()) {
    auto end = joined.find(',', start);
    if (end == std::string::npos) end = joined.size();
    out.push_back(from_hex(std::string_view(joined).substr(start, end - start)));
    start = end + 1;
  }
  return out;
}

std::string join_patterns(const std::vector<Bytes>& patterns) {
  std::string out;
  for (const auto& p : patterns) out += (out.empty() ? "" : ",") + to_hex(p);
  return out;
}

void pin_digest(Json& params, const char* key, const std::string& actual) {
  if (!params.contains(key)) {
    params[key] = actual;
    return;
  }
  if (!params[key].is_string() || params[key].get<std::string>() != actual) {
    throw Error(Errc::BadParameters, std::string(key) + " does not match the loaded database");
  }
}

class CfgDetector : public Detector {
 public:
  DetectorResult run_component(const Component& c, const Json&, const InspectionContext&) const override {
    if (!c.cfg) return {};
    return analyze(*c.cfg, c.name);
  }

 protected:
  virtual DetectorResult analyze(const ControlFlowGraph& cfg, std::string_view component) const = 0;
};

class AuthBypassDetector final : public CfgDetector {
 public:
  std::string_view id() const override { return algorithm::kAuthBypass; }
  std::set<std::string> backdoor_types() const override { return {backdoor_type::kAuthBypass}; }

 protected:
  DetectorResult analyze(const ControlFlowGraph& cfg, std::string_view component) const override {
    return detect_auth_bypass(cfg, component);
  }
};

class StaticCompareDetector final : public CfgDetector {
 public:
  std::string_view id() const override { return algorithm::kStaticCompare; }
  std::set<std::string> backdoor_types() const override {
    return {backdoor_type::kHiddenCredential, backdoor_type::kHiddenFunctionality};
  }

 protected:
  DetectorResult analyze(const ControlFlowGraph& cfg, std::string_view component) const override {
    return score_static_compares(cfg, component);
  }
};

class CredentialScanDetector final : public Detector {
 public:
  std::string_view id() const override { return algorithm::kCredentialScan; }
  std::set<std::string> backdoor_types() const override { return {backdoor_type::kHiddenCredential}; }

  DetectorResult run_component(const Component& c, const Json& params, const InspectionContext&) const override {
    auto patterns = split_patterns(params.at(kPatterns).get<std::string>());
    return scan_credentials(c, patterns);
  }

 protected:
  void normalize_specific(Json& params, const InspectionContext& ctx) const override {
    if (!params.contains(kPatterns)) params[kPatterns] = join_patterns(ctx.credential_patterns);
    if (!params[kPatterns].is_string()) throw Error(Errc::BadParameters, "patterns must be a string");
    std::vector<Bytes> patterns;
    try {
      patterns = split_patterns(params[kPatterns].get<std::string>());
    } catch (const Error& e) {
      throw Error(Errc::BadParameters, std::string("patterns: ") + e.what());
    }
    for (const auto& p : patterns) {
      if (p.empty()) throw Error(Errc::BadParameters, "credential scan needs non-empty patterns");
    }
  }
};

class VulnLookupDetector final : public Detector {
 public:
  std::string_view id() const override { return algorithm::kVulnLookup; }
  std::set<std::string> backdoor_types() const override { return {backdoor_type::kKnownVulnerability}; }

  DetectorResult run_component(const Component& c, const Json&, const InspectionContext& ctx) const override {
    return vuln_lookup(c, ctx.advisories);
  }

 protected:
  void normalize_specific(Json& params, const InspectionContext& ctx) const override {
    pin_digest(params, kAdvisoryDb, ctx.advisory_db_sha256());
  }
};

class ProfileDeviationDetector final : public Detector {
 public:
  std::string_view id() const override { return algorithm::kProfileDeviation; }
  std::set<std::string> backdoor_types() const override { return {backdoor_type::kHiddenFunctionality}; }
  bool component_local() const override { return false; }

  DetectorResult run_bundle(const FirmwareBundle& bundle, const Json&, const InspectionContext& ctx) const override {
    const auto* profile = ctx.profile_for(bundle.device_class);
    if (profile == nullptr) {
      throw Error(Errc::ProfileMismatch, "no profile for device class '" + bundle.device_class + "'");
    }
    return profile_deviation(bundle, extract_capabilities(bundle, ctx.capability_signatures), *profile);
  }

 protected:
  void normalize_specific(Json& params, const InspectionContext& ctx) const override {
    pin_digest(params, kProfileDb, ctx.profile_db_sha256());
  }
};

const std::map<std::string, std::unique_ptr<Detector>, std::less<>>& registry() {
  static const auto detectors = [] {
    std::map<std::string, std::unique_ptr<Detector>, std::less<>> m;
    auto add = [&](std::unique_ptr<Detector> d) { m.emplace(std::string(d->id()), std::move(d)); };
    add(std::make_unique<AuthBypassDetector>());
    add(std::make_unique<StaticCompareDetector>());
    add(std::make_unique<CredentialScanDetector>());
    add(std::make_unique<ProfileDeviationDetector>());
    add(std::make_unique<VulnLookupDetector>());
    return m;
  }();
  return detectors;
}

std::vector<const Component*> sorted_components(const FirmwareBundle& bundle) {
  std::vector<const Component*> out;
  for (const auto& c : bundle.components) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->name < b->name; });
  return out;
}

std::vector<std::string> component_names(const FirmwareBundle& bundle) {
  std::vector<std::string> names;
  for (auto* c : sorted_components(bundle)) names.push_back(c->name);
  return names;
}

InspectionEntry make_entry(const Detector& d, const Json& params, const FirmwareBundle& bundle) {
  InspectionEntry e;
  e.algorithm = std::string(d.id());
  e.parameters = params;
  e.backdoor_types = d.backdoor_types();
  e.component_scope = component_names(bundle);
  e.scope_digest = hash_bundle(bundle).aggregate;
  return e;
}

void finish_entry(InspectionEntry& e) {
  e.score = std::clamp(e.score, 0.0, 1.0);
  e.verdict = cuts_from(e.parameters).classify(e.score);
}

bool same_component(const Component& a, const Component& b) {
  return a.digest() == b.digest() && a.cfg == b.cfg;
}

}  // namespace

// --- suite & context ----------------------------------------------------------

std::vector<SuiteItem> default_suite() {
  std::vector<SuiteItem> suite;
  for (auto id : {algorithm::kAuthBypass, algorithm::kStaticCompare, algorithm::kCredentialScan,
                  algorithm::kProfileDeviation, algorithm::kVulnLookup}) {
    suite.push_back({std::string(id), Json::object()});
  }
  return suite;
}

std::vector<SuiteItem> parse_suite(const Json& j) {
  std::vector<SuiteItem> suite;
  try {
    for (const auto& item : j) {
      suite.push_back({item.at("algorithm").get<std::string>(), item.value("parameters", Json::object())});
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("suite: ") + e.what());
  }
  return suite;
}

InspectionContext InspectionContext::defaults() {
  InspectionContext ctx;
  for (auto p : {"admin_password=", "root:toor", "debug_magic_key"}) ctx.credential_patterns.push_back(to_bytes(p));
  ctx.capability_signatures = {
      {"http-server", to_bytes("HTTP/1.1")},   {"telnet-shell", to_bytes("telnetd")},
      {"remote-debug", to_bytes("gdbserver")}, {"raw-socket-shell", to_bytes("/bin/sh -i")},
      {"rtsp-stream", to_bytes("RTSP/1.0")},   {"dhcp-server", to_bytes("DHCPOFFER")},
      {"ssh-server", to_bytes("SSH-2.0")},
  };
  ctx.profiles = {
      {"web-server", {"http-server"}, {"telnet-shell", "remote-debug", "raw-socket-shell"}},
      {"ip-camera", {"rtsp-stream"}, {"telnet-shell", "remote-debug", "raw-socket-shell"}},
      {"router", {"dhcp-server"}, {"remote-debug", "raw-socket-shell"}},
  };
  return ctx;
}

Json InspectionContext::profile_db_json() const {
  Json signatures = Json::object();
  for (const auto& [cap, sig] : capability_signatures) signatures[cap] = to_hex(sig);
  Json profile_list = Json::array();
  for (const auto& p : profiles) profile_list.push_back(p);
  return {{"profiles", profile_list}, {"capability_signatures", signatures}};
}

std::string InspectionContext::profile_db_sha256() const {
  return to_hex(sha256(canonical_encode(profile_db_json())));
}

std::string InspectionContext::advisory_db_sha256() const {
  return to_hex(sha256(canonical_encode(advisories.to_json())));
}

const DeviceClassProfile* InspectionContext::profile_for(std::string_view device_class) const {
  auto it = std::find_if(profiles.begin(), profiles.end(),
                         [&](const auto& p) { return p.class_name == device_class; });
  return it == profiles.end() ? nullptr : &*it;
}

// --- detector base --------------------------------------------------------------

Json Detector::normalize(const Json& parameters, const InspectionContext& ctx) const {
  if (!parameters.is_object()) throw Error(Errc::BadParameters, "parameters must be an object");
  Json out = parameters;
  for (const auto& [key, value] : out.items()) {
    if (!(value.is_string() || value.is_number() || value.is_boolean())) {
      throw Error(Errc::BadParameters, "parameter '" + key + "' must be a scalar");
    }
  }
  if (!out.contains(kGreyCut)) out[kGreyCut] = VerdictCuts{}.grey;
  if (!out.contains(kBackdoorCut)) out[kBackdoorCut] = VerdictCuts{}.backdoor;
  if (!out[kGreyCut].is_number() || !out[kBackdoorCut].is_number()) {
    throw Error(Errc::BadParameters, "verdict cut points must be numbers");
  }
  auto cuts = cuts_from(out);
  if (!(cuts.grey >= 0.0 && cuts.grey < cuts.backdoor && cuts.backdoor <= 1.0)) {
    throw Error(Errc::BadParameters, "verdict cut points must satisfy 0 <= grey_cut < backdoor_cut <= 1");
  }
  normalize_specific(out, ctx);
  for (const auto& [key, value] : out.items()) {
    if (key == kGreyCut || key == kBackdoorCut) continue;
    bool specific = (key == kPatterns && id() == algorithm::kCredentialScan) ||
                    (key == kProfileDb && id() == algorithm::kProfileDeviation) ||
                    (key == kAdvisoryDb && id() == algorithm::kVulnLookup);
    if (!specific) throw Error(Errc::BadParameters, "unknown parameter '" + key + "' for " + std::string(id()));
  }
  return out;
}

void Detector::normalize_specific(Json&, const InspectionContext&) const {}

DetectorResult Detector::run_component(const Component&, const Json&, const InspectionContext&) const {
  throw Error(Errc::UnknownAlgorithm, std::string(id()) + " has no per-component mode");
}

DetectorResult Detector::run_bundle(const FirmwareBundle& bundle, const Json& parameters,
                                    const InspectionContext& ctx) const {
  DetectorResult result;
  for (auto* c : sorted_components(bundle)) {
    auto part = run_component(*c, parameters, ctx);
    result.score = std::max(result.score, part.score);
    for (auto& f : part.findings) result.findings.push_back(std::move(f));
  }
  return result;
}

const Detector& find_detector(std::string_view id) {
  const auto& reg = registry();
  auto it = reg.find(id);
  if (it == reg.end()) throw Error(Errc::UnknownAlgorithm, "unknown algorithm '" + std::string(id) + "'");
  return *it->second;
}

std::vector<std::string> known_algorithms() {
  std::vector<std::string> ids;
  for (const auto& [id, d] : registry()) ids.push_back(id);
  return ids;
}

VerdictCuts cuts_from(const Json& params) {
  return {params.value(kGreyCut, VerdictCuts{}.grey), params.value(kBackdoorCut, VerdictCuts{}.backdoor)};
}

Digest scope_digest(const FirmwareBundle& bundle, const std::vector<std::string>& scope) {
  std::vector<ComponentDigest> parts;
  for (const auto& name : scope) {
    const auto* c = bundle.find(name);
    if (c == nullptr) throw Error(Errc::DigestMismatch, "component '" + name + "' is not part of the bundle");
    parts.push_back({c->name, c->digest()});
  }
  return make_software_digest(std::move(parts)).aggregate;
}

// --- operations -------------------------------------------------------------------

std::vector<InspectionEntry> run_inspection(const FirmwareBundle& bundle, const std::vector<SuiteItem>& suite,
                                            const InspectionContext& ctx, InspectionStats* stats) {
  check_unique_names(bundle);
  std::vector<InspectionEntry> entries;
  for (const auto& item : suite) {
    const auto& detector = find_detector(item.algorithm);
    auto params = detector.normalize(item.parameters, ctx);
    auto entry = make_entry(detector, params, bundle);
    if (detector.component_local()) {
      for (auto* c : sorted_components(bundle)) {
        auto part = detector.run_component(*c, params, ctx);
        if (stats) ++stats->detector_runs;
        entry.score = std::max(entry.score, part.score);
        for (auto& f : part.findings) entry.findings.push_back(std::move(f));
      }
    } else {
      auto result = detector.run_bundle(bundle, params, ctx);
      if (stats) ++stats->detector_runs;
      entry.score = result.score;
      entry.findings = std::move(result.findings);
    }
    finish_entry(entry);
    entries.push_back(std::move(entry));
  }
  return entries;
}

SignedCertificate issue_certificate(const FirmwareBundle& bundle, const std::vector<InspectionEntry>& entries,
                                    const std::string& inspector_org, const SigningKey& key,
                                    const std::string& key_id, const IssueOptions& options) {
  for (const auto& e : entries) {
    if (scope_digest(bundle, e.component_scope) != e.scope_digest) {
      throw Error(Errc::DigestMismatch, "entry for " + e.algorithm + " was not computed from this bundle");
    }
  }
  CertificateBody body;
  body.software_digest = hash_bundle(bundle);
  body.bundle_name = bundle.name;
  body.bundle_version = bundle.version;
  body.device_class = bundle.device_class;
  body.inspection_entries = entries;
  for (const auto& e : entries) body.covered_backdoor_types.insert(e.backdoor_types.begin(), e.backdoor_types.end());
  body.inspector_org = inspector_org;
  body.engineer = options.engineer;
  if (options.include_supply_chain) {
    std::vector<SupplyChainEntry> chain;
    for (auto* c : sorted_components(bundle)) {
      if (c->supplier) chain.push_back({c->name, *c->supplier});
    }
    body.supply_chain = std::move(chain);
  }
  body.issued_at = options.issued_at.value_or(
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch()).count());
  body.supersedes = options.supersedes;
  return sign_certificate(body, key, key_id);
}

std::vector<InspectionEntry> reinspect_updated(const FirmwareBundle& old_bundle, const FirmwareBundle& new_bundle,
                                               const std::vector<InspectionEntry>& old_entries,
                                               const std::vector<SuiteItem>& suite, const InspectionContext& ctx,
                                               InspectionStats* stats) {
  check_unique_names(new_bundle);
  for (const auto& e : old_entries) {
    if (scope_digest(old_bundle, e.component_scope) != e.scope_digest) {
      throw Error(Errc::DigestMismatch, "previous entry for " + e.algorithm + " does not match the old bundle");
    }
  }

  std::set<std::string> unchanged;
  for (const auto& c : new_bundle.components) {
    const auto* before = old_bundle.find(c.name);
    if (before != nullptr && same_component(*before, c)) unchanged.insert(c.name);
  }

  std::vector<InspectionEntry> entries;
  for (const auto& item : suite) {
    const auto& detector = find_detector(item.algorithm);
    auto params = detector.normalize(item.parameters, ctx);
    auto entry = make_entry(detector, params, new_bundle);

    if (!detector.component_local()) {
      auto result = detector.run_bundle(new_bundle, params, ctx);
      if (stats) ++stats->detector_runs;
      entry.score = result.score;
      entry.findings = std::move(result.findings);
      finish_entry(entry);
      entries.push_back(std::move(entry));
      continue;
    }

    auto previous = std::find_if(old_entries.begin(), old_entries.end(), [&](const InspectionEntry& e) {
      return e.algorithm == entry.algorithm && e.parameters == params;
    });
    for (auto* c : sorted_components(new_bundle)) {
      bool carry = previous != old_entries.end() && unchanged.contains(c->name) &&
                   std::find(previous->component_scope.begin(), previous->component_scope.end(), c->name) !=
                       previous->component_scope.end();
      if (carry) {
        for (const auto& f : previous->findings) {
          if (f.component != c->name) continue;
          entry.score = std::max(entry.score, f.weight);
          entry.findings.push_back(f);
        }
        continue;
      }
      auto part = detector.run_component(*c, params, ctx);
      if (stats) ++stats->detector_runs;
      entry.score = std::max(entry.score, part.score);
      for (auto& f : part.findings) entry.findings.push_back(std::move(f));
    }
    finish_entry(entry);
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace attestgate
