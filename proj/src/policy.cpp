#include "attestgate/policy.hpp"

#include <algorithm>

#include "attestgate/error.hpp"

namespace attestgate {

void SecurityPolicy::validate() const {
  if (!(deny_threshold > 0.0 && deny_threshold <= 1.0)) {
    throw Error(Errc::BadParameters, "deny_threshold must lie in (0,1]");
  }
  if (!(grey_threshold >= 0.0 && grey_threshold < deny_threshold)) {
    throw Error(Errc::BadParameters, "grey_threshold must lie in [0, deny_threshold)");
  }
  const auto& m = obligations.monitoring;
  if (!(m.t_strict > 0.0 && m.t_strict < m.t_lax && m.t_lax <= 1.0)) {
    throw Error(Errc::BadParameters, "monitoring band must satisfy 0 < t_strict < t_lax <= 1");
  }
  for (const auto& r : required_algorithms) {
    if (!r.parameters.is_object()) throw Error(Errc::BadParameters, "required parameters must be an object");
  }
}

SecurityPolicy SecurityPolicy::from_json(const Json& j) {
  SecurityPolicy p;
  try {
    p.required_backdoor_types = j.value("required_backdoor_types", std::set<std::string>{});
    for (const auto& r : j.value("required_algorithms", Json::array())) {
      p.required_algorithms.push_back({r.at("algorithm").get<std::string>(), r.value("parameters", Json::object())});
    }
    p.trusted_orgs = j.value("trusted_orgs", std::set<std::string>{});
    if (j.contains("trusted_suppliers") && !j["trusted_suppliers"].is_null()) {
      p.trusted_suppliers = j["trusted_suppliers"].get<std::set<std::string>>();
    }
    p.deny_threshold = j.value("deny_threshold", p.deny_threshold);
    p.grey_threshold = j.value("grey_threshold", p.grey_threshold);
    p.require_engineer_record = j.value("require_engineer_record", false);
    if (j.contains("obligations")) {
      const auto& o = j["obligations"];
      if (o.contains("monitoring")) {
        p.obligations.monitoring.t_strict = o["monitoring"].value("t_strict", p.obligations.monitoring.t_strict);
        p.obligations.monitoring.t_lax = o["monitoring"].value("t_lax", p.obligations.monitoring.t_lax);
      }
      p.obligations.logging_level = o.value("logging_level", p.obligations.logging_level);
      p.obligations.vlan_quarantine = o.value("vlan_quarantine", false);
      if (o.contains("ip_allowlist") && !o["ip_allowlist"].is_null()) {
        p.obligations.ip_allowlist = o["ip_allowlist"].get<std::vector<std::string>>();
      }
      p.obligations.minimal_permissions = o.value("minimal_permissions", false);
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("policy: ") + e.what());
  }
  p.validate();
  return p;
}

Json SecurityPolicy::to_json() const {
  Json algorithms = Json::array();
  for (const auto& r : required_algorithms) algorithms.push_back({{"algorithm", r.algorithm}, {"parameters", r.parameters}});
  Json obligation_json{{"monitoring", {{"t_strict", obligations.monitoring.t_strict}, {"t_lax", obligations.monitoring.t_lax}}},
                       {"logging_level", obligations.logging_level},
                       {"vlan_quarantine", obligations.vlan_quarantine},
                       {"minimal_permissions", obligations.minimal_permissions}};
  if (obligations.ip_allowlist) obligation_json["ip_allowlist"] = *obligations.ip_allowlist;
  Json j{{"required_backdoor_types", required_backdoor_types},
         {"required_algorithms", algorithms},
         {"trusted_orgs", trusted_orgs},
         {"deny_threshold", deny_threshold},
         {"grey_threshold", grey_threshold},
         {"obligations", obligation_json},
         {"require_engineer_record", require_engineer_record}};
  if (trusted_suppliers) j["trusted_suppliers"] = *trusted_suppliers;
  return j;
}

Json obligation_to_json(const Obligation& o) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Monitoring>) {
          return {{"type", "monitoring"}, {"anomaly_threshold", v.anomaly_threshold}};
        } else if constexpr (std::is_same_v<T, DetailedLogging>) {
          return {{"type", "detailed-logging"}, {"level", v.level}};
        } else if constexpr (std::is_same_v<T, NetworkIsolation>) {
          return {{"type", "network-isolation"}, {"directive", v.directive}, {"parameters", v.parameters}};
        } else {
          return {{"type", "minimal-permissions"}, {"component", v.component}};
        }
      },
      o);
}

Obligation obligation_from_json(const Json& j) {
  try {
    auto type = j.at("type").get<std::string>();
    if (type == "monitoring") return Monitoring{j.at("anomaly_threshold").get<double>()};
    if (type == "detailed-logging") return DetailedLogging{j.at("level").get<std::string>()};
    if (type == "network-isolation") {
      return NetworkIsolation{j.at("directive").get<std::string>(), j.value("parameters", Json::object())};
    }
    if (type == "minimal-permissions") return MinimalPermissions{j.at("component").get<std::string>()};
    throw Error(Errc::ParseError, "unknown obligation type '" + type + "'");
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("obligation: ") + e.what());
  }
}

std::optional<VerifiedCertificate> select_certificate(const std::vector<SignedCertificate>& certs,
                                                      const SecurityPolicy& policy, const TrustStore& trust) {
  std::vector<VerifiedCertificate> candidates;
  for (const auto& cert : certs) {
    try {
      auto verified = verify_certificate(cert, trust);
      if (policy.trusted_orgs.contains(verified.inspector_org)) candidates.push_back(std::move(verified));
    } catch (const Error&) {
      // unverifiable certificates are ignored
    }
  }
  std::set<Digest> superseded;
  for (const auto& c : candidates) {
    if (c.body.supersedes) superseded.insert(*c.body.supersedes);
  }
  std::optional<VerifiedCertificate> best;
  for (auto& c : candidates) {
    if (superseded.contains(c.body_digest)) continue;
    if (!best || c.body.issued_at > best->body.issued_at ||
        (c.body.issued_at == best->body.issued_at && c.body_digest < best->body_digest)) {
      best = c;
    }
  }
  return best;
}

PolicyOutcome evaluate_policy(const CertificateBody& body, const SecurityPolicy& policy) {
  PolicyOutcome out;
  auto fail = [&](const char* code) { out.reasons.emplace_back(code); };

  if (!std::includes(body.covered_backdoor_types.begin(), body.covered_backdoor_types.end(),
                     policy.required_backdoor_types.begin(), policy.required_backdoor_types.end())) {
    fail(reason::kCoverage);
  }

  bool algorithms_ok = true;
  for (const auto& required : policy.required_algorithms) {
    bool found = std::any_of(body.inspection_entries.begin(), body.inspection_entries.end(), [&](const auto& e) {
      if (e.algorithm != required.algorithm) return false;
      for (const auto& [key, value] : required.parameters.items()) {
        if (!e.parameters.contains(key) || e.parameters[key] != value) return false;
      }
      return true;
    });
    algorithms_ok = algorithms_ok && found;
  }
  if (!algorithms_ok) fail(reason::kAlgorithm);

  bool backdoor = std::any_of(body.inspection_entries.begin(), body.inspection_entries.end(), [&](const auto& e) {
    return e.verdict == Verdict::BackdoorFound || e.score >= policy.deny_threshold;
  });
  if (backdoor) fail(reason::kBackdoor);

  if (policy.trusted_suppliers) {
    bool suppliers_ok = true;
    for (const auto& c : body.software_digest.components) {
      const SupplyChainEntry* entry = nullptr;
      if (body.supply_chain) {
        for (const auto& s : *body.supply_chain) {
          if (s.component == c.name) entry = &s;
        }
      }
      if (entry == nullptr || !policy.trusted_suppliers->contains(entry->supplier)) suppliers_ok = false;
    }
    if (!suppliers_ok) fail(reason::kSupplier);
  }

  if (policy.require_engineer_record && !body.engineer) fail(reason::kEngineer);

  if (!out.reasons.empty()) {
    out.kind = PolicyOutcome::Kind::Fail;
    return out;
  }

  std::set<std::string> grey_components;
  double max_score = 0.0;
  bool grey = false;
  for (const auto& e : body.inspection_entries) {
    max_score = std::max(max_score, e.score);
    if (e.score >= policy.grey_threshold && e.score < policy.deny_threshold) {
      grey = true;
      for (const auto& f : e.findings) {
        if (f.weight > 0.0 && !f.component.empty()) grey_components.insert(f.component);
      }
    }
  }
  if (grey) {
    out.kind = PolicyOutcome::Kind::Grey;
    out.grey_score = max_score;
    out.grey_components.assign(grey_components.begin(), grey_components.end());
  }
  return out;
}

std::vector<Obligation> derive_obligations(double grey_score, const SecurityPolicy& policy,
                                           const std::vector<std::string>& grey_components) {
  const double g = policy.grey_threshold;
  const double d = policy.deny_threshold;
  if (!(grey_score >= g && grey_score < d)) {
    throw Error(Errc::OutOfBand, "score " + std::to_string(grey_score) + " is outside the grey band");
  }
  const auto& band = policy.obligations.monitoring;
  double threshold = band.t_lax - (band.t_lax - band.t_strict) * (grey_score - g) / (d - g);

  std::vector<Obligation> out;
  out.push_back(Monitoring{threshold});
  out.push_back(DetailedLogging{policy.obligations.logging_level});
  if (policy.obligations.vlan_quarantine) out.push_back(NetworkIsolation{"vlan-quarantine", Json::object()});
  if (policy.obligations.ip_allowlist) {
    out.push_back(NetworkIsolation{"ip-allowlist", {{"allow", *policy.obligations.ip_allowlist}}});
  }
  if (policy.obligations.minimal_permissions) {
    for (const auto& c : grey_components) out.push_back(MinimalPermissions{c});
  }
  return out;
}

}  // namespace attestgate
