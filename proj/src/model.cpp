#include "attestgate/model.hpp"

#include <algorithm>
#include <cmath>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

double unit_interval(const Json& j, const char* field) {
  if (!j.is_number()) throw Error(Errc::ParseError, std::string(field) + " must be a number");
  double v = j.get<double>();
  if (!(v >= 0.0 && v <= 1.0)) {
    throw Error(Errc::ParseError, std::string(field) + " outside [0,1]");
  }
  return v;
}

}  // namespace

const Component* FirmwareBundle::find(std::string_view component) const {
  auto it = std::find_if(components.begin(), components.end(),
                         [&](const Component& c) { return c.name == component; });
  return it == components.end() ? nullptr : &*it;
}

void check_unique_names(const FirmwareBundle& bundle) {
  std::set<std::string_view> seen;
  for (const auto& c : bundle.components) {
    if (!seen.insert(c.name).second) {
      throw Error(Errc::DuplicateComponentName, "duplicate component name '" + c.name + "'");
    }
  }
}

SoftwareDigest make_software_digest(std::vector<ComponentDigest> components) {
  std::sort(components.begin(), components.end(),
            [](const auto& a, const auto& b) { return a.name < b.name; });
  auto dup = std::adjacent_find(components.begin(), components.end(),
                                [](const auto& a, const auto& b) { return a.name == b.name; });
  if (dup != components.end()) {
    throw Error(Errc::DuplicateComponentName, "duplicate component name '" + dup->name + "'");
  }
  SoftwareDigest out;
  out.components = std::move(components);
  out.aggregate = sha256(canonical_encode(Json(out.components)));
  return out;
}

SoftwareDigest hash_bundle(const FirmwareBundle& bundle) {
  std::vector<ComponentDigest> parts;
  parts.reserve(bundle.components.size());
  for (const auto& c : bundle.components) parts.push_back({c.name, c.digest()});
  return make_software_digest(std::move(parts));
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Clean: return "clean";
    case Verdict::Grey: return "grey";
    case Verdict::BackdoorFound: return "backdoor-found";
  }
  return "clean";
}

Verdict verdict_from_string(std::string_view s) {
  if (s == "clean") return Verdict::Clean;
  if (s == "grey") return Verdict::Grey;
  if (s == "backdoor-found") return Verdict::BackdoorFound;
  throw Error(Errc::ParseError, "unknown verdict '" + std::string(s) + "'");
}

Digest body_digest(const CertificateBody& body) { return sha256(canonical_encode(Json(body))); }

void TrustStore::add(const std::string& org, const std::string& key_id, const PublicKey& key) {
  if (!orgs_[org].emplace(key_id, key).second) {
    throw Error(Errc::KeyFormat, "key id '" + key_id + "' already registered for " + org);
  }
}

const PublicKey* TrustStore::find(const std::string& org, const std::string& key_id) const {
  auto org_it = orgs_.find(org);
  if (org_it == orgs_.end()) return nullptr;
  auto key_it = org_it->second.find(key_id);
  return key_it == org_it->second.end() ? nullptr : &key_it->second;
}

TrustStore TrustStore::from_json(const Json& j) {
  TrustStore store;
  try {
    for (const auto& [org, keys] : j.items()) {
      store.orgs_[org];
      for (const auto& k : keys) {
        store.add(org, k.at("key_id").get<std::string>(),
                  PublicKey::from_hex(k.at("public_key_hex").get<std::string>()));
      }
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("trust store: ") + e.what());
  }
  return store;
}

Json TrustStore::to_json() const {
  Json j = Json::object();
  for (const auto& [org, keys] : orgs_) {
    Json list = Json::array();
    for (const auto& [id, pk] : keys) list.push_back({{"key_id", id}, {"public_key_hex", pk.hex()}});
    j[org] = list;
  }
  return j;
}

SignedCertificate sign_certificate(const CertificateBody& body, const SigningKey& key,
                                   const std::string& key_id) {
  SignedCertificate cert;
  cert.body = body;
  cert.body_digest = body_digest(body);
  cert.signature = key.sign(cert.body_digest);
  cert.signer_key_id = key_id;
  return cert;
}

VerifiedCertificate verify_certificate(const SignedCertificate& cert, const TrustStore& trust) {
  auto recomputed = body_digest(cert.body);
  if (recomputed != cert.body_digest) {
    throw Error(Errc::DigestMismatch, "certificate body does not match its recorded digest");
  }
  const auto* key = trust.find(cert.body.inspector_org, cert.signer_key_id);
  if (key == nullptr) {
    throw Error(Errc::UnknownSigner, "no key '" + cert.signer_key_id + "' registered for '" +
                                         cert.body.inspector_org + "'");
  }
  if (!verify_signature(*key, cert.body_digest, cert.signature)) {
    throw Error(Errc::BadSignature, "certificate signature does not verify");
  }
  return {cert.body, cert.body.inspector_org, cert.body_digest};
}

// --- JSON ------------------------------------------------------------------

void to_json(Json& j, const ComponentDigest& v) {
  j = Json{{"name", v.name}, {"digest", to_hex(v.digest)}};
}

void from_json(const Json& j, ComponentDigest& v) {
  v.name = j.at("name").get<std::string>();
  v.digest = digest_from_hex(j.at("digest").get<std::string>());
}

void to_json(Json& j, const SoftwareDigest& v) {
  j = Json{{"components", v.components}, {"aggregate", to_hex(v.aggregate)}};
}

void from_json(const Json& j, SoftwareDigest& v) {
  v.components = j.at("components").get<std::vector<ComponentDigest>>();
  v.aggregate = digest_from_hex(j.at("aggregate").get<std::string>());
}

void to_json(Json& j, const Finding& v) {
  j = Json{{"component", v.component}, {"location", v.location}, {"kind", v.kind},
           {"detail", v.detail},       {"weight", v.weight}};
}

void from_json(const Json& j, Finding& v) {
  v.component = j.at("component").get<std::string>();
  v.location = j.at("location").get<std::string>();
  v.kind = j.at("kind").get<std::string>();
  v.detail = j.at("detail").get<std::string>();
  v.weight = unit_interval(j.at("weight"), "finding weight");
}

void to_json(Json& j, const InspectionEntry& v) {
  j = Json{{"algorithm", v.algorithm},
           {"parameters", v.parameters},
           {"backdoor_types", v.backdoor_types},
           {"component_scope", v.component_scope},
           {"score", v.score},
           {"verdict", to_string(v.verdict)},
           {"findings", v.findings},
           {"scope_digest", to_hex(v.scope_digest)}};
}

void from_json(const Json& j, InspectionEntry& v) {
  v.algorithm = j.at("algorithm").get<std::string>();
  v.parameters = j.at("parameters");
  if (!v.parameters.is_object()) throw Error(Errc::ParseError, "parameters must be an object");
  v.backdoor_types = j.at("backdoor_types").get<std::set<std::string>>();
  v.component_scope = j.at("component_scope").get<std::vector<std::string>>();
  v.score = unit_interval(j.at("score"), "score");
  v.verdict = verdict_from_string(j.at("verdict").get<std::string>());
  v.findings = j.at("findings").get<std::vector<Finding>>();
  v.scope_digest = digest_from_hex(j.at("scope_digest").get<std::string>());
}

void to_json(Json& j, const CertificateBody& v) {
  j = Json{{"software_digest", v.software_digest},
           {"bundle_name", v.bundle_name},
           {"bundle_version", v.bundle_version},
           {"device_class", v.device_class},
           {"inspection_entries", v.inspection_entries},
           {"covered_backdoor_types", v.covered_backdoor_types},
           {"inspector_org", v.inspector_org},
           {"issued_at", v.issued_at}};
  if (v.engineer) j["engineer"] = *v.engineer;
  if (v.supply_chain) {
    Json list = Json::array();
    for (const auto& s : *v.supply_chain) list.push_back({{"component", s.component}, {"supplier", s.supplier}});
    j["supply_chain"] = list;
  }
  if (v.supersedes) j["supersedes"] = to_hex(*v.supersedes);
}

void from_json(const Json& j, CertificateBody& v) {
  v = {};
  v.software_digest = j.at("software_digest").get<SoftwareDigest>();
  v.bundle_name = j.at("bundle_name").get<std::string>();
  v.bundle_version = j.at("bundle_version").get<std::string>();
  v.device_class = j.at("device_class").get<std::string>();
  v.inspection_entries = j.at("inspection_entries").get<std::vector<InspectionEntry>>();
  v.covered_backdoor_types = j.at("covered_backdoor_types").get<std::set<std::string>>();
  v.inspector_org = j.at("inspector_org").get<std::string>();
  v.issued_at = j.at("issued_at").get<std::int64_t>();
  if (j.contains("engineer")) v.engineer = j.at("engineer").get<std::string>();
  if (j.contains("supply_chain")) {
    std::vector<SupplyChainEntry> chain;
    for (const auto& s : j.at("supply_chain")) {
      chain.push_back({s.at("component").get<std::string>(), s.at("supplier").get<std::string>()});
    }
    v.supply_chain = std::move(chain);
  }
  if (j.contains("supersedes")) v.supersedes = digest_from_hex(j.at("supersedes").get<std::string>());
}

void to_json(Json& j, const SignedCertificate& v) {
  j = Json{{"body", v.body},
           {"body_digest", to_hex(v.body_digest)},
           {"signature", to_hex(v.signature)},
           {"signer_key_id", v.signer_key_id}};
}

void from_json(const Json& j, SignedCertificate& v) {
  v.body = j.at("body").get<CertificateBody>();
  v.body_digest = digest_from_hex(j.at("body_digest").get<std::string>());
  v.signature = signature_from_hex(j.at("signature").get<std::string>());
  v.signer_key_id = j.at("signer_key_id").get<std::string>();
}

SignedCertificate parse_certificate(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, e.what());
  }
  return parse_as<SignedCertificate>(j);
}

}  // namespace attestgate
