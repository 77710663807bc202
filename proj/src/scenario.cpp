#include "attestgate/scenario.hpp"

#include <fstream>

#include "attestgate/bundle_io.hpp"
#include "attestgate/cert_server.hpp"
#include "attestgate/error.hpp"
#include "attestgate/inspection.hpp"
#include "attestgate/prover.hpp"
#include "attestgate/verifier.hpp"

namespace attestgate {

namespace fs = std::filesystem;

namespace {

constexpr const char* kDefaultInspector = "Trusted Inspection Lab";
constexpr const char* kUntrustedInspector = "Unvetted Inspection Lab";
constexpr std::int64_t kBaseIssuedAt = 1700000000;

enum class CertPlan { None, Clean, Grey, Backdoor, UntrustedOrg, Stale };

CertPlan cert_plan_from_string(const std::string& s) {
  if (s == "none") return CertPlan::None;
  if (s == "clean") return CertPlan::Clean;
  if (s == "grey") return CertPlan::Grey;
  if (s == "backdoor") return CertPlan::Backdoor;
  if (s == "untrusted-org") return CertPlan::UntrustedOrg;
  if (s == "stale") return CertPlan::Stale;
  throw Error(Errc::ScenarioParseError, "unknown cert plan '" + s + "'");
}

Bytes random_text(std::mt19937_64& rng, std::size_t len) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz0123456789 .,;";
  std::uniform_int_distribution<std::size_t> pick(0, sizeof(kAlphabet) - 2);
  Bytes out(len);
  for (auto& b : out) b = static_cast<std::uint8_t>(kAlphabet[pick(rng)]);
  return out;
}

void append(Bytes& to, std::string_view text) { to.insert(to.end(), text.begin(), text.end()); }

ControlFlowGraph guarded_graph(const std::string& prefix) {
  // entry -> dispatch -> auth -> privileged; dispatch -> work -> loop -> dispatch
  ControlFlowGraph g;
  auto id = [&](const char* n) { return prefix + n; };
  g.nodes = {{id("entry"), {label::kEntry}},  {id("dispatch"), {}}, {id("auth"), {label::kAuthCheck}},
             {id("admin"), {label::kPrivileged}}, {id("work"), {}},   {id("loop"), {}}};
  g.edges = {{id("entry"), id("dispatch")}, {id("dispatch"), id("auth")}, {id("auth"), id("admin")},
             {id("dispatch"), id("work")},  {id("work"), id("loop")},     {id("loop"), id("dispatch")}};
  return g;
}

ControlFlowGraph grey_graph(const std::string& prefix) {
  // A static comparison at `cmp` exclusively guards h0..h4: 5 of 10 nodes.
  ControlFlowGraph g;
  auto id = [&](std::string n) { return prefix + n; };
  g.nodes = {{id("entry"), {label::kEntry}}, {id("dispatch"), {}}, {id("auth"), {label::kAuthCheck}},
             {id("admin"), {label::kPrivileged}}, {id("cmp"), {}}};
  g.edges = {{id("entry"), id("dispatch")}, {id("dispatch"), id("auth")}, {id("auth"), id("admin")},
             {id("dispatch"), id("cmp")}};
  std::string prev = id("cmp");
  for (int i = 0; i < 5; ++i) {
    auto node = id("h" + std::to_string(i));
    g.nodes.push_back({node, {}});
    g.edges.emplace_back(prev, node);
    prev = node;
  }
  g.static_compares.push_back({id("cmp"), to_bytes("factory_mode")});
  return g;
}

ControlFlowGraph backdoor_graph(const std::string& prefix) {
  auto g = guarded_graph(prefix);
  g.edges.emplace_back(prefix + "entry", prefix + "admin");
  return g;
}

Json expected_json(const Json& spec) {
  if (spec.is_string()) return {{"outcome", spec.get<std::string>()}};
  return spec;
}

bool matches(const Json& expected, const Decision& actual) {
  if (outcome_from_string(expected.at("outcome").get<std::string>()) != actual.outcome) return false;
  if (expected.contains("reasons")) {
    auto want = expected["reasons"].get<std::set<std::string>>();
    std::set<std::string> got(actual.reasons.begin(), actual.reasons.end());
    if (want != got) return false;
  }
  if (expected.contains("obligations")) {
    std::set<std::string> got;
    for (const auto& o : actual.obligations) got.insert(obligation_to_json(o)["type"].get<std::string>());
    for (const auto& t : expected["obligations"]) {
      if (!got.contains(t.get<std::string>())) return false;
    }
  }
  return true;
}

Verdict worst_verdict(const std::vector<InspectionEntry>& entries) {
  Verdict worst = Verdict::Clean;
  for (const auto& e : entries) worst = std::max(worst, e.verdict);
  return worst;
}

struct Device {
  std::string id;
  FirmwareBundle bundle;
  DeviceIdentity identity;
  TamperMode tamper = TamperMode::None;
  CertPlan plan = CertPlan::None;
  Json expected;
};

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("attestgate-scenario-" + to_hex(random_digest()).substr(0, 16));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

FirmwareBundle load_device_bundle(const Json& spec, const fs::path& base_dir, std::mt19937_64& rng) {
  if (spec.contains("generate")) {
    return generate_bundle(fixture_kind_from_string(spec["generate"].get<std::string>()),
                           spec.value("components", std::size_t{3}), spec.value("device_class", "web-server"), rng);
  }
  if (spec.contains("path")) {
    fs::path p = spec["path"].get<std::string>();
    return load_bundle(p.is_absolute() ? p : base_dir / p);
  }
  if (spec.contains("inline")) return bundle_from_inline_json(spec["inline"]);
  throw Error(Errc::ScenarioParseError, "bundle spec needs one of generate, path, inline");
}

}  // namespace

FixtureKind fixture_kind_from_string(std::string_view s) {
  if (s == "clean") return FixtureKind::Clean;
  if (s == "grey") return FixtureKind::Grey;
  if (s == "backdoor") return FixtureKind::Backdoor;
  throw Error(Errc::ScenarioParseError, "unknown fixture kind '" + std::string(s) + "'");
}

FirmwareBundle generate_bundle(FixtureKind kind, std::size_t components, const std::string& device_class,
                               std::mt19937_64& rng) {
  if (components == 0) components = 1;
  FirmwareBundle bundle;
  bundle.name = "synthetic-" + device_class;
  bundle.version = "1.0." + std::to_string(rng() % 100);
  bundle.device_class = device_class;
  std::uniform_int_distribution<std::size_t> len(48, 160);
  for (std::size_t i = 0; i < components; ++i) {
    auto name = "stage" + std::to_string(i) + (i == 0 ? "-boot" : i == 1 ? "-os" : "-app");
    auto content = random_text(rng, len(rng));
    bool last = i + 1 == components;
    if (last) append(content, " HTTP/1.1 RTSP/1.0 DHCPOFFER ");
    if (last && kind == FixtureKind::Backdoor) append(content, "admin_password=letmein");
    Component c(name, std::move(content));
    auto prefix = "s" + std::to_string(i) + ".";
    if (last && kind == FixtureKind::Grey) {
      c.cfg = grey_graph(prefix);
    } else if (last && kind == FixtureKind::Backdoor) {
      c.cfg = backdoor_graph(prefix);
    } else {
      c.cfg = guarded_graph(prefix);
    }
    c.supplier = i == 0 ? "Silicon Boot Co" : "Acme Firmware";
    bundle.components.push_back(std::move(c));
  }
  return bundle;
}

Json run_scenario(const Json& scenario, const fs::path& base_dir) {
  std::string name;
  std::uint64_t seed = 0;
  SecurityPolicy policy;
  std::vector<SuiteItem> suite = default_suite();
  std::vector<Device> devices;
  std::string inspector;
  std::mt19937_64 rng;

  try {
    name = scenario.value("name", "scenario");
    seed = scenario.at("seed").get<std::uint64_t>();
    rng.seed(seed);
    policy = SecurityPolicy::from_json(scenario.at("policy"));
    if (scenario.contains("suite")) suite = parse_suite(scenario["suite"]);
    inspector = scenario.value("inspector_org", kDefaultInspector);
    if (policy.trusted_orgs.contains(kUntrustedInspector)) {
      throw Error(Errc::ScenarioParseError, std::string(kUntrustedInspector) + " must not be trusted by the policy");
    }
    const auto& device_specs = scenario.at("devices");
    const auto& expected = scenario.at("expected");
    if (!device_specs.is_array() || !expected.is_array() || device_specs.size() != expected.size()) {
      throw Error(Errc::ScenarioParseError, "expected must list one outcome per device");
    }
    for (std::size_t i = 0; i < device_specs.size(); ++i) {
      const auto& spec = device_specs[i];
      Device d{spec.value("id", "device-" + std::to_string(i)),
               load_device_bundle(spec.at("bundle"), base_dir, rng),
               {},
               parse_tamper_mode(spec.value("tamper", "none")),
               cert_plan_from_string(spec.value("cert_plan", "none")),
               expected_json(expected[i])};
      auto seed_bytes = sha256(std::to_string(seed) + "/" + d.id);
      d.identity = {d.id, SigningKey::from_seed(seed_bytes)};
      outcome_from_string(d.expected.at("outcome").get<std::string>());
      devices.push_back(std::move(d));
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ScenarioParseError, e.what());
  } catch (const Error& e) {
    if (e.code() == Errc::ScenarioParseError) throw;
    throw Error(Errc::ScenarioParseError, std::string(e.name()) + ": " + e.what());
  }

  // Inspector keys and trust stores.
  auto trusted_key = SigningKey::from_seed(sha256(std::to_string(seed) + "/inspector/" + inspector));
  auto untrusted_key = SigningKey::from_seed(sha256(std::to_string(seed) + "/inspector/untrusted"));
  TrustStore trust;
  trust.add(inspector, "k1", trusted_key.public_key());
  trust.add(kUntrustedInspector, "k1", untrusted_key.public_key());
  DeviceRegistry registry;
  for (const auto& d : devices) registry.enroll(d.id, d.identity.key.public_key());

  TempDir tmp;
  CertificateStore store(tmp.path() / "certs.jsonl", trust);
  CertServer server(store, "127.0.0.1", 0);
  server.start();
  CertServerClient client("http://127.0.0.1:" + std::to_string(server.port()));

  auto ctx = InspectionContext::defaults();
  for (std::size_t i = 0; i < devices.size(); ++i) {
    auto& d = devices[i];
    if (d.plan == CertPlan::None) continue;
    IssueOptions options;
    options.include_supply_chain = true;
    options.engineer = "scenario-runner";
    options.issued_at = kBaseIssuedAt + static_cast<std::int64_t>(i);

    FirmwareBundle inspected = d.bundle;
    if (d.plan == CertPlan::Stale) {
      auto& first = inspected.components.front();
      auto content = first.content();
      append(content, "-previous-release");
      first.set_content(std::move(content));
      inspected.version += "-previous";
    }
    auto entries = run_inspection(inspected, suite, ctx);
    auto worst = worst_verdict(entries);
    auto want = d.plan == CertPlan::Grey ? Verdict::Grey : d.plan == CertPlan::Backdoor ? Verdict::BackdoorFound : Verdict::Clean;
    if ((d.plan == CertPlan::Clean || d.plan == CertPlan::Grey || d.plan == CertPlan::Backdoor) && worst != want) {
      throw Error(Errc::ScenarioParseError, "device " + d.id + ": cert plan expects a " + std::string(to_string(want)) +
                                                " inspection but the bundle inspects " + std::string(to_string(worst)));
    }
    auto cert = d.plan == CertPlan::UntrustedOrg
                    ? issue_certificate(inspected, entries, kUntrustedInspector, untrusted_key, "k1", options)
                    : issue_certificate(inspected, entries, inspector, trusted_key, "k1", options);
    auto upload = client.put(cert);
    if (!upload.stored) {
      throw Error(Errc::StorageFailure, "device " + d.id + ": upload failed (" + upload.error + ")");
    }
  }

  AuditLog audit;
  Verifier verifier(policy, trust, registry, [&client](const Digest& aggregate) { return client.get(aggregate); },
                    audit);
  VerifierDaemon daemon(verifier, "127.0.0.1", 0);
  daemon.start();

  Json results = Json::array();
  bool all_pass = true;
  for (auto& d : devices) {
    Decision decision;
    try {
      ProverAgent agent(d.identity, d.tamper);
      agent.boot(d.bundle);
      auto reply = run_prover_session(agent, "127.0.0.1", daemon.port());
      decision = Decision::from_json(reply.at("decision"));
    } catch (const std::exception& e) {
      decision.outcome = Outcome::Deny;
      decision.reasons = {reason::kAttestation};
      decision.detail = e.what();
    }
    Json obligations = Json::array();
    for (const auto& o : decision.obligations) obligations.push_back(obligation_to_json(o));
    bool pass = matches(d.expected, decision);
    all_pass = all_pass && pass;
    results.push_back({{"device", d.id},
                       {"expected", d.expected},
                       {"actual", {{"outcome", to_string(decision.outcome)}, {"reasons", decision.reasons}, {"obligations", obligations}}},
                       {"pass", pass}});
  }
  daemon.stop();
  server.stop();

  return {{"scenario", name}, {"seed", seed}, {"results", results}, {"pass", all_pass}};
}

Json run_scenario_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ScenarioParseError, "cannot read scenario " + path.string());
  auto j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ScenarioParseError, path.string() + " is not valid JSON");
  return run_scenario(j, path.parent_path());
}

}  // namespace attestgate
