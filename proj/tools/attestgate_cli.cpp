// attestgate: command-line entry point for inspection, certificate service,
// attestation and admission.

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <tuple>
#include <pthread.h>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "attestgate/bundle_io.hpp"
#include "attestgate/cert_server.hpp"
#include "attestgate/error.hpp"
#include "attestgate/inspection.hpp"
#include "attestgate/prover.hpp"
#include "attestgate/scenario.hpp"
#include "attestgate/verifier.hpp"

using namespace attestgate;
namespace fs = std::filesystem;

namespace {

bool g_human = false;

void print_human(const Json& j, int indent = 0) {
  std::string pad(static_cast<std::size_t>(indent), ' ');
  if (!j.is_object()) {
    std::cout << pad << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
    return;
  }
  for (const auto& [key, value] : j.items()) {
    if ((value.is_object() && !value.empty()) || (value.is_array() && !value.empty() && value.front().is_structured())) {
      std::cout << pad << key << ":\n";
      if (value.is_array()) {
        for (const auto& item : value) {
          std::cout << pad << "  -\n";
          print_human(item, indent + 4);
        }
      } else {
        print_human(value, indent + 2);
      }
    } else {
      std::cout << pad << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump()) << "\n";
    }
  }
}

void emit(const Json& j) {
  if (g_human) {
    print_human(j);
  } else {
    std::cout << j.dump() << "\n";
  }
  std::cout.flush();
}

Json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  auto j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::ParseError, path.string() + " is not valid JSON");
  return j;
}

void write_json_file(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out.flush()) throw Error(Errc::Io, "write failed for " + path.string());
}

BundleFormat bundle_format(const std::string& s) {
  if (s == "dir") return BundleFormat::Directory;
  if (s == "inline") return BundleFormat::Inline;
  return BundleFormat::Auto;
}

SigningKey load_signing_key(const fs::path& path) {
  auto j = read_json_file(path);
  try {
    return SigningKey::from_seed_hex(j.at("secret_seed_hex").get<std::string>());
  } catch (const Json::exception& e) {
    throw Error(Errc::KeyFormat, e.what());
  }
}

std::vector<InspectionEntry> load_entries(const fs::path& path) {
  auto j = read_json_file(path);
  const auto& arr = j.is_object() && j.contains("entries") ? j["entries"] : j;
  return parse_as<std::vector<InspectionEntry>>(arr);
}

std::string public_error_name(Errc code) {
  if (code == Errc::DigestMismatch || code == Errc::BadSignature) return "InvalidSignature";
  return std::string(to_string(code));
}

/// Blocks SIGINT/SIGTERM for every thread spawned afterwards so only
/// wait_for_shutdown() observes them.
sigset_t block_shutdown_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

int wait_for_shutdown(const sigset_t& set) {
  int sig = 0;
  sigwait(&set, &sig);
  return sig;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("attestgate");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  spdlog::cfg::load_env_levels();
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  CLI::App app{"Backdoor-inspection certificates and attestation-gated network admission"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_flag("--human", g_human, "Human-readable output instead of JSON");

  std::string bundle_path, format = "auto", suite_path, out_path, entries_path, org, key_path, key_id = "k1";
  std::string engineer, supersedes, server_url, cert_path, trust_path, store_path, host = "127.0.0.1";
  std::string policy_path, registry_path, audit_path, identity_path, verifier_addr, tamper = "none";
  std::string scenario_path, old_bundle_path, device_id, seed_hex, listen;
  std::string profiles_path, advisories_path, patterns_path;
  bool supply_chain = false;
  std::optional<std::int64_t> issued_at;
  int port = 0;

  auto* hash = app.add_subcommand("hash", "Print the software digest of a bundle");
  hash->add_option("bundle", bundle_path, "Bundle directory or inline JSON file")->required();
  hash->add_option("--format", format, "auto | dir | inline")->check(CLI::IsMember({"auto", "dir", "inline"}));

  auto* inspect = app.add_subcommand("inspect", "Run an inspection suite over a bundle");
  inspect->add_option("bundle", bundle_path)->required();
  inspect->add_option("--format", format)->check(CLI::IsMember({"auto", "dir", "inline"}));
  inspect->add_option("--suite", suite_path, "Suite JSON (default: every detector)");
  inspect->add_option("--out", out_path, "Also write the entries to this file");
  inspect->add_option("--profiles", profiles_path, "Profile database (JSON list of device-class profiles)");
  inspect->add_option("--advisories", advisories_path, "Advisory database (JSON map digest -> advisory ids)");
  inspect->add_option("--patterns", patterns_path, "Credential patterns (JSON array of hex strings)");

  auto* reinspect = app.add_subcommand("reinspect", "Partial re-inspection after a software update");
  reinspect->add_option("--old", old_bundle_path, "Previously inspected bundle")->required();
  reinspect->add_option("--new", bundle_path, "Updated bundle")->required();
  reinspect->add_option("--entries", entries_path, "Entries of the previous inspection")->required();
  reinspect->add_option("--suite", suite_path);
  reinspect->add_option("--out", out_path);
  reinspect->add_option("--profiles", profiles_path);
  reinspect->add_option("--advisories", advisories_path);
  reinspect->add_option("--patterns", patterns_path);

  auto* keygen = app.add_subcommand("keygen", "Generate an Ed25519 key (inspector key or device identity)");
  keygen->add_option("--device-id", device_id, "Emit a device identity instead of a bare key");
  keygen->add_option("--seed-hex", seed_hex, "Deterministic 32-byte seed");
  keygen->add_option("--out", out_path);

  auto* issue = app.add_subcommand("issue", "Sign a backdoor-inspection certificate");
  issue->add_option("bundle", bundle_path)->required();
  issue->add_option("--format", format)->check(CLI::IsMember({"auto", "dir", "inline"}));
  issue->add_option("--entries", entries_path)->required();
  issue->add_option("--org", org, "Inspector organization")->required();
  issue->add_option("--key", key_path, "Inspector key file from keygen")->required();
  issue->add_option("--key-id", key_id);
  issue->add_option("--engineer", engineer);
  issue->add_flag("--supply-chain", supply_chain, "Record component suppliers");
  issue->add_option("--supersedes", supersedes, "Body digest of the certificate this one replaces");
  issue->add_option("--issued-at", issued_at, "Unix seconds (default: now)");
  issue->add_option("--out", out_path);

  auto* upload = app.add_subcommand("upload", "Upload a certificate to a certificate server");
  upload->add_option("cert", cert_path)->required();
  upload->add_option("--server", server_url, "e.g. http://127.0.0.1:8700")->required();

  auto* serve = app.add_subcommand("serve", "Run the certificate server");
  serve->add_option("--store", store_path, "Journal file")->required();
  serve->add_option("--trust,--trust-store", trust_path, "Trust store JSON")->required();
  serve->add_option("--listen", listen, "host:port (overrides --host/--port)");
  serve->add_option("--host", host);
  serve->add_option("--port", port, "0 picks an ephemeral port");

  auto* verify_cert = app.add_subcommand("verify-cert", "Verify a certificate offline");
  verify_cert->add_option("cert", cert_path)->required();
  verify_cert->add_option("--trust,--trust-store", trust_path)->required();

  auto* verifierd = app.add_subcommand("verifierd", "Run the admission verifier daemon");
  verifierd->add_option("--policy", policy_path)->required();
  verifierd->add_option("--trust-store,--trust", trust_path)->required();
  verifierd->add_option("--device-registry,--registry", registry_path, "Enrolled device keys")->required();
  verifierd->add_option("--cert-server", server_url)->required();
  verifierd->add_option("--audit-log,--audit", audit_path, "JSON-lines audit log");
  verifierd->add_option("--listen", listen, "host:port (overrides --host/--port)");
  verifierd->add_option("--host", host);
  verifierd->add_option("--port", port);

  auto* prover = app.add_subcommand("prover", "Boot a bundle and request admission");
  prover->add_option("--bundle", bundle_path)->required();
  prover->add_option("--format", format)->check(CLI::IsMember({"auto", "dir", "inline"}));
  prover->add_option("--identity", identity_path, "Device identity from keygen --device-id")->required();
  prover->add_option("--connect,--verifier", verifier_addr, "Verifier host:port")->required();
  prover->add_option("--tamper", tamper)->check(CLI::IsMember({"none", "log", "nonce", "key"}));

  auto* scenario = app.add_subcommand("scenario", "Run a scenario file end to end");
  scenario->add_option("file", scenario_path)->required();
  scenario->add_option("--out", out_path, "Also write the report to this file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << Json{{"error", "UsageError"}, {"detail", e.what()}}.dump() << "\n";
    return 2;
  }

  try {
    if (!listen.empty()) std::tie(host, port) = parse_host_port(listen);
    auto context = [&] {
      auto ctx = InspectionContext::defaults();
      if (!profiles_path.empty()) {
        ctx.profiles = parse_as<std::vector<DeviceClassProfile>>(read_json_file(profiles_path));
      }
      if (!advisories_path.empty()) ctx.advisories = AdvisoryDb::from_json(read_json_file(advisories_path));
      if (!patterns_path.empty()) {
        ctx.credential_patterns.clear();
        for (const auto& hex : parse_as<std::vector<std::string>>(read_json_file(patterns_path))) {
          ctx.credential_patterns.push_back(from_hex(hex));
        }
      }
      return ctx;
    };
    auto suite = [&] { return suite_path.empty() ? default_suite() : parse_suite(read_json_file(suite_path)); };

    if (*hash) {
      emit(hash_bundle(load_bundle(bundle_path, bundle_format(format))));
    } else if (*inspect) {
      auto bundle = load_bundle(bundle_path, bundle_format(format));
      auto entries = run_inspection(bundle, suite(), context());
      Json out = {{"software_digest", hash_bundle(bundle)}, {"entries", entries}};
      if (!out_path.empty()) write_json_file(out_path, out);
      emit(out);
    } else if (*reinspect) {
      auto old_bundle = load_bundle(old_bundle_path);
      auto new_bundle = load_bundle(bundle_path);
      InspectionStats stats;
      auto entries = reinspect_updated(old_bundle, new_bundle, load_entries(entries_path), suite(),
                                       context(), &stats);
      Json out = {{"software_digest", hash_bundle(new_bundle)},
                  {"entries", entries},
                  {"detector_runs", stats.detector_runs}};
      if (!out_path.empty()) write_json_file(out_path, out);
      emit(out);
    } else if (*keygen) {
      auto key = seed_hex.empty() ? SigningKey::generate() : SigningKey::from_seed_hex(seed_hex);
      Json out = device_id.empty() ? Json{{"secret_seed_hex", key.seed_hex()}, {"public_key_hex", key.public_key().hex()}}
                                   : DeviceIdentity{device_id, key}.to_json();
      if (!out_path.empty()) write_json_file(out_path, out);
      emit(out);
    } else if (*issue) {
      auto bundle = load_bundle(bundle_path, bundle_format(format));
      IssueOptions options;
      if (!engineer.empty()) options.engineer = engineer;
      options.include_supply_chain = supply_chain;
      if (!supersedes.empty()) options.supersedes = digest_from_hex(supersedes);
      options.issued_at = issued_at;
      auto cert = issue_certificate(bundle, load_entries(entries_path), org, load_signing_key(key_path), key_id, options);
      Json out = cert;
      if (!out_path.empty()) write_json_file(out_path, out);
      emit(out);
    } else if (*upload) {
      auto cert = parse_as<SignedCertificate>(read_json_file(cert_path));
      auto result = CertServerClient(server_url).put(cert);
      if (!result.stored && !result.duplicate) {
        emit({{"error", result.error.empty() ? "UploadRejected" : result.error},
              {"detail", result.detail},
              {"http_status", result.http_status}});
        return 1;
      }
      emit({{"status", result.duplicate ? "duplicate" : "stored"},
            {"http_status", result.http_status},
            {"body_digest", to_hex(body_digest(cert.body))}});
    } else if (*serve) {
      auto signals = block_shutdown_signals();
      CertificateStore store(store_path, TrustStore::from_json(read_json_file(trust_path)));
      CertServer server(store, host, port);
      server.start();
      emit({{"event", "listening"}, {"host", host}, {"port", server.port()}, {"certificates", store.size()}});
      int sig = wait_for_shutdown(signals);
      server.stop();
      spdlog::info("certificate server stopped on signal {}", sig);
    } else if (*verify_cert) {
      auto cert = parse_as<SignedCertificate>(read_json_file(cert_path));
      auto verified = verify_certificate(cert, TrustStore::from_json(read_json_file(trust_path)));
      emit({{"status", "valid"},
            {"inspector_org", verified.inspector_org},
            {"body_digest", to_hex(verified.body_digest)},
            {"aggregate", to_hex(verified.body.software_digest.aggregate)}});
    } else if (*verifierd) {
      auto signals = block_shutdown_signals();
      auto policy = SecurityPolicy::from_json(read_json_file(policy_path));
      auto trust = TrustStore::from_json(read_json_file(trust_path));
      auto registry = DeviceRegistry::from_json(read_json_file(registry_path));
      std::unique_ptr<AuditLog> audit = audit_path.empty() ? std::make_unique<AuditLog>()
                                                           : std::make_unique<AuditLog>(audit_path);
      CertServerClient client(server_url);
      Verifier verifier(policy, trust, registry, [&client](const Digest& d) { return client.get(d); }, *audit);
      VerifierDaemon daemon(verifier, host, port);
      daemon.start();
      emit({{"event", "listening"}, {"host", host}, {"port", daemon.port()}});
      wait_for_shutdown(signals);
      daemon.stop();
    } else if (*prover) {
      auto agent = ProverAgent::boot_from_files(bundle_path, identity_path, parse_tamper_mode(tamper),
                                                bundle_format(format));
      auto [vhost, vport] = parse_host_port(verifier_addr);
      auto reply = run_prover_session(agent, vhost, vport);
      auto decision = reply.at("decision");
      emit(decision);
      return decision.value("outcome", "deny") == "deny" ? 1 : 0;
    } else if (*scenario) {
      auto report = run_scenario_file(scenario_path);
      if (!out_path.empty()) write_json_file(out_path, report);
      emit(report);
      if (!report["pass"].get<bool>()) {
        Json diff = Json::array();
        for (const auto& r : report["results"]) {
          if (!r["pass"].get<bool>()) diff.push_back(r);
        }
        std::cerr << Json{{"error", "ExpectationFailure"}, {"detail", diff}}.dump() << "\n";
        return 1;
      }
    }
  } catch (const Error& e) {
    emit({{"error", public_error_name(e.code())}, {"detail", e.what()}});
    return 1;
  } catch (const std::exception& e) {
    emit({{"error", "InternalError"}, {"detail", e.what()}});
    return 1;
  }
  return 0;
}
