#pragma once

#include <sys/types.h>

#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "attestgate/attestation.hpp"
#include "attestgate/inspection.hpp"
#include "attestgate/model.hpp"
#include "attestgate/policy.hpp"
#include "attestgate/verifier.hpp"

namespace testing_support {

using namespace attestgate;

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random graph with 1..max_nodes nodes, exactly one entry, random auth-check
/// and privileged labels, random edges (cycles and self loops allowed) and
/// 0..2 static comparison sites.
ControlFlowGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes = 12);

/// Privileged nodes reached by some simple path from entry that visits no
/// auth-check node, found by exhaustive path enumeration.
std::set<std::string> oracle_auth_bypass(const ControlFlowGraph& cfg);

/// Nodes reachable from `site` that become unreachable from entry when the
/// site node is deleted (plain BFS on the reduced graph).
std::set<std::string> oracle_guarded(const ControlFlowGraph& cfg, const std::string& site);

/// Max over compare sites of |guarded| / |nodes|, 0 without sites.
double oracle_static_score(const ControlFlowGraph& cfg);

/// Bundle with 1..max_components uniquely named components of random bytes.
FirmwareBundle random_bundle(std::mt19937_64& rng, std::size_t max_components = 6);

Bytes random_bytes(std::mt19937_64& rng, std::size_t n);

struct Inspector {
  std::string org;
  SigningKey key;
  TrustStore trust;
};
Inspector make_inspector(const std::string& org, std::uint8_t seed_byte);

/// Certificate body over `bundle` with hand-set entry scores, for policy tests.
CertificateBody synthetic_body(const FirmwareBundle& bundle, const std::string& org,
                               const std::vector<double>& scores, std::int64_t issued_at = 1700000000);

SecurityPolicy permissive_policy(const std::string& trusted_org);

/// Policy A is no stricter than policy B (requirement sets are subsets,
/// thresholds are more lenient, supplier allowlists are supersets); both
/// judge the same attestation result and fetched certificates. Certificates
/// only come from organisations either both policies trust or neither does.
struct PolicyTriple {
  SecurityPolicy a;
  SecurityPolicy b;
  AttestationResult attestation;
  CertFetchResult fetch;
  TrustStore trust;
};
PolicyTriple random_policy_triple(std::mt19937_64& rng);

// --- child processes -------------------------------------------------------

struct ProcResult {
  int exit_code = -1;
  std::string out;
};

/// Runs the CLI to completion and captures stdout.
ProcResult run_cli(const std::vector<std::string>& args);

/// Long-running CLI process whose first stdout line is read eagerly.
struct Child {
  pid_t pid = -1;
  int out_fd = -1;
  std::string first_line;
};
Child spawn_cli(const std::vector<std::string>& args);
/// Sends `sig` and reaps; returns the raw wait status.
int kill_child(Child& child, int sig);

std::string cli_path();

}  // namespace testing_support
