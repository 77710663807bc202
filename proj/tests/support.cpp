#include "support.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <deque>
#include <functional>
#include <stdexcept>

#include "attestgate/detectors.hpp"

extern char** environ;

namespace testing_support {

namespace fs = std::filesystem;

TempDir::TempDir() {
  std::random_device rd;
  path_ = fs::temp_directory_path() / ("attestgate-test-" + std::to_string(rd()) + std::to_string(::getpid()));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

Bytes random_bytes(std::mt19937_64& rng, std::size_t n) {
  Bytes out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

ControlFlowGraph random_graph(std::mt19937_64& rng, std::size_t max_nodes) {
  std::uniform_int_distribution<std::size_t> count(1, max_nodes);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto n = count(rng);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  double density = 0.08 + 0.3 * unit(rng);

  ControlFlowGraph g;
  auto entry = pick(rng);
  for (std::size_t i = 0; i < n; ++i) {
    CfgNode node{"n" + std::to_string(i), {}};
    if (i == entry) node.labels.insert(label::kEntry);
    if (unit(rng) < 0.25) node.labels.insert(label::kAuthCheck);
    if (unit(rng) < 0.3) node.labels.insert(label::kPrivileged);
    g.nodes.push_back(node);
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (unit(rng) < density) g.edges.emplace_back(g.nodes[a].id, g.nodes[b].id);
    }
  }
  auto sites = rng() % 3;
  for (std::size_t s = 0; s < sites; ++s) {
    g.static_compares.push_back({g.nodes[pick(rng)].id, random_bytes(rng, 1 + rng() % 8)});
  }
  return g;
}

namespace {

struct Adjacency {
  std::map<std::string, std::vector<std::string>> succ;
  std::map<std::string, const CfgNode*> nodes;
  std::string entry;
};

Adjacency adjacency(const ControlFlowGraph& cfg) {
  Adjacency a;
  for (const auto& n : cfg.nodes) {
    a.nodes[n.id] = &n;
    a.succ[n.id];
    if (n.has(label::kEntry)) a.entry = n.id;
  }
  for (const auto& [from, to] : cfg.edges) a.succ[from].push_back(to);
  return a;
}

std::set<std::string> bfs(const Adjacency& a, const std::string& start, const std::string& removed) {
  std::set<std::string> seen;
  if (start == removed) return seen;
  std::deque<std::string> queue{start};
  seen.insert(start);
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (const auto& w : a.succ.at(v)) {
      if (w == removed || seen.contains(w)) continue;
      seen.insert(w);
      queue.push_back(w);
    }
  }
  return seen;
}

}  // namespace

std::set<std::string> oracle_auth_bypass(const ControlFlowGraph& cfg) {
  auto a = adjacency(cfg);
  std::set<std::string> found;
  std::set<std::string> on_path;
  std::function<void(const std::string&)> walk = [&](const std::string& v) {
    if (a.nodes.at(v)->has(label::kAuthCheck)) return;
    if (a.nodes.at(v)->has(label::kPrivileged)) found.insert(v);
    on_path.insert(v);
    for (const auto& w : a.succ.at(v)) {
      if (!on_path.contains(w)) walk(w);
    }
    on_path.erase(v);
  };
  walk(a.entry);
  return found;
}

std::set<std::string> oracle_guarded(const ControlFlowGraph& cfg, const std::string& site) {
  auto a = adjacency(cfg);
  auto from_site = bfs(a, site, "");
  auto from_entry_without_site = bfs(a, a.entry, site);
  std::set<std::string> out;
  for (const auto& v : from_site) {
    if (v != site && !from_entry_without_site.contains(v)) out.insert(v);
  }
  return out;
}

double oracle_static_score(const ControlFlowGraph& cfg) {
  double best = 0.0;
  for (const auto& s : cfg.static_compares) {
    best = std::max(best, static_cast<double>(oracle_guarded(cfg, s.node).size()) / cfg.nodes.size());
  }
  return best;
}

FirmwareBundle random_bundle(std::mt19937_64& rng, std::size_t max_components) {
  FirmwareBundle b;
  b.name = "rand-" + std::to_string(rng() % 1000);
  b.version = std::to_string(rng() % 10) + "." + std::to_string(rng() % 10);
  b.device_class = "web-server";
  auto n = 1 + rng() % max_components;
  std::set<std::string> names;
  while (names.size() < n) names.insert("c" + std::to_string(rng() % 1000));
  for (const auto& name : names) b.components.emplace_back(name, random_bytes(rng, 1 + rng() % 512));
  std::shuffle(b.components.begin(), b.components.end(), rng);
  return b;
}

Inspector make_inspector(const std::string& org, std::uint8_t seed_byte) {
  std::array<std::uint8_t, 32> seed{};
  seed.fill(seed_byte);
  Inspector i{org, SigningKey::from_seed(seed), {}};
  i.trust.add(org, "k1", i.key.public_key());
  return i;
}

CertificateBody synthetic_body(const FirmwareBundle& bundle, const std::string& org, const std::vector<double>& scores,
                               std::int64_t issued_at) {
  static const std::vector<std::pair<std::string, std::set<std::string>>> kAlgorithms = {
      {std::string(algorithm::kAuthBypass), {backdoor_type::kAuthBypass}},
      {std::string(algorithm::kStaticCompare), {backdoor_type::kHiddenCredential, backdoor_type::kHiddenFunctionality}},
      {std::string(algorithm::kCredentialScan), {backdoor_type::kHiddenCredential}},
      {std::string(algorithm::kProfileDeviation), {backdoor_type::kHiddenFunctionality}},
      {std::string(algorithm::kVulnLookup), {backdoor_type::kKnownVulnerability}},
  };
  CertificateBody body;
  body.software_digest = hash_bundle(bundle);
  body.bundle_name = bundle.name;
  body.bundle_version = bundle.version;
  body.device_class = bundle.device_class;
  body.inspector_org = org;
  body.engineer = "inspector-on-duty";
  body.issued_at = issued_at;
  std::vector<std::string> scope;
  for (const auto& c : body.software_digest.components) scope.push_back(c.name);
  body.supply_chain.emplace();
  for (const auto& name : scope) body.supply_chain->push_back({name, "Acme Firmware"});
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const auto& [algo, types] = kAlgorithms[i % kAlgorithms.size()];
    InspectionEntry e;
    e.algorithm = algo;
    e.backdoor_types = types;
    e.component_scope = scope;
    e.score = scores[i];
    e.verdict = VerdictCuts{}.classify(scores[i]);
    e.scope_digest = body.software_digest.aggregate;
    if (scores[i] > 0.0) e.findings.push_back({scope.front(), "n0", "synthetic", "", scores[i]});
    body.covered_backdoor_types.insert(types.begin(), types.end());
    body.inspection_entries.push_back(e);
  }
  return body;
}

SecurityPolicy permissive_policy(const std::string& trusted_org) {
  SecurityPolicy p;
  p.trusted_orgs = {trusted_org};
  return p;
}

PolicyTriple random_policy_triple(std::mt19937_64& rng) {
  static const std::vector<std::string> kTypes = {backdoor_type::kAuthBypass, backdoor_type::kHiddenCredential,
                                                  backdoor_type::kHiddenFunctionality,
                                                  backdoor_type::kKnownVulnerability};
  static const std::vector<std::string> kAlgos = {
      std::string(algorithm::kAuthBypass), std::string(algorithm::kStaticCompare),
      std::string(algorithm::kCredentialScan), std::string(algorithm::kProfileDeviation),
      std::string(algorithm::kVulnLookup)};
  static const std::vector<std::string> kSuppliers = {"Acme Firmware", "Silicon Boot Co", "Cheap Blobs Ltd"};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto coin = [&](double p = 0.5) { return unit(rng) < p; };

  static const auto lab = make_inspector("Lab", 11);
  static const auto other = make_inspector("Other", 12);
  static const auto outsider = make_inspector("Outsider", 13);

  PolicyTriple t;
  for (const auto* who : {&lab, &other, &outsider}) t.trust.add(who->org, "k1", who->key.public_key());

  auto& b = t.b;
  for (const auto& ty : kTypes) {
    if (coin(0.25)) b.required_backdoor_types.insert(ty);
  }
  for (const auto& al : kAlgos) {
    if (coin(0.2)) b.required_algorithms.push_back({al, coin(0.3) ? Json{{"grey_cut", 0.3}} : Json::object()});
  }
  b.trusted_orgs = {"Lab"};
  if (coin()) b.trusted_orgs.insert("Other");
  if (coin(0.4)) {
    b.trusted_suppliers.emplace();
    for (const auto& s : kSuppliers) {
      if (s == "Acme Firmware" || coin(0.5)) b.trusted_suppliers->insert(s);
    }
  }
  b.deny_threshold = 0.5 + 0.5 * unit(rng);
  b.grey_threshold = unit(rng) * b.deny_threshold;
  b.require_engineer_record = coin();

  auto& a = t.a;
  for (const auto& ty : b.required_backdoor_types) {
    if (coin(0.7)) a.required_backdoor_types.insert(ty);
  }
  for (const auto& r : b.required_algorithms) {
    if (coin(0.7)) a.required_algorithms.push_back({r.algorithm, coin(0.7) ? r.parameters : Json::object()});
  }
  a.trusted_orgs = b.trusted_orgs;
  if (coin()) a.trusted_orgs.insert("Spare");  // trusted by A only; issues nothing
  if (b.trusted_suppliers && coin(0.7)) {
    a.trusted_suppliers = b.trusted_suppliers;
    if (coin()) a.trusted_suppliers->insert(kSuppliers[rng() % kSuppliers.size()]);
  }
  a.deny_threshold = b.deny_threshold + (1.0 - b.deny_threshold) * unit(rng);
  a.grey_threshold = unit(rng) * a.deny_threshold;
  a.require_engineer_record = b.require_engineer_record && coin();

  auto bundle = random_bundle(rng, 3);
  t.attestation.ok = !coin(0.1);
  t.attestation.device_id = "dev";
  t.attestation.software = hash_bundle(bundle);
  if (!t.attestation.ok) t.attestation.error = "simulated attestation failure";
  t.fetch.available = !coin(0.1);

  auto n = 1 + rng() % 3;
  std::vector<Digest> issued;
  for (std::size_t i = 0; i < n; ++i) {
    const auto* who = coin(0.6) ? &lab : coin() ? &other : &outsider;
    std::vector<double> scores;
    auto entries = 3 + rng() % 5;
    for (std::size_t k = 0; k < entries; ++k) scores.push_back(coin(0.75) ? 0.0 : unit(rng));
    auto target = coin(0.85) ? bundle : random_bundle(rng, 3);
    auto body = synthetic_body(target, who->org, scores, 1000 + static_cast<std::int64_t>(rng() % 5));
    if (coin(0.15)) body.engineer.reset();
    if (coin(0.15)) {
      for (auto& s : *body.supply_chain) s.supplier = kSuppliers[rng() % kSuppliers.size()];
    }
    if (!issued.empty() && coin(0.3)) body.supersedes = issued[rng() % issued.size()];
    auto cert = sign_certificate(body, who->key, "k1");
    if (coin(0.05)) cert.signature[0] ^= 1;
    issued.push_back(cert.body_digest);
    t.fetch.certificates.push_back(cert);
  }
  a.validate();
  b.validate();
  return t;
}

std::string cli_path() { return ATTESTGATE_CLI_PATH; }

namespace {

pid_t spawn_with_pipe(const std::vector<std::string>& args, int& out_fd) {
  int fds[2];
  if (::pipe(fds) != 0) throw std::runtime_error("pipe failed");
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
  posix_spawn_file_actions_addclose(&actions, fds[0]);
  posix_spawn_file_actions_addclose(&actions, fds[1]);
  posix_spawn_file_actions_addopen(&actions, STDERR_FILENO, "/dev/null", O_WRONLY, 0);

  std::vector<std::string> full{cli_path()};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : full) argv.push_back(a.data());
  argv.push_back(nullptr);

  pid_t pid = -1;
  int rc = posix_spawn(&pid, argv[0], &actions, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw std::runtime_error("posix_spawn failed");
  }
  out_fd = fds[0];
  return pid;
}

}  // namespace

ProcResult run_cli(const std::vector<std::string>& args) {
  int fd = -1;
  pid_t pid = spawn_with_pipe(args, fd);
  ProcResult r;
  char buf[4096];
  for (ssize_t n; (n = ::read(fd, buf, sizeof buf)) > 0;) r.out.append(buf, static_cast<std::size_t>(n));
  ::close(fd);
  int status = 0;
  ::waitpid(pid, &status, 0);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

Child spawn_cli(const std::vector<std::string>& args) {
  Child c;
  c.pid = spawn_with_pipe(args, c.out_fd);
  char ch = 0;
  pollfd pfd{c.out_fd, POLLIN, 0};
  while (::poll(&pfd, 1, 10000) > 0 && ::read(c.out_fd, &ch, 1) == 1 && ch != '\n') c.first_line.push_back(ch);
  return c;
}

int kill_child(Child& child, int sig) {
  int status = 0;
  if (child.pid > 0) {
    ::kill(child.pid, sig);
    ::waitpid(child.pid, &status, 0);
    child.pid = -1;
  }
  if (child.out_fd >= 0) {
    ::close(child.out_fd);
    child.out_fd = -1;
  }
  return status;
}

}  // namespace testing_support
