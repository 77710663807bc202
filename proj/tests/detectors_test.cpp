#include <gtest/gtest.h>

#include "attestgate/detectors.hpp"
#include "attestgate/error.hpp"
#include "attestgate/inspection.hpp"
#include "attestgate/scenario.hpp"
#include "support.hpp"

using namespace attestgate;
using namespace testing_support;

namespace {

template <class F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::ExpectationFailure;
}

ControlFlowGraph graph(std::vector<CfgNode> nodes, std::vector<std::pair<std::string, std::string>> edges,
                       std::vector<StaticCompare> compares = {}) {
  return {std::move(nodes), std::move(edges), std::move(compares)};
}

std::set<std::string> bypassed(const ControlFlowGraph& g) {
  std::set<std::string> out;
  for (const auto& w : find_auth_bypasses(g)) out.insert(w.privileged);
  return out;
}

}  // namespace

TEST(Cfg, ValidationErrors) {
  EXPECT_EQ(error_of([] { validate(graph({{"a", {"entry"}}, {"a", {}}}, {})); }), Errc::MalformedGraph);
  EXPECT_EQ(error_of([] { validate(graph({{"a", {"entry", "bogus"}}}, {})); }), Errc::MalformedGraph);
  EXPECT_EQ(error_of([] { validate(graph({{"a", {}}}, {})); }), Errc::MalformedGraph);
  EXPECT_EQ(error_of([] { validate(graph({{"a", {"entry"}}, {"b", {"entry"}}}, {})); }), Errc::MalformedGraph);
  EXPECT_EQ(error_of([] { validate(graph({{"a", {"entry"}}}, {{"a", "zz"}})); }), Errc::MalformedGraph);
  EXPECT_EQ(error_of([] { validate(graph({{"a", {"entry"}}}, {}, {{"zz", to_bytes("x")}})); }), Errc::MalformedGraph);
}

TEST(AuthBypass, GuardedPrivilegedNodeIsClean) {
  auto g = graph({{"e", {"entry"}}, {"a", {"auth-check"}}, {"p", {"privileged"}}}, {{"e", "a"}, {"a", "p"}});
  EXPECT_TRUE(find_auth_bypasses(g).empty());
  EXPECT_EQ(detect_auth_bypass(g).score, 0.0);
}

TEST(AuthBypass, UnguardedEdgeIsReportedWithWitness) {
  auto g = graph({{"e", {"entry"}}, {"a", {"auth-check"}}, {"m", {}}, {"p", {"privileged"}}},
                 {{"e", "a"}, {"a", "p"}, {"e", "m"}, {"m", "p"}});
  auto found = find_auth_bypasses(g);
  ASSERT_EQ(found.size(), 1u);
  EXPECT_EQ(found[0].privileged, "p");
  EXPECT_EQ(found[0].path, (std::vector<std::string>{"e", "m", "p"}));
  auto r = detect_auth_bypass(g, "fw");
  EXPECT_EQ(r.score, 1.0);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].component, "fw");
  EXPECT_EQ(r.findings[0].location, "p");
}

TEST(AuthBypass, CyclesAndUnreachableNodes) {
  auto g = graph({{"e", {"entry"}}, {"x", {}}, {"y", {}}, {"p", {"privileged"}}, {"q", {"privileged"}}},
                 {{"e", "x"}, {"x", "y"}, {"y", "x"}, {"y", "p"}, {"q", "p"}});
  EXPECT_EQ(bypassed(g), (std::set<std::string>{"p"}));
}

TEST(AuthBypass, PropertyMatchesPathEnumerationOracle) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    auto g = random_graph(rng, 10);
    auto found = find_auth_bypasses(g);
    std::set<std::string> ids;
    for (const auto& w : found) {
      ids.insert(w.privileged);
      // Witness must be a real edge path from entry avoiding auth checks.
      ASSERT_FALSE(w.path.empty());
      EXPECT_EQ(w.path.back(), w.privileged);
      std::set<std::pair<std::string, std::string>> edges(g.edges.begin(), g.edges.end());
      for (std::size_t k = 0; k + 1 < w.path.size(); ++k) EXPECT_TRUE(edges.contains({w.path[k], w.path[k + 1]}));
      for (const auto& n : g.nodes) {
        if (std::find(w.path.begin(), w.path.end(), n.id) != w.path.end()) EXPECT_FALSE(n.has(label::kAuthCheck));
        if (n.id == w.path.front()) EXPECT_TRUE(n.has(label::kEntry));
      }
    }
    EXPECT_EQ(ids, oracle_auth_bypass(g)) << Json(g).dump();
  }
}

TEST(StaticCompare, DiamondGuardsNothingBeyondDominance) {
  // e -> c -> {a, b} -> j ; e -> j. c dominates a and b but not j.
  auto g = graph({{"e", {"entry"}}, {"c", {}}, {"a", {}}, {"b", {}}, {"j", {}}},
                 {{"e", "c"}, {"c", "a"}, {"c", "b"}, {"a", "j"}, {"b", "j"}, {"e", "j"}}, {{"c", to_bytes("k")}});
  auto sites = analyze_static_compares(g);
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].guarded, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(sites[0].weight, 2.0 / 5.0);
  EXPECT_DOUBLE_EQ(score_static_compares(g).score, 0.4);
}

TEST(StaticCompare, SiteUnreachableFromEntry) {
  auto g = graph({{"e", {"entry"}}, {"s", {}}, {"h", {}}, {"x", {}}}, {{"s", "h"}, {"s", "x"}, {"e", "x"}},
                 {{"s", to_bytes("magic")}});
  auto sites = analyze_static_compares(g);
  ASSERT_EQ(sites.size(), 1u);
  EXPECT_EQ(sites[0].guarded, (std::vector<std::string>{"h"}));
}

TEST(StaticCompare, PropertyMatchesNodeRemovalOracle) {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 300; ++i) {
    auto g = random_graph(rng, 12);
    for (const auto& site : analyze_static_compares(g)) {
      auto oracle = oracle_guarded(g, site.node);
      EXPECT_EQ(std::set<std::string>(site.guarded.begin(), site.guarded.end()), oracle) << Json(g).dump();
      EXPECT_GE(site.weight, 0.0);
      EXPECT_LE(site.weight, 1.0);
    }
    EXPECT_DOUBLE_EQ(score_static_compares(g).score, oracle_static_score(g));
  }
}

TEST(CredentialScan, OverlappingMatchesSortedByOffset) {
  Component c("fw", to_bytes("xaaaybab"));
  std::vector<Bytes> patterns{to_bytes("b"), to_bytes("aa")};
  auto r = scan_credentials(c, patterns);
  ASSERT_EQ(r.findings.size(), 4u);
  EXPECT_EQ(r.findings[0].location, "offset:1");
  EXPECT_EQ(r.findings[1].location, "offset:2");
  EXPECT_EQ(r.findings[2].location, "offset:5");
  EXPECT_EQ(r.findings[3].location, "offset:7");
  EXPECT_EQ(r.score, 1.0);
}

TEST(CredentialScan, CleanAndBadParameters) {
  Component c("fw", to_bytes("nothing to see"));
  std::vector<Bytes> patterns{to_bytes("root:toor")};
  EXPECT_EQ(scan_credentials(c, patterns).score, 0.0);
  EXPECT_EQ(error_of([&] { scan_credentials(c, std::vector<Bytes>{}); }), Errc::BadParameters);
  EXPECT_EQ(error_of([&] { scan_credentials(c, std::vector<Bytes>{Bytes{}}); }), Errc::BadParameters);
}

TEST(CredentialScan, PropertyFindsEveryPlantedOccurrence) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    auto content = random_bytes(rng, 200);
    auto pattern = random_bytes(rng, 1 + rng() % 4);
    std::size_t expected = 0;
    for (std::size_t k = 0; k + pattern.size() <= content.size(); ++k) {
      if (std::equal(pattern.begin(), pattern.end(), content.begin() + static_cast<long>(k))) ++expected;
    }
    auto r = scan_credentials(Component("x", content), std::vector<Bytes>{pattern});
    EXPECT_EQ(r.findings.size(), expected);
  }
}

TEST(ProfileDeviation, ForbiddenCapabilitiesScoreHalfEach) {
  auto ctx = InspectionContext::defaults();
  FirmwareBundle b{"srv", "1", "web-server", {}};
  b.components.emplace_back("httpd", to_bytes("HTTP/1.1 200"));
  auto profile = *ctx.profile_for("web-server");
  auto clean = profile_deviation(b, extract_capabilities(b, ctx.capability_signatures), profile);
  EXPECT_EQ(clean.score, 0.0);

  b.components.emplace_back("debug", to_bytes("gdbserver :1234"));
  auto one = profile_deviation(b, extract_capabilities(b, ctx.capability_signatures), profile);
  EXPECT_DOUBLE_EQ(one.score, 0.5);

  b.components.emplace_back("shell", to_bytes("telnetd -l /bin/sh -i"));
  auto many = profile_deviation(b, extract_capabilities(b, ctx.capability_signatures), profile);
  EXPECT_DOUBLE_EQ(many.score, 1.0);
}

TEST(ProfileDeviation, WrongClassIsProfileMismatch) {
  auto ctx = InspectionContext::defaults();
  FirmwareBundle b{"cam", "1", "ip-camera", {}};
  b.components.emplace_back("x", to_bytes("RTSP/1.0"));
  EXPECT_EQ(error_of([&] { profile_deviation(b, {}, *ctx.profile_for("router")); }), Errc::ProfileMismatch);
}

TEST(VulnLookup, MatchesByContentDigest) {
  Component c("libssl", to_bytes("old openssl"));
  AdvisoryDb db;
  db.advisories[c.digest()] = {"ADV-2014-0160"};
  auto r = vuln_lookup(c, db);
  ASSERT_EQ(r.findings.size(), 1u);
  EXPECT_EQ(r.findings[0].detail, "ADV-2014-0160");
  EXPECT_EQ(r.findings[0].location, to_hex(c.digest()));
  EXPECT_EQ(vuln_lookup(Component("libssl", to_bytes("patched")), db).score, 0.0);
  EXPECT_EQ(AdvisoryDb::from_json(db.to_json()).advisories, db.advisories);
}

// --- suite level --------------------------------------------------------------

TEST(Inspection, DefaultSuiteOnCleanBundleIsAllClean) {
  std::mt19937_64 rng(1);
  auto b = generate_bundle(FixtureKind::Clean, 3, "web-server", rng);
  auto entries = run_inspection(b, default_suite(), InspectionContext::defaults());
  ASSERT_EQ(entries.size(), 5u);
  for (const auto& e : entries) {
    EXPECT_EQ(e.verdict, Verdict::Clean) << e.algorithm;
    EXPECT_EQ(e.scope_digest, hash_bundle(b).aggregate);
    EXPECT_TRUE(e.parameters.contains("grey_cut"));
  }
  EXPECT_TRUE(entries[2].parameters.contains("patterns"));
  EXPECT_TRUE(entries[3].parameters.contains("profile_db_sha256"));
  EXPECT_TRUE(entries[4].parameters.contains("advisory_db_sha256"));
}

TEST(Inspection, GeneratedFixturesHaveIntendedVerdicts) {
  std::mt19937_64 rng(2);
  auto worst = [](const std::vector<InspectionEntry>& es) {
    Verdict v = Verdict::Clean;
    for (const auto& e : es) v = std::max(v, e.verdict);
    return v;
  };
  auto ctx = InspectionContext::defaults();
  EXPECT_EQ(worst(run_inspection(generate_bundle(FixtureKind::Grey, 3, "web-server", rng), default_suite(), ctx)),
            Verdict::Grey);
  EXPECT_EQ(worst(run_inspection(generate_bundle(FixtureKind::Backdoor, 3, "web-server", rng), default_suite(), ctx)),
            Verdict::BackdoorFound);
}

TEST(Inspection, ParameterErrors) {
  FirmwareBundle b{"x", "1", "web-server", {}};
  b.components.emplace_back("a", to_bytes("HTTP/1.1"));
  auto ctx = InspectionContext::defaults();
  auto run = [&](std::string algo, Json params) { run_inspection(b, {{std::move(algo), std::move(params)}}, ctx); };
  EXPECT_EQ(error_of([&] { run("no-such@1", Json::object()); }), Errc::UnknownAlgorithm);
  EXPECT_EQ(error_of([&] { run(std::string(algorithm::kAuthBypass), {{"depth", 3}}); }), Errc::BadParameters);
  EXPECT_EQ(error_of([&] { run(std::string(algorithm::kAuthBypass), {{"grey_cut", 0.9}}); }), Errc::BadParameters);
  EXPECT_EQ(error_of([&] { run(std::string(algorithm::kCredentialScan), {{"patterns", ""}}); }), Errc::BadParameters);
  EXPECT_EQ(error_of([&] { run(std::string(algorithm::kCredentialScan), {{"patterns", Json::array()}}); }),
            Errc::BadParameters);
  EXPECT_EQ(error_of([&] { run(std::string(algorithm::kVulnLookup), {{"advisory_db_sha256", "00"}}); }),
            Errc::BadParameters);
}

TEST(Inspection, CustomCutsChangeVerdictOnly) {
  std::mt19937_64 rng(3);
  auto b = generate_bundle(FixtureKind::Grey, 2, "web-server", rng);
  auto ctx = InspectionContext::defaults();
  auto normal = run_inspection(b, {{std::string(algorithm::kStaticCompare), Json::object()}}, ctx);
  auto strict = run_inspection(b, {{std::string(algorithm::kStaticCompare), {{"backdoor_cut", 0.5}}}}, ctx);
  EXPECT_EQ(normal[0].score, strict[0].score);
  EXPECT_EQ(normal[0].verdict, Verdict::Grey);
  EXPECT_EQ(strict[0].verdict, Verdict::BackdoorFound);
}

TEST(Inspection, IssueRejectsEntriesFromAnotherBundle) {
  std::mt19937_64 rng(4);
  auto b = generate_bundle(FixtureKind::Clean, 2, "web-server", rng);
  auto other = generate_bundle(FixtureKind::Clean, 2, "web-server", rng);
  auto ctx = InspectionContext::defaults();
  auto entries = run_inspection(other, default_suite(), ctx);
  auto inspector = make_inspector("Lab", 9);
  EXPECT_EQ(error_of([&] { issue_certificate(b, entries, "Lab", inspector.key, "k1"); }), Errc::DigestMismatch);

  auto own = run_inspection(b, default_suite(), ctx);
  IssueOptions opts;
  opts.include_supply_chain = true;
  opts.engineer = "r.roe";
  auto cert = issue_certificate(b, own, "Lab", inspector.key, "k1", opts);
  auto v = verify_certificate(cert, inspector.trust);
  EXPECT_EQ(v.body.software_digest, hash_bundle(b));
  EXPECT_EQ(v.body.covered_backdoor_types.size(), 4u);
  ASSERT_TRUE(v.body.supply_chain.has_value());
  EXPECT_EQ(v.body.supply_chain->size(), 2u);
}

namespace {

FirmwareBundle updated(const FirmwareBundle& b, std::mt19937_64& rng, std::size_t* changed) {
  auto out = b;
  *changed = 0;
  for (auto& c : out.components) {
    if (rng() % 3 == 0) {
      auto content = c.content();
      content.push_back(static_cast<std::uint8_t>('A' + rng() % 26));
      if (rng() % 4 == 0) content.insert(content.end(), {'a', 'd', 'm', 'i', 'n', '_', 'p', 'a', 's', 's', 'w', 'o', 'r', 'd', '='});
      c.set_content(content);
      ++*changed;
    }
  }
  return out;
}

}  // namespace

TEST(Reinspect, PropertyEqualsFullInspectionWithFewerRuns) {
  std::mt19937_64 rng(31);
  auto ctx = InspectionContext::defaults();
  std::vector<SuiteItem> local_suite;
  for (const auto& item : default_suite()) {
    if (find_detector(item.algorithm).component_local()) local_suite.push_back(item);
  }
  for (int i = 0; i < 40; ++i) {
    auto kind = static_cast<FixtureKind>(rng() % 3);
    auto b = generate_bundle(kind, 2 + rng() % 4, "web-server", rng);
    auto old_entries = run_inspection(b, local_suite, ctx);
    std::size_t changed = 0;
    auto nb = updated(b, rng, &changed);

    InspectionStats full_stats, partial_stats;
    auto full = run_inspection(nb, local_suite, ctx, &full_stats);
    auto partial = reinspect_updated(b, nb, old_entries, local_suite, ctx, &partial_stats);
    EXPECT_EQ(partial, full);
    if (changed < nb.components.size()) EXPECT_LT(partial_stats.detector_runs, full_stats.detector_runs);
    if (changed == 0) EXPECT_EQ(partial_stats.detector_runs, 0u);
  }
}

TEST(Reinspect, SidecarChangeTriggersRerun) {
  std::mt19937_64 rng(8);
  auto b = generate_bundle(FixtureKind::Clean, 3, "web-server", rng);
  auto ctx = InspectionContext::defaults();
  std::vector<SuiteItem> suite{{std::string(algorithm::kAuthBypass), Json::object()}};
  auto old_entries = run_inspection(b, suite, ctx);
  auto nb = b;
  auto& g = *nb.components[0].cfg;
  g.edges.emplace_back(g.nodes[0].id, g.nodes[3].id);  // entry -> privileged
  InspectionStats stats;
  auto entries = reinspect_updated(b, nb, old_entries, suite, ctx, &stats);
  EXPECT_EQ(stats.detector_runs, 1u);
  EXPECT_EQ(entries[0].verdict, Verdict::BackdoorFound);
}

TEST(Reinspect, StaleEntriesRejected) {
  std::mt19937_64 rng(9);
  auto b = generate_bundle(FixtureKind::Clean, 2, "web-server", rng);
  auto other = generate_bundle(FixtureKind::Clean, 2, "web-server", rng);
  auto ctx = InspectionContext::defaults();
  auto entries = run_inspection(other, default_suite(), ctx);
  EXPECT_EQ(error_of([&] { reinspect_updated(b, b, entries, default_suite(), ctx); }), Errc::DigestMismatch);
}

TEST(Reinspect, RemovedComponentFindingsDropped) {
  std::mt19937_64 rng(10);
  auto b = generate_bundle(FixtureKind::Backdoor, 3, "web-server", rng);
  auto ctx = InspectionContext::defaults();
  std::vector<SuiteItem> suite{{std::string(algorithm::kCredentialScan), Json::object()}};
  auto old_entries = run_inspection(b, suite, ctx);
  ASSERT_EQ(old_entries[0].verdict, Verdict::BackdoorFound);
  auto nb = b;
  nb.components.pop_back();  // the backdoored component
  InspectionStats stats;
  auto entries = reinspect_updated(b, nb, old_entries, suite, ctx, &stats);
  EXPECT_EQ(stats.detector_runs, 0u);
  EXPECT_EQ(entries[0].verdict, Verdict::Clean);
  EXPECT_EQ(entries, run_inspection(nb, suite, ctx));
}
