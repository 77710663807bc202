#include "attestgate/detectors.hpp"

#include <algorithm>
#include <deque>
#include <functional>

#include "attestgate/error.hpp"

namespace attestgate {

namespace {

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& id : path) {
    if (!out.empty()) out += " -> ";
    out += id;
  }
  return out;
}

std::vector<bool> reachable_from(const IndexedGraph& g, std::size_t start,
                                 const std::vector<bool>& blocked) {
  std::vector<bool> seen(g.size(), false);
  if (blocked[start]) return seen;
  std::vector<std::size_t> stack{start};
  seen[start] = true;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    for (auto w : g.succ[v]) {
      if (!seen[w] && !blocked[w]) {
        seen[w] = true;
        stack.push_back(w);
      }
    }
  }
  return seen;
}

// Cooper, Harvey & Kennedy iterative dominators. idom[v] == npos for nodes
// unreachable from entry; idom[entry] == entry.
std::vector<std::size_t> immediate_dominators(const IndexedGraph& g) {
  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> order;  // postorder
  std::vector<std::size_t> post_index(g.size(), npos);
  std::vector<bool> visited(g.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> stack{{g.entry, 0}};
  visited[g.entry] = true;
  while (!stack.empty()) {
    auto& [v, next] = stack.back();
    if (next < g.succ[v].size()) {
      auto w = g.succ[v][next++];
      if (!visited[w]) {
        visited[w] = true;
        stack.emplace_back(w, 0);
      }
    } else {
      post_index[v] = order.size();
      order.push_back(v);
      stack.pop_back();
    }
  }

  std::vector<std::size_t> idom(g.size(), npos);
  idom[g.entry] = g.entry;
  auto intersect = [&](std::size_t a, std::size_t b) {
    while (a != b) {
      while (post_index[a] < post_index[b]) a = idom[a];
      while (post_index[b] < post_index[a]) b = idom[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      auto v = *it;
      if (v == g.entry) continue;
      auto new_idom = npos;
      for (auto p : g.pred[v]) {
        if (idom[p] == npos) continue;
        new_idom = new_idom == npos ? p : intersect(p, new_idom);
      }
      if (new_idom != idom[v]) {
        idom[v] = new_idom;
        changed = true;
      }
    }
  }
  return idom;
}

}  // namespace

std::vector<BypassWitness> find_auth_bypasses(const ControlFlowGraph& cfg) {
  auto g = index_graph(cfg);
  std::vector<bool> auth(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) auth[i] = cfg.nodes[i].has(label::kAuthCheck);

  std::vector<BypassWitness> out;
  if (auth[g.entry]) return out;

  constexpr auto npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(g.size(), npos);
  std::vector<bool> seen(g.size(), false);
  std::deque<std::size_t> queue{g.entry};
  seen[g.entry] = true;
  while (!queue.empty()) {
    auto v = queue.front();
    queue.pop_front();
    for (auto w : g.succ[v]) {
      if (seen[w] || auth[w]) continue;
      seen[w] = true;
      parent[w] = v;
      queue.push_back(w);
    }
  }

  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!seen[i] || !cfg.nodes[i].has(label::kPrivileged)) continue;
    BypassWitness witness{g.ids[i], {}};
    for (auto v = i; v != npos; v = parent[v]) witness.path.push_back(g.ids[v]);
    std::reverse(witness.path.begin(), witness.path.end());
    out.push_back(std::move(witness));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.privileged < b.privileged; });
  return out;
}

DetectorResult detect_auth_bypass(const ControlFlowGraph& cfg, std::string_view component) {
  DetectorResult result;
  for (auto& w : find_auth_bypasses(cfg)) {
    result.findings.push_back({std::string(component), w.privileged, "auth-bypass",
                               "unguarded path: " + join_path(w.path), 1.0});
  }
  result.score = result.findings.empty() ? 0.0 : 1.0;
  return result;
}

std::vector<CompareSiteReport> analyze_static_compares(const ControlFlowGraph& cfg) {
  auto g = index_graph(cfg);
  std::vector<CompareSiteReport> out;
  if (cfg.static_compares.empty()) return out;

  constexpr auto npos = static_cast<std::size_t>(-1);
  auto idom = immediate_dominators(g);
  std::vector<bool> none_blocked(g.size(), false);

  auto strictly_dominates = [&](std::size_t c, std::size_t v) {
    if (idom[v] == npos || v == c) return false;
    while (v != g.entry) {
      v = idom[v];
      if (v == c) return true;
    }
    return false;
  };

  for (const auto& site : cfg.static_compares) {
    auto c = g.index.at(site.node);
    CompareSiteReport report{site.node, site.literal, {}, 0.0};
    if (idom[c] != npos) {
      for (std::size_t v = 0; v < g.size(); ++v) {
        if (strictly_dominates(c, v)) report.guarded.push_back(g.ids[v]);
      }
    } else {
      // Site unreachable from entry: everything it reaches that entry cannot.
      auto from_site = reachable_from(g, c, none_blocked);
      for (std::size_t v = 0; v < g.size(); ++v) {
        if (v != c && from_site[v] && idom[v] == npos) report.guarded.push_back(g.ids[v]);
      }
    }
    std::sort(report.guarded.begin(), report.guarded.end());
    report.weight = static_cast<double>(report.guarded.size()) / static_cast<double>(g.size());
    out.push_back(std::move(report));
  }
  return out;
}

DetectorResult score_static_compares(const ControlFlowGraph& cfg, std::string_view component) {
  DetectorResult result;
  for (const auto& site : analyze_static_compares(cfg)) {
    if (site.weight <= 0.0) continue;
    result.score = std::max(result.score, site.weight);
    result.findings.push_back({std::string(component), site.node, "static-compare",
                               "literal " + to_hex(site.literal) + " guards " +
                                   std::to_string(site.guarded.size()) + " node(s)",
                               site.weight});
  }
  return result;
}

DetectorResult scan_credentials(const Component& component, std::span<const Bytes> patterns) {
  if (patterns.empty()) throw Error(Errc::BadParameters, "credential scan needs at least one pattern");
  const auto& content = component.content();
  std::vector<std::pair<std::size_t, std::size_t>> hits;  // (offset, pattern index)
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    const auto& pattern = patterns[p];
    if (pattern.empty()) throw Error(Errc::BadParameters, "credential pattern must not be empty");
    std::boyer_moore_horspool_searcher searcher(pattern.begin(), pattern.end());
    for (auto it = std::search(content.begin(), content.end(), searcher); it != content.end();
         it = std::search(it + 1, content.end(), searcher)) {
      hits.emplace_back(static_cast<std::size_t>(it - content.begin()), p);
    }
  }
  std::sort(hits.begin(), hits.end());

  DetectorResult result;
  for (auto [offset, p] : hits) {
    result.findings.push_back({component.name, "offset:" + std::to_string(offset), "hidden-credential",
                               "matched pattern " + to_hex(patterns[p]), 1.0});
  }
  result.score = result.findings.empty() ? 0.0 : 1.0;
  return result;
}

CapabilityMap extract_capabilities(const FirmwareBundle& bundle, const CapabilitySignatures& signatures) {
  CapabilityMap out;
  for (const auto& c : bundle.components) {
    auto& caps = out[c.name];
    for (const auto& [capability, signature] : signatures) {
      if (signature.empty()) continue;
      auto it = std::search(c.content().begin(), c.content().end(), signature.begin(), signature.end());
      if (it != c.content().end()) caps.insert(capability);
    }
  }
  return out;
}

DetectorResult profile_deviation(const FirmwareBundle& bundle, const CapabilityMap& capabilities,
                                 const DeviceClassProfile& profile) {
  if (profile.class_name != bundle.device_class) {
    throw Error(Errc::ProfileMismatch, "profile '" + profile.class_name + "' does not apply to device class '" +
                                           bundle.device_class + "'");
  }
  // capability -> components exposing it, both sorted
  std::map<std::string, std::vector<std::string>> present;
  for (const auto& [component, caps] : capabilities) {
    for (const auto& cap : caps) present[cap].push_back(component);
  }

  DetectorResult result;
  std::size_t deviations = 0;
  for (const auto& [cap, components] : present) {
    if (!profile.forbidden_capabilities.contains(cap)) continue;
    ++deviations;
    std::string where;
    for (const auto& c : components) where += (where.empty() ? "" : ",") + c;
    result.findings.push_back({components.front(), cap, "forbidden-capability",
                               "capability '" + cap + "' forbidden for " + profile.class_name +
                                   " (present in " + where + ")",
                               0.5});
  }
  for (const auto& cap : profile.expected_capabilities) {
    if (present.contains(cap)) continue;
    result.findings.push_back({"", cap, "missing-capability",
                               "expected capability '" + cap + "' not observed", 0.0});
  }
  result.score = std::min(1.0, 0.5 * static_cast<double>(deviations));
  return result;
}

void to_json(Json& j, const DeviceClassProfile& p) {
  j = Json{{"class", p.class_name},
           {"expected_capabilities", p.expected_capabilities},
           {"forbidden_capabilities", p.forbidden_capabilities}};
}

void from_json(const Json& j, DeviceClassProfile& p) {
  p.class_name = j.at("class").get<std::string>();
  p.expected_capabilities = j.value("expected_capabilities", std::set<std::string>{});
  p.forbidden_capabilities = j.value("forbidden_capabilities", std::set<std::string>{});
  for (const auto& cap : p.expected_capabilities) {
    if (p.forbidden_capabilities.contains(cap)) {
      throw Error(Errc::ParseError, "profile " + p.class_name + ": '" + cap + "' both expected and forbidden");
    }
  }
}

AdvisoryDb AdvisoryDb::from_json(const Json& j) {
  AdvisoryDb db;
  try {
    for (const auto& [hex, ids] : j.items()) {
      db.advisories[digest_from_hex(hex)] = ids.get<std::vector<std::string>>();
    }
  } catch (const Json::exception& e) {
    throw Error(Errc::ParseError, std::string("advisory db: ") + e.what());
  }
  return db;
}

Json AdvisoryDb::to_json() const {
  Json j = Json::object();
  for (const auto& [digest, ids] : advisories) j[to_hex(digest)] = ids;
  return j;
}

DetectorResult vuln_lookup(const Component& component, const AdvisoryDb& db) {
  DetectorResult result;
  auto it = db.advisories.find(component.digest());
  if (it != db.advisories.end()) {
    for (const auto& id : it->second) {
      result.findings.push_back({component.name, to_hex(component.digest()), "known-vulnerability", id, 1.0});
    }
  }
  result.score = result.findings.empty() ? 0.0 : 1.0;
  return result;
}

DetectorResult vuln_lookup(const FirmwareBundle& bundle, const AdvisoryDb& db) {
  DetectorResult result;
  for (const auto& c : bundle.components) {
    auto part = vuln_lookup(c, db);
    result.score = std::max(result.score, part.score);
    for (auto& f : part.findings) result.findings.push_back(std::move(f));
  }
  return result;
}

}  // namespace attestgate
