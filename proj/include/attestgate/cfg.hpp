#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "attestgate/bytes.hpp"
#include "attestgate/canonical.hpp"

namespace attestgate {

namespace label {
inline constexpr const char* kEntry = "entry";
inline constexpr const char* kAuthCheck = "auth-check";
inline constexpr const char* kPrivileged = "privileged";
}  // namespace label

struct CfgNode {
  std::string id;
  std::set<std::string> labels;

  bool has(const char* l) const { return labels.contains(l); }
  friend bool operator==(const CfgNode&, const CfgNode&) = default;
};

struct StaticCompare {
  std::string node;
  Bytes literal;
  friend bool operator==(const StaticCompare&, const StaticCompare&) = default;
};

/// Control-flow sidecar for a firmware component. Cycles are allowed.
struct ControlFlowGraph {
  std::vector<CfgNode> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::vector<StaticCompare> static_compares;

  friend bool operator==(const ControlFlowGraph&, const ControlFlowGraph&) = default;
};

/// Throws Errc::MalformedGraph unless: node ids are unique, labels come from
/// the known vocabulary, exactly one node is labelled "entry", and every edge
/// and compare site references an existing node.
void validate(const ControlFlowGraph& cfg);

/// Dense adjacency view over a validated graph.
struct IndexedGraph {
  std::size_t entry = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::vector<std::size_t>> pred;
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return ids.size(); }
};

IndexedGraph index_graph(const ControlFlowGraph& cfg);

void to_json(Json& j, const ControlFlowGraph& cfg);
void from_json(const Json& j, ControlFlowGraph& cfg);

}  // namespace attestgate
