#include "attestgate/cfg.hpp"

#include "attestgate/error.hpp"

namespace attestgate {

void validate(const ControlFlowGraph& cfg) {
  std::set<std::string> ids;
  std::size_t entries = 0;
  for (const auto& node : cfg.nodes) {
    if (!ids.insert(node.id).second) {
      throw Error(Errc::MalformedGraph, "duplicate node id '" + node.id + "'");
    }
    for (const auto& l : node.labels) {
      if (l != label::kEntry && l != label::kAuthCheck && l != label::kPrivileged) {
        throw Error(Errc::MalformedGraph, "unknown label '" + l + "' on node '" + node.id + "'");
      }
    }
    if (node.has(label::kEntry)) ++entries;
  }
  if (entries != 1) {
    throw Error(Errc::MalformedGraph,
                "graph must have exactly one entry node, found " + std::to_string(entries));
  }
  for (const auto& [from, to] : cfg.edges) {
    if (!ids.contains(from) || !ids.contains(to)) {
      throw Error(Errc::MalformedGraph, "edge " + from + " -> " + to + " references unknown node");
    }
  }
  for (const auto& site : cfg.static_compares) {
    if (!ids.contains(site.node)) {
      throw Error(Errc::MalformedGraph, "static compare at unknown node '" + site.node + "'");
    }
  }
}

IndexedGraph index_graph(const ControlFlowGraph& cfg) {
  validate(cfg);
  IndexedGraph g;
  g.ids.reserve(cfg.nodes.size());
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    g.ids.push_back(cfg.nodes[i].id);
    g.index.emplace(cfg.nodes[i].id, i);
    if (cfg.nodes[i].has(label::kEntry)) g.entry = i;
  }
  g.succ.resize(g.size());
  g.pred.resize(g.size());
  for (const auto& [from, to] : cfg.edges) {
    auto a = g.index.at(from);
    auto b = g.index.at(to);
    g.succ[a].push_back(b);
    g.pred[b].push_back(a);
  }
  return g;
}

void to_json(Json& j, const ControlFlowGraph& cfg) {
  Json nodes = Json::array();
  for (const auto& n : cfg.nodes) {
    nodes.push_back({{"id", n.id}, {"labels", n.labels}});
  }
  Json edges = Json::array();
  for (const auto& [a, b] : cfg.edges) edges.push_back(Json::array({a, b}));
  Json compares = Json::array();
  for (const auto& c : cfg.static_compares) {
    compares.push_back({{"node", c.node}, {"literal_hex", to_hex(c.literal)}});
  }
  j = Json{{"nodes", nodes}, {"edges", edges}, {"static_compares", compares}};
}

void from_json(const Json& j, ControlFlowGraph& cfg) {
  cfg = {};
  for (const auto& n : j.at("nodes")) {
    CfgNode node;
    node.id = n.at("id").get<std::string>();
    if (n.contains("labels")) node.labels = n.at("labels").get<std::set<std::string>>();
    cfg.nodes.push_back(std::move(node));
  }
  for (const auto& e : j.value("edges", Json::array())) {
    if (!e.is_array() || e.size() != 2) {
      throw Error(Errc::ParseError, "edge must be a [from, to] pair");
    }
    cfg.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
  }
  for (const auto& c : j.value("static_compares", Json::array())) {
    cfg.static_compares.push_back(
        {c.at("node").get<std::string>(), from_hex(c.at("literal_hex").get<std::string>())});
  }
}

}  // namespace attestgate
