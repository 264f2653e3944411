#include "dphaser/topology.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace dphaser {

int sample_height(std::mt19937_64& rng, double p, int max_height) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  int h = 1;
  while (h < max_height && d(rng) < p) ++h;
  return h;
}

int Topology::depth_to_head(NodeId id) const {
  int hops = 0;
  while (id != head) {
    auto it = nodes.find(id);
    if (it == nodes.end() || it->second.parent == kNoNode) return -1;
    id = it->second.parent;
    if (++hops > static_cast<int>(nodes.size())) return -1;  // cycle guard
  }
  return hops;
}

namespace {

// Fills in parents (predecessor at each node's top level) and children from
// completed level chains.
void derive_tree(Topology& t) {
  for (size_t l = 0; l < t.levels.size(); ++l) {
    const auto& chain = t.levels[l];
    for (size_t i = 1; i < chain.size(); ++i) {
      TopoNode& v = t.nodes[chain[i]];
      if (static_cast<size_t>(v.height) == l + 1) v.parent = chain[i - 1];
    }
  }
  std::vector<NodeId> order;
  for (const auto& [id, n] : t.nodes) order.push_back(id);
  std::sort(order.begin(), order.end(),
            [&](NodeId a, NodeId b) { return t.nodes[a].key < t.nodes[b].key; });
  for (NodeId id : order) {
    const TopoNode& n = t.nodes[id];
    if (n.parent != kNoNode) t.nodes[n.parent].children.push_back(id);
  }
}

}  // namespace

Topology snapshot_list(const SimWorld& w, ListId list) {
  Topology t;
  t.head = list == ListId::Scsl ? w.cfg.scsl_head : w.cfg.snsl_head;
  const NodeState& head = w.nodes.at(t.head);
  const ListPeer& hp = *head.peer(list);
  t.levels.resize(hp.linked_height);
  t.nodes[t.head] = TopoNode{t.head, hp.key, hp.linked_height, kNoNode, {}};
  for (int l = 0; l < hp.linked_height; ++l) {
    NodeId cur = t.head;
    t.levels[l].push_back(cur);
    size_t guard = 0;
    while (true) {
      const ListPeer& p = *w.nodes.at(cur).peer(list);
      if (l >= p.linked_height || !p.next[l]) break;
      cur = p.next[l]->id;
      const NodeState& n = w.nodes.at(cur);
      const ListPeer& np = *n.peer(list);
      t.levels[l].push_back(cur);
      if (t.nodes.find(cur) == t.nodes.end())
        t.nodes[cur] = TopoNode{cur, np.key, np.linked_height, kNoNode, {}};
      if (++guard > w.nodes.size()) break;  // defensive against cycles
    }
  }
  derive_tree(t);
  return t;
}

Topology build_oracle(const std::vector<std::pair<Key, int>>& members, int max_height,
                      NodeId head_id, NodeId first_id) {
  Topology t;
  t.head = head_id;
  t.levels.resize(max_height);
  t.nodes[head_id] = TopoNode{head_id, 0, max_height, kNoNode, {}};
  for (auto& chain : t.levels) chain.push_back(head_id);
  for (size_t i = 0; i < members.size(); ++i) {
    NodeId id = first_id + static_cast<NodeId>(i);
    auto [key, height] = members[i];
    t.nodes[id] = TopoNode{id, key, height, kNoNode, {}};
    for (int l = 0; l < height; ++l) {
      auto& chain = t.levels[l];
      auto pos = std::upper_bound(chain.begin() + 1, chain.end(), key,
                                  [&](Key k, NodeId v) { return k < t.nodes[v].key; });
      chain.insert(pos, id);
    }
  }
  derive_tree(t);
  return t;
}

bool topo_equal(const Topology& a, const Topology& b) {
  if (a.head != b.head || a.levels != b.levels) return false;
  if (a.nodes.size() != b.nodes.size()) return false;
  for (const auto& [id, n] : a.nodes) {
    auto it = b.nodes.find(id);
    if (it == b.nodes.end()) return false;
    const TopoNode& o = it->second;
    if (n.key != o.key || n.height != o.height || n.parent != o.parent ||
        n.children != o.children)
      return false;
  }
  return true;
}

std::string topology_json(const Topology& t) {
  nlohmann::json j;
  j["head"] = t.head;
  j["levels"] = t.levels;
  nlohmann::json nodes = nlohmann::json::object();
  for (const auto& [id, n] : t.nodes) {
    nlohmann::json e;
    e["key"] = n.key;
    e["height"] = n.height;
    if (n.parent != kNoNode) e["parent"] = n.parent;
    e["children"] = n.children;
    nodes[std::to_string(id)] = e;
  }
  j["nodes"] = nodes;
  return j.dump();
}

std::vector<std::string> validate_topology(const SimWorld& w, ListId list) {
  std::vector<std::string> errs;
  auto fail = [&](const std::string& s) { errs.push_back(list_name(list) + (": " + s)); };

  NodeId head_id = list == ListId::Scsl ? w.cfg.scsl_head : w.cfg.snsl_head;
  auto head_it = w.nodes.find(head_id);
  if (head_it == w.nodes.end() || !head_it->second.peer(list)) {
    fail("missing head sentinel");
    return errs;
  }
  const ListPeer& hp = *head_it->second.peer(list);
  if (!hp.is_sentinel) fail("head is not a sentinel");
  if (hp.linked_height != w.cfg.max_height) fail("head not at max height");

  std::set<NodeId> members;
  for (const auto& [id, n] : w.nodes) {
    const ListPeer* p = n.peer(list);
    if (p && !p->detached) members.insert(id);
  }

  Topology t = snapshot_list(w, list);
  if (t.levels.empty()) return errs;

  // Level chains: strictly ascending keys, pyramid containment, no node
  // outside [0, top], everyone reachable at level 0.
  std::set<NodeId> below;
  for (int l = static_cast<int>(t.levels.size()) - 1; l >= 0; --l) {
    const auto& chain = t.levels[l];
    std::set<NodeId> here(chain.begin(), chain.end());
    if (here.size() != chain.size()) fail("duplicate node in level " + std::to_string(l));
    for (size_t i = 1; i < chain.size(); ++i) {
      if (t.nodes[chain[i - 1]].key >= t.nodes[chain[i]].key)
        fail("keys not strictly ascending at level " + std::to_string(l));
      if (t.nodes[chain[i]].height < l + 1)
        fail("node above its linked height at level " + std::to_string(l));
    }
    if (l + 1 < static_cast<int>(t.levels.size())) {
      for (NodeId id : t.levels[l + 1])
        if (!here.count(id)) fail("pyramid violated at level " + std::to_string(l));
    }
    below = std::move(here);
  }
  for (NodeId id : members)
    if (!below.count(id)) fail("node " + std::to_string(id) + " lost from level 0");
  for (NodeId id : below)
    if (!members.count(id)) fail("level 0 contains non-member " + std::to_string(id));
  if (!errs.empty()) return errs;

  // Per-node stored state against the derived tree.
  for (NodeId id : members) {
    const ListPeer& p = *w.nodes.at(id).peer(list);
    const TopoNode& tn = t.nodes[id];
    if (p.linked_height != p.target_height)
      fail("node " + std::to_string(id) + " not at target height");
    if (id != head_id) {
      auto stored = p.parents.empty() ? std::nullopt : p.parents.back().parent;
      if (!stored || stored->id != tn.parent)
        fail("node " + std::to_string(id) + " stored parent disagrees with derived tree");
      if (!p.prev[p.top()] || p.prev[p.top()]->id != tn.parent)
        fail("node " + std::to_string(id) + " top-level prev disagrees with derived tree");
    }
    std::set<NodeId> stored_children;
    for (const auto& c : p.children)
      for (const auto& s : c.spans)
        if (!s.to) stored_children.insert(c.id);
    std::set<NodeId> derived_children(tn.children.begin(), tn.children.end());
    if (stored_children != derived_children)
      fail("node " + std::to_string(id) + " stored children disagree with derived tree");
  }
  return errs;
}

}  // namespace dphaser
