#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "dphaser/sim.hpp"

namespace dphaser {

// Geometric level sampling: height h with probability p^(h-1)*(1-p), capped.
int sample_height(std::mt19937_64& rng, double p, int max_height);

struct TopoNode {
  NodeId id = kNoNode;
  Key key = 0;
  int height = 1;
  NodeId parent = kNoNode;  // derived: predecessor at the node's top level
  std::vector<NodeId> children;
};

// Structural view of one list: per-level id sequences (head first) plus the
// derived parent/child tree.
struct Topology {
  NodeId head = kNoNode;
  std::vector<std::vector<NodeId>> levels;
  std::map<NodeId, TopoNode> nodes;

  int depth_to_head(NodeId id) const;  // parent-chain hops
};

// Reads the list structure out of a quiescent world by chasing next links
// from the head. Detached members are skipped.
Topology snapshot_list(const SimWorld& w, ListId list);

// Reference construction: sequential insertion of (key, height) members under
// the same linking rules. Ids are positional indices offset by `first_id`.
Topology build_oracle(const std::vector<std::pair<Key, int>>& members, int max_height,
                      NodeId head_id, NodeId first_id);

bool topo_equal(const Topology& a, const Topology& b);

std::string topology_json(const Topology& t);

// Structural invariants checked against live node state: sorted strictly
// ascending levels, pyramid property, head leftmost at max height, stored
// parent/children/prev consistent with the derived tree. Returns one message
// per violation; empty means valid.
std::vector<std::string> validate_topology(const SimWorld& w, ListId list);

}  // namespace dphaser
