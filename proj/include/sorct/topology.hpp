#pragma once

#include <vector>

#include "sorct/types.hpp"

namespace sorct {

// Complete binary tree of a fixed depth. Nodes carry breadth-first heap ids
// with root = 1 and children of t at 2t and 2t+1; branch nodes are
// 1 .. 2^D-1, leaves 2^D .. 2^{D+1}-1. All matrices over branch nodes and
// leaves use the positional index within branch_ids / leaf_ids.
struct TreeTopology {
  int depth = 0;
  std::vector<int> branch_ids;
  std::vector<int> leaf_ids;
  // Per leaf, positions (into branch_ids) of the ancestors whose left /
  // right branch lies on the root-to-leaf path. Sorted root-first.
  std::vector<std::vector<int>> left_ancestors;
  std::vector<std::vector<int>> right_ancestors;

  Index n_branch() const { return static_cast<Index>(branch_ids.size()); }
  Index n_leaf() const { return static_cast<Index>(leaf_ids.size()); }
  Index n_node() const { return n_branch() + n_leaf(); }
};

// depth must be in [1, 10]; the cap keeps leaf-label enumeration tractable.
TreeTopology build_topology(int depth);

}  // namespace sorct
