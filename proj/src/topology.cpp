#include "sorct/topology.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace sorct {

TreeTopology build_topology(int depth) {
  if (depth < 1 || depth > 10) {
    throw std::invalid_argument("tree depth must be between 1 and 10, got " +
                                std::to_string(depth));
  }
  TreeTopology topo;
  topo.depth = depth;
  const int first_leaf = 1 << depth;
  topo.branch_ids.resize(static_cast<std::size_t>(first_leaf - 1));
  for (int id = 1; id < first_leaf; ++id) topo.branch_ids[id - 1] = id;
  topo.leaf_ids.resize(static_cast<std::size_t>(first_leaf));
  topo.left_ancestors.resize(topo.leaf_ids.size());
  topo.right_ancestors.resize(topo.leaf_ids.size());
  for (int k = 0; k < first_leaf; ++k) {
    const int leaf = first_leaf + k;
    topo.leaf_ids[static_cast<std::size_t>(k)] = leaf;
    auto& left = topo.left_ancestors[static_cast<std::size_t>(k)];
    auto& right = topo.right_ancestors[static_cast<std::size_t>(k)];
    for (int c = leaf; c > 1; c /= 2) {
      const int parent = c / 2;
      // branch position equals id-1 under breadth-first numbering
      (c % 2 == 0 ? left : right).push_back(parent - 1);
    }
    std::sort(left.begin(), left.end());
    std::sort(right.begin(), right.end());
  }
  return topo;
}

}  // namespace sorct
