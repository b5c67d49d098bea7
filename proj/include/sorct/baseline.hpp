#pragma once

#include <vector>

#include "sorct/data.hpp"
#include "sorct/types.hpp"

namespace sorct {

// Greedy orthogonal-cut reference tree: recursive partitioning on Gini
// impurity with binary axis-aligned splits, used for the statistical
// comparison against the oblique trees.
struct BaselineConfig {
  int min_leaf = 7;
  Scalar cp = 0.01;  // minimum impurity improvement relative to the root
  int max_depth = 30;
};

struct BaselineNode {
  int feature = -1;  // -1 marks a leaf
  Scalar threshold = 0.0;
  int left = -1;
  int right = -1;
  int label = 0;
};

struct BaselineTree {
  std::vector<BaselineNode> nodes;  // nodes[0] is the root
  int n_classes = 0;
  std::vector<bool> feature_used;
};

BaselineTree fit_baseline(const Dataset& train, const BaselineConfig& config = {});

int baseline_predict(const BaselineTree& tree, const RowVector& x);
Scalar baseline_accuracy(const BaselineTree& tree, const Dataset& data);

// Percentage of predictor variables never used in any split.
Scalar baseline_global_sparsity(const BaselineTree& tree);

}  // namespace sorct
