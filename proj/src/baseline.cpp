#include "sorct/baseline.hpp"

#include <algorithm>
#include <numeric>

namespace sorct {

namespace {

Scalar gini(const std::vector<Index>& counts, Index total) {
  if (total == 0) return 0.0;
  Scalar sum_sq = 0.0;
  for (Index c : counts) {
    const Scalar f = static_cast<Scalar>(c) / static_cast<Scalar>(total);
    sum_sq += f * f;
  }
  return 1.0 - sum_sq;
}

struct Builder {
  const Dataset& data;
  const BaselineConfig& config;
  BaselineTree& tree;
  Scalar root_gini = 0.0;
  Index n_root = 0;

  int majority(const std::vector<Index>& counts) const {
    int best = 0;
    for (int k = 1; k < static_cast<int>(counts.size()); ++k) {
      if (counts[static_cast<std::size_t>(k)] > counts[static_cast<std::size_t>(best)]) best = k;
    }
    return best;
  }

  int build(std::vector<Index>& rows, int depth) {
    const Index n = static_cast<Index>(rows.size());
    std::vector<Index> counts(static_cast<std::size_t>(data.n_classes), 0);
    for (Index i : rows) ++counts[static_cast<std::size_t>(data.y[static_cast<std::size_t>(i)])];
    const Scalar node_imp = gini(counts, n);

    BaselineNode node;
    node.label = majority(counts);
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(node);
    if (node_imp == 0.0 || depth >= config.max_depth || n < 2 * config.min_leaf) {
      return id;
    }

    int best_feature = -1;
    Scalar best_gain = -1.0;
    Scalar best_threshold = 0.0;
    std::vector<Index> sorted = rows;
    std::vector<Index> left_counts(static_cast<std::size_t>(data.n_classes));
    for (Index j = 0; j < data.n_features(); ++j) {
      std::sort(sorted.begin(), sorted.end(), [&](Index x, Index y) {
        const Scalar vx = data.X(x, j), vy = data.X(y, j);
        if (vx != vy) return vx < vy;
        return x < y;
      });
      std::fill(left_counts.begin(), left_counts.end(), Index{0});
      for (Index i = 0; i < n - 1; ++i) {
        ++left_counts[static_cast<std::size_t>(data.y[static_cast<std::size_t>(sorted[static_cast<std::size_t>(i)])])];
        const Index n_left = i + 1;
        const Index n_right = n - n_left;
        if (n_left < config.min_leaf || n_right < config.min_leaf) continue;
        const Scalar lo = data.X(sorted[static_cast<std::size_t>(i)], j);
        const Scalar hi = data.X(sorted[static_cast<std::size_t>(i + 1)], j);
        if (lo == hi) continue;
        Scalar right_imp_sum = 0.0, left_imp_sum = 0.0;
        {
          Scalar sl = 0.0, sr = 0.0;
          for (int k = 0; k < data.n_classes; ++k) {
            const Scalar cl = static_cast<Scalar>(left_counts[static_cast<std::size_t>(k)]);
            const Scalar cr = static_cast<Scalar>(counts[static_cast<std::size_t>(k)]) - cl;
            sl += cl * cl;
            sr += cr * cr;
          }
          left_imp_sum = static_cast<Scalar>(n_left) - sl / static_cast<Scalar>(n_left);
          right_imp_sum = static_cast<Scalar>(n_right) - sr / static_cast<Scalar>(n_right);
        }
        const Scalar gain = node_imp * static_cast<Scalar>(n) - left_imp_sum - right_imp_sum;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(j);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return id;
    if (best_gain / static_cast<Scalar>(n_root) < config.cp * root_gini) return id;

    std::vector<Index> left_rows, right_rows;
    for (Index i : rows) {
      (data.X(i, best_feature) <= best_threshold ? left_rows : right_rows).push_back(i);
    }
    tree.feature_used[static_cast<std::size_t>(best_feature)] = true;
    tree.nodes[static_cast<std::size_t>(id)].feature = best_feature;
    tree.nodes[static_cast<std::size_t>(id)].threshold = best_threshold;
    const int left_id = build(left_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].left = left_id;
    const int right_id = build(right_rows, depth + 1);
    tree.nodes[static_cast<std::size_t>(id)].right = right_id;
    return id;
  }
};

}  // namespace

BaselineTree fit_baseline(const Dataset& train, const BaselineConfig& config) {
  BaselineTree tree;
  tree.n_classes = train.n_classes;
  tree.feature_used.assign(static_cast<std::size_t>(train.n_features()), false);
  Builder builder{train, config, tree};
  std::vector<Index> counts(static_cast<std::size_t>(train.n_classes), 0);
  for (int y : train.y) ++counts[static_cast<std::size_t>(y)];
  builder.root_gini = gini(counts, train.n());
  builder.n_root = train.n();
  std::vector<Index> rows(static_cast<std::size_t>(train.n()));
  std::iota(rows.begin(), rows.end(), Index{0});
  builder.build(rows, 0);
  return tree;
}

int baseline_predict(const BaselineTree& tree, const RowVector& x) {
  int id = 0;
  while (tree.nodes[static_cast<std::size_t>(id)].feature >= 0) {
    const auto& node = tree.nodes[static_cast<std::size_t>(id)];
    id = x[node.feature] <= node.threshold ? node.left : node.right;
  }
  return tree.nodes[static_cast<std::size_t>(id)].label;
}

Scalar baseline_accuracy(const BaselineTree& tree, const Dataset& data) {
  Index hits = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (baseline_predict(tree, data.X.row(i)) == data.y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(data.n());
}

Scalar baseline_global_sparsity(const BaselineTree& tree) {
  const std::size_t p = tree.feature_used.size();
  std::size_t unused = 0;
  for (bool used : tree.feature_used) {
    if (!used) ++unused;
  }
  return 100.0 * static_cast<Scalar>(unused) / static_cast<Scalar>(p);
}

}  // namespace sorct
