#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sorct/types.hpp"

namespace sorct {

// Parsed CSV before scaling / label encoding.
struct RawTable {
  std::vector<std::string> feature_names;
  std::string label_name;
  Matrix features;  // N x p, raw values
  std::vector<std::string> labels;
};

// Per-feature min and range recorded on the data the model was scaled with;
// range == 0 marks a constant column (scaled to 0 everywhere).
struct ScalingRecord {
  Vector min;
  Vector range;
};

struct Dataset {
  Matrix X;            // N x p, every entry in [0, 1]
  std::vector<int> y;  // class ids, 0-based, dense in [0, n_classes)
  int n_classes = 0;
  std::vector<std::vector<Index>> class_indices;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;  // id -> original label string
  std::string label_name;
  ScalingRecord scaling;

  Index n() const { return X.rows(); }
  Index n_features() const { return X.cols(); }
};

struct SplitPlan {
  double train_fraction = 0.75;
  int n_repeats = 10;
  std::uint64_t seed = 0;
};

// Comma-delimited, UTF-8, header row required. label_selector is a column
// name or a 0-based column index. Feature cells must be numeric; categorical
// predictors have to be pre-encoded as dummies before loading.
RawTable load_csv(const std::string& path, const std::string& label_selector);

// Loads a CSV with no designated label column (all columns kept as strings
// for schema checking); used by the predict path.
struct PlainTable {
  std::vector<std::string> column_names;
  std::vector<std::vector<std::string>> rows;
};
PlainTable load_plain_csv(const std::string& path);

// x' = (x - min) / (max - min); constant columns map to 0. Labels are mapped
// to class ids by first appearance.
Dataset scale_to_unit_box(const RawTable& raw);

// Applies a stored scaling record to new raw features, clamping to [0, 1].
Matrix apply_scaling(const ScalingRecord& scaling, const Matrix& raw);

// Deterministic in (plan.seed, repeat_index). Train gets floor(N * fraction)
// rows and is re-drawn (up to 100 times) until every class is represented.
std::pair<Dataset, Dataset> split(const Dataset& data, const SplitPlan& plan,
                                  int repeat_index);

}  // namespace sorct
