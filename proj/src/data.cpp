#include "sorct/data.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "sorct/rng.hpp"

namespace sorct {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

PlainTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  PlainTable table;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
  table.column_names = split_line(line);
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.column_names.size()) {
      throw std::runtime_error(
          path + ": row " + std::to_string(table.rows.size() + 1) + " has " +
          std::to_string(cells.size()) + " cells, expected " +
          std::to_string(table.column_names.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

}  // namespace

PlainTable load_plain_csv(const std::string& path) { return read_table(path); }

RawTable load_csv(const std::string& path, const std::string& label_selector) {
  PlainTable table = read_table(path);
  const std::size_t n_cols = table.column_names.size();
  if (n_cols < 2) throw std::runtime_error(path + ": need at least one feature and a label column");
  if (table.rows.empty()) throw std::runtime_error(path + ": no data rows");
  if (table.rows.size() < 2) {
    throw std::runtime_error(path +
                             ": a single observation cannot be used; every "
                             "class needs at least one row after splitting");
  }

  std::size_t label_col = n_cols;
  for (std::size_t j = 0; j < n_cols; ++j) {
    if (table.column_names[j] == label_selector) {
      label_col = j;
      break;
    }
  }
  if (label_col == n_cols) {
    bool numeric = !label_selector.empty() &&
                   label_selector.find_first_not_of("0123456789") == std::string::npos;
    if (numeric) {
      const std::size_t idx = static_cast<std::size_t>(std::stoul(label_selector));
      if (idx < n_cols) label_col = idx;
    }
  }
  if (label_col == n_cols) {
    throw std::runtime_error(path + ": label column '" + label_selector +
                             "' not found (use a header name or 0-based index)");
  }

  RawTable raw;
  raw.label_name = table.column_names[label_col];
  for (std::size_t j = 0; j < n_cols; ++j) {
    if (j != label_col) raw.feature_names.push_back(table.column_names[j]);
  }
  const Index n = static_cast<Index>(table.rows.size());
  const Index p = static_cast<Index>(n_cols - 1);
  raw.features.resize(n, p);
  raw.labels.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const auto& cells = table.rows[static_cast<std::size_t>(i)];
    Index jj = 0;
    for (std::size_t j = 0; j < n_cols; ++j) {
      if (j == label_col) {
        raw.labels[static_cast<std::size_t>(i)] = cells[j];
        continue;
      }
      double v;
      if (!parse_number(cells[j], v)) {
        throw std::runtime_error(
            path + ": non-numeric feature value '" + cells[j] + "' at row " +
            std::to_string(i + 1) + ", column '" + table.column_names[j] +
            "'; pre-encode categorical predictors as numeric dummies");
      }
      raw.features(i, jj++) = v;
    }
  }
  return raw;
}

Dataset scale_to_unit_box(const RawTable& raw) {
  Dataset data;
  data.feature_names = raw.feature_names;
  data.label_name = raw.label_name;

  const Index n = raw.features.rows();
  const Index p = raw.features.cols();
  data.scaling.min = raw.features.colwise().minCoeff();
  Vector max = raw.features.colwise().maxCoeff();
  data.scaling.range = max - data.scaling.min;
  data.X.resize(n, p);
  for (Index j = 0; j < p; ++j) {
    if (data.scaling.range[j] > 0) {
      data.X.col(j) = (raw.features.col(j).array() - data.scaling.min[j]) /
                      data.scaling.range[j];
    } else {
      data.X.col(j).setZero();
    }
  }

  std::unordered_map<std::string, int> label_ids;
  data.y.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const std::string& lab = raw.labels[static_cast<std::size_t>(i)];
    auto it = label_ids.find(lab);
    if (it == label_ids.end()) {
      it = label_ids.emplace(lab, static_cast<int>(data.class_names.size())).first;
      data.class_names.push_back(lab);
    }
    data.y[static_cast<std::size_t>(i)] = it->second;
  }
  data.n_classes = static_cast<int>(data.class_names.size());
  data.class_indices.assign(static_cast<std::size_t>(data.n_classes), {});
  for (Index i = 0; i < n; ++i) {
    data.class_indices[static_cast<std::size_t>(data.y[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  return data;
}

Matrix apply_scaling(const ScalingRecord& scaling, const Matrix& raw) {
  if (raw.cols() != scaling.min.size()) {
    throw std::invalid_argument("feature count does not match scaling record");
  }
  Matrix out(raw.rows(), raw.cols());
  for (Index j = 0; j < raw.cols(); ++j) {
    if (scaling.range[j] > 0) {
      out.col(j) = ((raw.col(j).array() - scaling.min[j]) / scaling.range[j])
                       .cwiseMax(0.0)
                       .cwiseMin(1.0);
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

namespace {

Dataset take_rows(const Dataset& data, const std::vector<Index>& rows) {
  Dataset out;
  out.n_classes = data.n_classes;
  out.feature_names = data.feature_names;
  out.class_names = data.class_names;
  out.label_name = data.label_name;
  out.scaling = data.scaling;
  out.X.resize(static_cast<Index>(rows.size()), data.X.cols());
  out.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(static_cast<Index>(i)) = data.X.row(rows[i]);
    out.y[i] = data.y[static_cast<std::size_t>(rows[i])];
  }
  out.class_indices.assign(static_cast<std::size_t>(out.n_classes), {});
  for (std::size_t i = 0; i < out.y.size(); ++i) {
    out.class_indices[static_cast<std::size_t>(out.y[i])].push_back(
        static_cast<Index>(i));
  }
  return out;
}

}  // namespace

std::pair<Dataset, Dataset> split(const Dataset& data, const SplitPlan& plan,
                                  int repeat_index) {
  if (plan.train_fraction <= 0.0 || plan.train_fraction >= 1.0) {
    throw std::invalid_argument("train_fraction must be in (0, 1)");
  }
  if (repeat_index < 0 || repeat_index >= plan.n_repeats) {
    throw std::invalid_argument("repeat_index out of range");
  }
  const Index n = data.n();
  const Index n_train =
      std::max<Index>(1, static_cast<Index>(static_cast<double>(n) * plan.train_fraction));
  if (n_train >= n) throw std::invalid_argument("split leaves no test rows");

  std::vector<Index> perm(static_cast<std::size_t>(n));
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(stream_seed(plan.seed, kStreamSplit,
                        static_cast<std::uint64_t>(repeat_index),
                        static_cast<std::uint64_t>(attempt)));
    std::iota(perm.begin(), perm.end(), Index{0});
    for (Index i = n - 1; i > 0; --i) {
      const Index j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    std::vector<bool> seen(static_cast<std::size_t>(data.n_classes), false);
    for (Index i = 0; i < n_train; ++i) {
      seen[static_cast<std::size_t>(data.y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])])] = true;
    }
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      std::vector<Index> train_rows(perm.begin(), perm.begin() + n_train);
      std::vector<Index> test_rows(perm.begin() + n_train, perm.end());
      std::sort(train_rows.begin(), train_rows.end());
      std::sort(test_rows.begin(), test_rows.end());
      return {take_rows(data, train_rows), take_rows(data, test_rows)};
    }
  }
  throw std::runtime_error(
      "could not draw a train split containing every class in 100 attempts");
}

}  // namespace sorct
