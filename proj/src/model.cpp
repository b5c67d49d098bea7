#include "sorct/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace sorct {

Matrix equal_cost_matrix(int n_classes, Scalar off_diagonal) {
  Matrix W = Matrix::Constant(n_classes, n_classes, off_diagonal);
  W.diagonal().setZero();
  return W;
}

Scalar logistic_cdf(Scalar v, Scalar gamma) {
  // clamp the exponent so stiff gamma saturates instead of overflowing
  const Scalar t = std::clamp(v * gamma, Scalar(-700), Scalar(700));
  if (t >= 0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const Scalar e = std::exp(t);
  return e / (1.0 + e);
}

Scalar logistic_density(Scalar v, Scalar gamma) {
  const Scalar F = logistic_cdf(v, gamma);
  return gamma * F * (1.0 - F);
}

Scalar branch_probability(const Vector& x, const Vector& a_col, Scalar mu_t,
                          Scalar gamma) {
  if (x.size() != a_col.size()) {
    throw std::invalid_argument("branch_probability: dimension mismatch");
  }
  const Scalar arg = a_col.dot(x) / static_cast<Scalar>(x.size()) - mu_t;
  return logistic_cdf(arg, gamma);
}

Vector leaf_probabilities(const Vector& x, const ModelParams& params,
                          const TreeTopology& topo, Scalar gamma) {
  const Index B = topo.n_branch();
  Vector p_branch(B);
  for (Index b = 0; b < B; ++b) {
    p_branch[b] = branch_probability(x, params.a.col(b), params.mu[b], gamma);
  }
  Vector P(topo.n_leaf());
  for (Index t = 0; t < topo.n_leaf(); ++t) {
    Scalar prod = 1.0;
    for (int b : topo.left_ancestors[static_cast<std::size_t>(t)]) prod *= p_branch[b];
    for (int b : topo.right_ancestors[static_cast<std::size_t>(t)]) prod *= 1.0 - p_branch[b];
    P[t] = prod;
  }
  return P;
}

BatchEvaluator::BatchEvaluator(const Matrix& X, const std::vector<int>& y,
                               int n_classes, const TreeTopology& topo,
                               const Matrix& W, Scalar gamma)
    : X_(X), y_(y), n_classes_(n_classes), topo_(topo), W_(W), gamma_(gamma) {
  const Index N = X_.rows();
  args_.resize(N, topo_.n_branch());
  pbr_.resize(N, topo_.n_branch());
  fden_.resize(N, topo_.n_branch());
  mass_.resize(N, topo_.n_node());
  m_.resize(n_classes_, topo_.n_leaf());
}

void BatchEvaluator::forward(const ModelParams& params) {
  const Index N = X_.rows();
  const Index B = topo_.n_branch();
  const Index L = topo_.n_leaf();
  const Scalar inv_p = 1.0 / static_cast<Scalar>(X_.cols());

  args_.noalias() = X_ * params.a;
  args_ *= inv_p;
  args_.rowwise() -= params.mu.transpose();
  pbr_ = (args_.array() * gamma_).min(700.0).max(-700.0).exp();
  pbr_ = (pbr_.array() / (1.0 + pbr_.array())).matrix();
  fden_ = (gamma_ * pbr_.array() * (1.0 - pbr_.array())).matrix();

  mass_.col(0).setOnes();
  for (Index b = 0; b < B; ++b) {
    mass_.col(2 * b + 1) = mass_.col(b).cwiseProduct(pbr_.col(b));
    mass_.col(2 * b + 2) = mass_.col(b) - mass_.col(2 * b + 1);
  }
  m_.setZero();
  for (Index i = 0; i < N; ++i) {
    m_.row(y_[static_cast<std::size_t>(i)]) += mass_.row(i).tail(L);
  }
}

Scalar BatchEvaluator::cost(const Matrix& C) const {
  return m_.cwiseProduct(W_ * C).sum() / static_cast<Scalar>(n());
}

Vector BatchEvaluator::class_mass(const Matrix& C) const {
  return m_.cwiseProduct(C).rowwise().sum();
}

Matrix BatchEvaluator::cost_gradient_C() const {
  return (W_.transpose() * m_) / static_cast<Scalar>(n());
}

void BatchEvaluator::backward(const Matrix& V, Matrix& d_a, Vector& d_mu) const {
  const Index N = X_.rows();
  const Index B = topo_.n_branch();
  const Index L = topo_.n_leaf();
  Matrix U(N, topo_.n_node());
  for (Index i = 0; i < N; ++i) {
    U.row(i).tail(L) = V.row(y_[static_cast<std::size_t>(i)]);
  }
  for (Index b = B - 1; b >= 0; --b) {
    U.col(b) = pbr_.col(b).cwiseProduct(U.col(2 * b + 1)) +
               (Vector::Ones(N) - pbr_.col(b)).cwiseProduct(U.col(2 * b + 2));
  }
  Matrix G(N, B);
  for (Index b = 0; b < B; ++b) {
    G.col(b) = fden_.col(b)
                   .cwiseProduct(mass_.col(b))
                   .cwiseProduct(U.col(2 * b + 1) - U.col(2 * b + 2));
  }
  d_a.noalias() = X_.transpose() * G;
  d_a /= static_cast<Scalar>(X_.cols());
  d_mu = -G.colwise().sum();
}

Scalar expected_cost(const ModelParams& params, const Dataset& data,
                     const Matrix& W, const TreeTopology& topo, Scalar gamma) {
  if (params.a.rows() != data.n_features() || params.C.rows() != data.n_classes) {
    throw std::invalid_argument("expected_cost: dimension mismatch");
  }
  BatchEvaluator ev(data.X, data.y, data.n_classes, topo, W, gamma);
  ev.forward(params);
  return ev.cost(params.C);
}

Scalar penalty_value(const Matrix& a, Scalar lambda_local, Scalar lambda_global) {
  Scalar value = lambda_local * a.cwiseAbs().sum();
  if (lambda_global != 0.0) {
    value += lambda_global * a.cwiseAbs().rowwise().maxCoeff().sum();
  }
  return value;
}

Matrix penalty_subgradient(const Matrix& a, Scalar lambda_local,
                           Scalar lambda_global) {
  Matrix sub = Matrix::Zero(a.rows(), a.cols());
  for (Index j = 0; j < a.rows(); ++j) {
    Index argmax = -1;
    Scalar best = 0.0;
    for (Index t = 0; t < a.cols(); ++t) {
      const Scalar v = a(j, t);
      if (v != 0.0) sub(j, t) += lambda_local * (v > 0 ? 1.0 : -1.0);
      if (std::abs(v) > best) {
        best = std::abs(v);
        argmax = t;
      }
    }
    if (argmax >= 0) {
      sub(j, argmax) += lambda_global * (a(j, argmax) > 0 ? 1.0 : -1.0);
    }
  }
  return sub;
}

Scalar objective(const ModelParams& params, const Dataset& data,
                 const Hyperparams& hyper, const TreeTopology& topo) {
  return expected_cost(params, data, hyper.W, topo, hyper.gamma) +
         penalty_value(params.a, hyper.lambda_local, hyper.lambda_global);
}

std::pair<Scalar, Gradient> objective_and_gradient(const ModelParams& params,
                                                   const Dataset& data,
                                                   const Hyperparams& hyper,
                                                   const TreeTopology& topo) {
  BatchEvaluator ev(data.X, data.y, data.n_classes, topo, hyper.W, hyper.gamma);
  ev.forward(params);
  const Scalar value =
      ev.cost(params.C) +
      penalty_value(params.a, hyper.lambda_local, hyper.lambda_global);
  Gradient grad;
  const Matrix V = (hyper.W * params.C) / static_cast<Scalar>(data.n());
  ev.backward(V, grad.d_a, grad.d_mu);
  grad.d_C = ev.cost_gradient_C();
  return {value, std::move(grad)};
}

Vector performance_slack(const ModelParams& params, const Dataset& data,
                         const Vector& rho, const TreeTopology& topo,
                         Scalar gamma) {
  BatchEvaluator ev(data.X, data.y, data.n_classes, topo,
                    Matrix::Zero(data.n_classes, data.n_classes), gamma);
  ev.forward(params);
  Vector slack = ev.class_mass(params.C);
  for (int k = 0; k < data.n_classes; ++k) {
    slack[k] -= rho[k] * static_cast<Scalar>(data.class_indices[static_cast<std::size_t>(k)].size());
  }
  return slack;
}

namespace {

// Assignment of n rows to distinct columns (n <= m) minimizing total cost.
// Potentials method, O(n^2 m). Returns row -> column.
std::vector<int> min_cost_assignment(const Matrix& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  const Scalar INF = std::numeric_limits<Scalar>::infinity();
  std::vector<Scalar> u(static_cast<std::size_t>(n) + 1, 0.0);
  std::vector<Scalar> v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> match(static_cast<std::size_t>(m) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<Scalar> minv(static_cast<std::size_t>(m) + 1, INF);
    std::vector<bool> used(static_cast<std::size_t>(m) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = match[static_cast<std::size_t>(j0)];
      Scalar delta = INF;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[static_cast<std::size_t>(i0)] -
                           v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(match[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (match[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      match[static_cast<std::size_t>(j0)] = match[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j) {
    if (match[static_cast<std::size_t>(j)] > 0) {
      row_to_col[static_cast<std::size_t>(match[static_cast<std::size_t>(j)] - 1)] = j - 1;
    }
  }
  return row_to_col;
}

}  // namespace

Matrix round_leaf_labels(const Matrix& a, const Vector& mu, const Dataset& data,
                         const Matrix& W, const TreeTopology& topo,
                         Scalar gamma) {
  const Index K = data.n_classes;
  const Index L = topo.n_leaf();
  if (K > L) {
    throw std::invalid_argument(
        "round_leaf_labels: more classes than leaves, coverage impossible");
  }
  ModelParams probe{a, mu, Matrix::Zero(K, L)};
  BatchEvaluator ev(data.X, data.y, data.n_classes, topo, W, gamma);
  ev.forward(probe);
  // cost(k, t): expected cost contribution of labelling leaf t with class k
  const Matrix cost = ev.cost_gradient_C();

  // Every class designates one distinct leaf (coverage); remaining leaves
  // take their cheapest class. The designation is an assignment problem on
  // costs reduced by the per-leaf minimum.
  Vector leaf_min = cost.colwise().minCoeff();
  Matrix reduced = cost;
  reduced.rowwise() -= leaf_min.transpose();
  const std::vector<int> designated = min_cost_assignment(reduced);

  std::vector<int> label(static_cast<std::size_t>(L), -1);
  for (Index k = 0; k < K; ++k) label[static_cast<std::size_t>(designated[static_cast<std::size_t>(k)])] = static_cast<int>(k);
  for (Index t = 0; t < L; ++t) {
    if (label[static_cast<std::size_t>(t)] >= 0) continue;
    Index best = 0;
    for (Index k = 1; k < K; ++k) {
      if (cost(k, t) < cost(best, t)) best = k;
    }
    label[static_cast<std::size_t>(t)] = static_cast<int>(best);
  }
  Matrix C = Matrix::Zero(K, L);
  for (Index t = 0; t < L; ++t) C(label[static_cast<std::size_t>(t)], t) = 1.0;
  return C;
}

Vector predict_proba(const Vector& x, const ModelParams& params,
                     const TreeTopology& topo, Scalar gamma) {
  return params.C * leaf_probabilities(x, params, topo, gamma);
}

int predict(const Vector& x, const ModelParams& params,
            const TreeTopology& topo, Scalar gamma) {
  const Vector proba = predict_proba(x, params, topo, gamma);
  Index best = 0;
  for (Index k = 1; k < proba.size(); ++k) {
    if (proba[k] > proba[best]) best = k;
  }
  return static_cast<int>(best);
}

Matrix leaf_probability_matrix(const Matrix& X, const ModelParams& params,
                               const TreeTopology& topo, Scalar gamma) {
  const Index N = X.rows();
  const Index B = topo.n_branch();
  Matrix args = X * params.a / static_cast<Scalar>(X.cols());
  args.rowwise() -= params.mu.transpose();
  Matrix pbr = (args.array() * gamma).min(700.0).max(-700.0).exp();
  pbr = (pbr.array() / (1.0 + pbr.array())).matrix();
  Matrix mass(N, topo.n_node());
  mass.col(0).setOnes();
  for (Index b = 0; b < B; ++b) {
    mass.col(2 * b + 1) = mass.col(b).cwiseProduct(pbr.col(b));
    mass.col(2 * b + 2) = mass.col(b) - mass.col(2 * b + 1);
  }
  return mass.rightCols(topo.n_leaf());
}

std::vector<int> predict_batch(const Matrix& X, const ModelParams& params,
                               const TreeTopology& topo, Scalar gamma) {
  const Matrix P = leaf_probability_matrix(X, params, topo, gamma);
  const Matrix proba = P * params.C.transpose();  // N x K
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Index i = 0; i < X.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < proba.cols(); ++k) {
      if (proba(i, k) > proba(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Scalar accuracy(const ModelParams& params, const Dataset& data,
                const TreeTopology& topo, Scalar gamma) {
  const auto pred = predict_batch(data.X, params, topo, gamma);
  Index hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == data.y[i]) ++hits;
  }
  return static_cast<Scalar>(hits) / static_cast<Scalar>(pred.size());
}

namespace {

std::string fmt17(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  const Index p = model.params.a.rows();
  const Index B = model.params.a.cols();
  const Index K = model.params.C.rows();
  const Index L = model.params.C.cols();
  out << "sorct-model 1\n";
  out << "depth " << model.depth << "\n";
  out << "gamma " << fmt17(model.gamma) << "\n";
  out << "label " << model.label_name << "\n";
  out << "features " << p << "\n";
  out << "classes " << K << "\n";
  for (Index j = 0; j < p; ++j) {
    out << "feature " << fmt17(model.scaling.min[j]) << " "
        << fmt17(model.scaling.range[j]) << " " << model.feature_names[static_cast<std::size_t>(j)]
        << "\n";
  }
  for (Index k = 0; k < K; ++k) {
    out << "class " << model.class_names[static_cast<std::size_t>(k)] << "\n";
  }
  out << "a\n";
  for (Index j = 0; j < p; ++j) {
    for (Index b = 0; b < B; ++b) out << (b ? " " : "") << fmt17(model.params.a(j, b));
    out << "\n";
  }
  out << "mu\n";
  for (Index b = 0; b < B; ++b) out << (b ? " " : "") << fmt17(model.params.mu[b]);
  out << "\n";
  out << "C\n";
  for (Index k = 0; k < K; ++k) {
    for (Index t = 0; t < L; ++t) out << (t ? " " : "") << fmt17(model.params.C(k, t));
    out << "\n";
  }
  out << "end\n";
  if (!out) throw std::runtime_error("failed writing model file: " + path);
}

namespace {

std::string expect_line(std::istream& in, const std::string& what) {
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("model file truncated while reading " + what);
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  Model model;
  if (expect_line(in, "header") != "sorct-model 1") {
    throw std::runtime_error(path + ": not a sorct model file");
  }
  Index p = 0, K = 0;
  std::string line;
  auto field = [&](const std::string& key) {
    line = expect_line(in, key);
    std::istringstream ss(line);
    std::string k;
    ss >> k;
    if (k != key) throw std::runtime_error(path + ": expected '" + key + "'");
    return line.size() > key.size() + 1 ? line.substr(key.size() + 1)
                                        : std::string();
  };
  model.depth = std::stoi(field("depth"));
  model.gamma = std::strtod(field("gamma").c_str(), nullptr);
  model.label_name = field("label");
  p = std::stol(field("features"));
  K = std::stol(field("classes"));
  const Index B = (Index{1} << model.depth) - 1;
  const Index L = Index{1} << model.depth;
  model.scaling.min.resize(p);
  model.scaling.range.resize(p);
  for (Index j = 0; j < p; ++j) {
    std::istringstream ss(expect_line(in, "feature"));
    std::string key, name;
    double lo, range;
    ss >> key >> lo >> range;
    if (key != "feature" || !ss) throw std::runtime_error(path + ": bad feature line");
    std::getline(ss, name);
    model.feature_names.push_back(name.empty() ? name : name.substr(1));
    model.scaling.min[j] = lo;
    model.scaling.range[j] = range;
  }
  for (Index k = 0; k < K; ++k) {
    std::string cl = expect_line(in, "class");
    if (cl.rfind("class ", 0) != 0) throw std::runtime_error(path + ": bad class line");
    model.class_names.push_back(cl.substr(6));
  }
  auto read_block = [&](const std::string& name, Index rows, Index cols, Matrix& out) {
    if (expect_line(in, name) != name) {
      throw std::runtime_error(path + ": expected block '" + name + "'");
    }
    out.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      std::istringstream ss(expect_line(in, name + " row"));
      for (Index c = 0; c < cols; ++c) {
        if (!(ss >> out(r, c))) {
          throw std::runtime_error(path + ": short row in block '" + name + "'");
        }
      }
    }
  };
  read_block("a", p, B, model.params.a);
  Matrix mu_row;
  read_block("mu", 1, B, mu_row);
  model.params.mu = mu_row.row(0).transpose();
  read_block("C", K, L, model.params.C);
  if (expect_line(in, "end") != "end") throw std::runtime_error(path + ": missing end marker");
  return model;
}

}  // namespace sorct
