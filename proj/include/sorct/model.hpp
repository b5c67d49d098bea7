#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sorct/data.hpp"
#include "sorct/topology.hpp"
#include "sorct/types.hpp"

namespace sorct {

// Oblique-cut coefficients a (p x |branch|), location parameters mu
// (|branch|), leaf class probabilities C (K x |leaf|). Box bounds a, mu in
// [-1, 1], C in [0, 1] with each leaf column summing to 1.
struct ModelParams {
  Matrix a;
  Vector mu;
  Matrix C;
};

struct Hyperparams {
  Scalar lambda_local = 0.0;
  Scalar lambda_global = 0.0;
  Scalar gamma = 512.0;
  Matrix W;    // K x K misclassification costs, zero diagonal
  Vector rho;  // per-class performance floors in [0, 1)
};

// K x K matrix with the given off-diagonal cost and zero diagonal.
Matrix equal_cost_matrix(int n_classes, Scalar off_diagonal = 0.5);

struct Gradient {
  Matrix d_a;
  Vector d_mu;
  Matrix d_C;
};

// Logistic CDF with steepness gamma, F(v) = 1 / (1 + exp(-v * gamma)),
// evaluated in overflow-safe form; saturates to exact 0/1 for stiff gamma.
Scalar logistic_cdf(Scalar v, Scalar gamma);

// f(v) = gamma * F(v) * (1 - F(v)); underflows to 0 together with F.
Scalar logistic_density(Scalar v, Scalar gamma);

// F((1/p) a_col . x - mu_t): probability of taking the left branch.
Scalar branch_probability(const Vector& x, const Vector& a_col, Scalar mu_t,
                          Scalar gamma);

// Per-leaf fall probabilities; entries sum to 1.
Vector leaf_probabilities(const Vector& x, const ModelParams& params,
                          const TreeTopology& topo, Scalar gamma);

// Expected misclassification cost over the sample:
// (1/N) sum_i sum_t P_it sum_k W_{y_i k} C_kt.
Scalar expected_cost(const ModelParams& params, const Dataset& data,
                     const Matrix& W, const TreeTopology& topo, Scalar gamma);

// lambda_local * sum_j ||a_j.||_1 + lambda_global * sum_j ||a_j.||_inf.
Scalar penalty_value(const Matrix& a, Scalar lambda_local, Scalar lambda_global);

// Deterministic penalty subgradient: sign(a_jt) per nonzero entry for the
// l1 term, the full weight on the first row argmax (node order) for the
// l-inf term; zero rows contribute zero.
Matrix penalty_subgradient(const Matrix& a, Scalar lambda_local,
                           Scalar lambda_global);

// expected_cost plus both sparsity penalties.
Scalar objective(const ModelParams& params, const Dataset& data,
                 const Hyperparams& hyper, const TreeTopology& topo);

// Returns the full objective value and the gradient of the smooth part
// (expected cost) only; penalty subgradients are handled by the solver.
std::pair<Scalar, Gradient> objective_and_gradient(const ModelParams& params,
                                                   const Dataset& data,
                                                   const Hyperparams& hyper,
                                                   const TreeTopology& topo);

// sum_{i in I_k} sum_t P_it C_kt - rho_k |I_k| per class; >= 0 is feasible.
Vector performance_slack(const ModelParams& params, const Dataset& data,
                         const Vector& rho, const TreeTopology& topo,
                         Scalar gamma);

// Optimal binary leaf labelling for fixed (a, mu): every leaf gets exactly
// one class, every class at least one leaf, expected cost minimal. Requires
// n_classes <= n_leaves.
Matrix round_leaf_labels(const Matrix& a, const Vector& mu, const Dataset& data,
                         const Matrix& W, const TreeTopology& topo,
                         Scalar gamma);

// Class-membership probabilities sum_t C_kt P_xt.
Vector predict_proba(const Vector& x, const ModelParams& params,
                     const TreeTopology& topo, Scalar gamma);

// Most probable class, ties broken toward the lowest class id.
int predict(const Vector& x, const ModelParams& params,
            const TreeTopology& topo, Scalar gamma);

// Batched variants over the rows of X.
Matrix leaf_probability_matrix(const Matrix& X, const ModelParams& params,
                               const TreeTopology& topo, Scalar gamma);
std::vector<int> predict_batch(const Matrix& X, const ModelParams& params,
                               const TreeTopology& topo, Scalar gamma);
Scalar accuracy(const ModelParams& params, const Dataset& data,
                const TreeTopology& topo, Scalar gamma);

// Shared forward/backward machinery over a whole sample. forward() caches
// branch probabilities, node masses and per-class leaf mass; backward()
// differentiates sum_i sum_t P_it V(y_i, t) for a class-level leaf weight
// matrix V (K x |leaf|), which covers both the expected cost and the
// performance-constraint penalty.
class BatchEvaluator {
 public:
  BatchEvaluator(const Matrix& X, const std::vector<int>& y, int n_classes,
                 const TreeTopology& topo, const Matrix& W, Scalar gamma);

  void forward(const ModelParams& params);

  Scalar cost(const Matrix& C) const;               // g
  const Matrix& leaf_mass_by_class() const { return m_; }  // K x L
  Vector class_mass(const Matrix& C) const;         // q_k = sum_t m_kt C_kt
  Matrix cost_gradient_C() const;                   // (1/N) W^T m

  void backward(const Matrix& V, Matrix& d_a, Vector& d_mu) const;

  Index n() const { return X_.rows(); }
  Index n_features() const { return X_.cols(); }

 private:
  const Matrix& X_;
  const std::vector<int>& y_;
  int n_classes_;
  const TreeTopology& topo_;
  Matrix W_;
  Scalar gamma_;
  Matrix args_, pbr_, fden_;  // N x B
  Matrix mass_;               // N x nodes, leaf block = P_it
  Matrix m_;                  // K x L
};

// Model file: plain text, %.17g floats, bit-exact round trip.
struct Model {
  int depth = 0;
  Scalar gamma = 512.0;
  ModelParams params;
  ScalingRecord scaling;
  std::vector<std::string> feature_names;
  std::vector<std::string> class_names;
  std::string label_name;
};

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace sorct
