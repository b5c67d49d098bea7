#include "sorct/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace sorct {

namespace {

// sum_{i in I_k} x_ij as a p x K matrix.
Matrix class_feature_sums(const Dataset& data) {
  Matrix S = Matrix::Zero(data.n_features(), data.n_classes);
  for (Index i = 0; i < data.n(); ++i) {
    S.col(data.y[static_cast<std::size_t>(i)]) += data.X.row(i).transpose();
  }
  return S;
}

Scalar depth1_data_term(const Dataset& data, const Matrix& W) {
  if (data.n_classes != 2) {
    throw std::invalid_argument("depth-1 bound requires exactly two classes");
  }
  const Matrix S = class_feature_sums(data);
  Scalar best = 0.0;
  for (Index j = 0; j < S.rows(); ++j) {
    best = std::max(best, std::abs(W(0, 1) * S(j, 0) - W(1, 0) * S(j, 1)));
  }
  return best;
}

}  // namespace

Scalar lambda_bound_depth1(const Dataset& data, const Matrix& W, Scalar gamma) {
  // f is symmetric, so the endpoint maximum is f(1); the max is kept explicit
  const Scalar fmax =
      std::max(logistic_density(-1.0, gamma), logistic_density(1.0, gamma));
  return depth1_data_term(data, W) * fmax /
         (static_cast<Scalar>(data.n()) * static_cast<Scalar>(data.n_features()));
}

Scalar lambda_bound_depth1_no_p(const Dataset& data, const Matrix& W,
                                Scalar gamma) {
  return lambda_bound_depth1(data, W, gamma) * static_cast<Scalar>(data.n_features());
}

namespace {

// Enumerates leaf labelings (one class per leaf) covering every class.
std::vector<std::vector<int>> feasible_labelings(Index n_classes, Index n_leaf) {
  std::vector<std::vector<int>> out;
  std::vector<int> label(static_cast<std::size_t>(n_leaf), 0);
  for (;;) {
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int l : label) seen[static_cast<std::size_t>(l)] = true;
    if (std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      out.push_back(label);
    }
    Index pos = 0;
    while (pos < n_leaf) {
      if (++label[static_cast<std::size_t>(pos)] < n_classes) break;
      label[static_cast<std::size_t>(pos)] = 0;
      ++pos;
    }
    if (pos == n_leaf) break;
  }
  return out;
}

// Row-gradient norms of g at a = 0 for one (mu, labeling): at a = 0 the
// routing is identical for every individual, so the gradient factors into
// per-class feature sums times per-node tree terms.
struct ZeroGradient {
  ZeroGradient(const Matrix& S, const Matrix& W, const TreeTopology& topo,
               Scalar gamma, Scalar n_inv_p_inv)
      : S_(S), W_(W), topo_(topo), gamma_(gamma), scale_(n_inv_p_inv) {
    const Index nodes = topo.n_node();
    mass_.resize(nodes);
    U_.resize(nodes, W.rows());
    T_.resize(topo.n_branch(), W.rows());
  }

  // grad is p x B; returns (inf_norm_max, one_norm_max) over rows.
  std::pair<Scalar, Scalar> norms(const Vector& mu, const std::vector<int>& label) {
    const Index B = topo_.n_branch();
    const Index K = W_.rows();
    Vector F(B), f(B);
    for (Index b = 0; b < B; ++b) {
      F[b] = logistic_cdf(-mu[b], gamma_);
      f[b] = logistic_density(-mu[b], gamma_);
    }
    mass_[0] = 1.0;
    for (Index b = 0; b < B; ++b) {
      mass_[2 * b + 1] = mass_[b] * F[b];
      mass_[2 * b + 2] = mass_[b] * (1.0 - F[b]);
    }
    for (Index t = 0; t < topo_.n_leaf(); ++t) {
      U_.row(B + t) = W_.col(label[static_cast<std::size_t>(t)]).transpose();
    }
    for (Index b = B - 1; b >= 0; --b) {
      U_.row(b) = F[b] * U_.row(2 * b + 1) + (1.0 - F[b]) * U_.row(2 * b + 2);
    }
    for (Index b = 0; b < B; ++b) {
      T_.row(b) = f[b] * mass_[b] * (U_.row(2 * b + 1) - U_.row(2 * b + 2));
    }
    grad_.noalias() = S_ * T_.transpose();
    grad_ *= scale_;
    Scalar max_inf = 0.0, max_one = 0.0;
    for (Index j = 0; j < grad_.rows(); ++j) {
      max_inf = std::max(max_inf, grad_.row(j).cwiseAbs().maxCoeff());
      max_one = std::max(max_one, grad_.row(j).cwiseAbs().sum());
    }
    (void)K;
    return {max_inf, max_one};
  }

 private:
  const Matrix& S_;
  const Matrix& W_;
  const TreeTopology& topo_;
  Scalar gamma_;
  Scalar scale_;
  Vector mass_;
  Matrix U_;
  Matrix T_;
  Matrix grad_;
};

struct SearchBest {
  Scalar value = -1.0;
  Vector mu;
  std::size_t labeling = 0;
};

}  // namespace

BoundReport lambda_bound_general(const Dataset& data, const Matrix& W,
                                 Scalar gamma, const TreeTopology& topo,
                                 Scalar sigma, int mu_grid, bool refine) {
  if (data.n_classes > 4 || topo.depth > 3) {
    throw std::invalid_argument(
        "general bound enumeration is capped at 4 classes and depth 3");
  }
  if (mu_grid < 2) throw std::invalid_argument("mu_grid must be at least 2");
  if (sigma < 0.0 || sigma > 1.0) throw std::invalid_argument("sigma must be in [0, 1]");
  if (data.n_classes > topo.n_leaf()) {
    throw std::invalid_argument("more classes than leaves, coverage impossible");
  }

  const Index B = topo.n_branch();
  const auto labelings = feasible_labelings(data.n_classes, topo.n_leaf());
  const Matrix S = class_feature_sums(data);
  const Scalar scale = 1.0 / (static_cast<Scalar>(data.n()) *
                              static_cast<Scalar>(data.n_features()));
  ZeroGradient zg(S, W, topo, gamma, scale);

  constexpr double kWorkCap = 2e7;
  auto grid_work = [&](int g) {
    return static_cast<double>(labelings.size()) * std::pow(static_cast<double>(g), static_cast<double>(B));
  };
  if (grid_work(mu_grid) > kWorkCap) {
    throw std::invalid_argument("enumeration size cap exceeded");
  }

  SearchBest best_inf, best_one;
  int g_res = mu_grid;
  Scalar prev_inf = -1.0, prev_one = -1.0;
  for (;;) {
    best_inf = SearchBest{};
    best_one = SearchBest{};
    Vector grid(g_res);
    for (int g = 0; g < g_res; ++g) {
      grid[g] = -1.0 + 2.0 * static_cast<Scalar>(g) / static_cast<Scalar>(g_res - 1);
    }
    std::vector<int> digits(static_cast<std::size_t>(B), 0);
    Vector mu(B);
    for (;;) {
      for (Index b = 0; b < B; ++b) mu[b] = grid[digits[static_cast<std::size_t>(b)]];
      for (std::size_t c = 0; c < labelings.size(); ++c) {
        const auto [ninf, none] = zg.norms(mu, labelings[c]);
        if (ninf > best_inf.value) best_inf = {ninf, mu, c};
        if (none > best_one.value) best_one = {none, mu, c};
      }
      Index pos = 0;
      while (pos < B) {
        if (++digits[static_cast<std::size_t>(pos)] < g_res) break;
        digits[static_cast<std::size_t>(pos)] = 0;
        ++pos;
      }
      if (pos == B) break;
    }
    const bool converged =
        prev_inf >= 0.0 &&
        std::abs(best_inf.value - prev_inf) <= 0.01 * std::max(prev_inf, Scalar(1e-300)) &&
        std::abs(best_one.value - prev_one) <= 0.01 * std::max(prev_one, Scalar(1e-300));
    prev_inf = best_inf.value;
    prev_one = best_one.value;
    const int g_next = 2 * g_res - 1;  // nested refinement keeps old points
    if (!refine || converged || grid_work(g_next) > kWorkCap) break;
    g_res = g_next;
  }

  // local coordinate search around the winning grid point, zooming the
  // interval; the grid handles global structure, this removes the grid gap
  auto polish = [&](SearchBest& best, bool use_inf) {
    const Scalar spacing = 2.0 / static_cast<Scalar>(g_res - 1);
    Vector mu = best.mu;
    const auto& label = labelings[best.labeling];
    for (int round = 0; round < 3; ++round) {
      for (Index b = 0; b < B; ++b) {
        Scalar half = spacing;
        for (int zoom = 0; zoom < 14; ++zoom) {
          const Scalar lo = std::max(Scalar(-1), mu[b] - half);
          const Scalar hi = std::min(Scalar(1), mu[b] + half);
          Scalar best_v = -1.0, best_x = mu[b];
          for (int s = 0; s <= 8; ++s) {
            const Scalar x = lo + (hi - lo) * static_cast<Scalar>(s) / 8.0;
            mu[b] = x;
            const auto [ninf, none] = zg.norms(mu, label);
            const Scalar v = use_inf ? ninf : none;
            if (v > best_v) {
              best_v = v;
              best_x = x;
            }
          }
          mu[b] = best_x;
          half *= 0.25;
        }
      }
    }
    const auto [ninf, none] = zg.norms(mu, label);
    const Scalar v = use_inf ? ninf : none;
    if (v > best.value) {
      best.value = v;
      best.mu = mu;
    }
  };
  // refine=false evaluates the grid alone (depth-1 endpoint evaluation)
  if (refine) {
    if (best_inf.value >= 0.0) polish(best_inf, true);
    if (best_one.value >= 0.0) polish(best_one, false);
  }

  BoundReport report;
  report.sigma = sigma;
  report.method = BoundReport::Method::enumerated_general;
  report.grid_resolution = g_res;
  report.max_grad_inf_norm = best_inf.value;
  report.max_grad_one_norm = best_one.value;
  report.lambda_local_bound = (1.0 - sigma) * best_inf.value;
  report.lambda_global_bound = sigma * best_one.value;
  return report;
}

bool verify_zero_stationary(const Dataset& data, const Hyperparams& hyper,
                            const TreeTopology& topo, const SolverConfig& config) {
  const Index p = data.n_features();
  const Matrix zero = Matrix::Zero(p, topo.n_branch());
  const SolveOutcome restricted = solve_with_fixed_a(data, hyper, topo, config, zero);

  const auto [value, grad] =
      objective_and_gradient(restricted.params, data, hyper, topo);
  (void)value;
  // -grad row lies in lambda_local*B_inf + lambda_global*B_1 iff the excess
  // over the box fits in the l1 budget
  constexpr Scalar tol = 1e-8;
  for (Index j = 0; j < p; ++j) {
    Scalar excess = 0.0;
    for (Index b = 0; b < topo.n_branch(); ++b) {
      excess += std::max(std::abs(grad.d_a(j, b)) - hyper.lambda_local, 0.0);
    }
    if (excess > hyper.lambda_global + tol) return false;
  }
  return true;
}

}  // namespace sorct
