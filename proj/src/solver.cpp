#include "sorct/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <utility>

#include "sorct/parallel.hpp"
#include "sorct/rng.hpp"

namespace sorct {

namespace {

constexpr Scalar kSnapEps = 1e-8;
constexpr Scalar kPenaltyMax = 1e14;
constexpr Scalar kMinStep = 1e-16;
constexpr Scalar kMaxStep = 1e8;  // backtracking protects against overshoot

Vector clamp_box(const Vector& v) { return v.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace

Vector project_to_simplex(const Vector& v) {
  const Index n = v.size();
  std::vector<Scalar> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<Scalar>());
  Scalar cum = 0.0;
  Scalar tau = 0.0;
  for (Index i = 0; i < n; ++i) {
    cum += u[static_cast<std::size_t>(i)];
    const Scalar t = (cum - 1.0) / static_cast<Scalar>(i + 1);
    if (u[static_cast<std::size_t>(i)] > t) tau = t;
  }
  return (v.array() - tau).max(0.0);
}

ModelParams project_feasible(ModelParams params) {
  params.a = params.a.cwiseMax(-1.0).cwiseMin(1.0);
  params.mu = clamp_box(params.mu);
  for (Index t = 0; t < params.C.cols(); ++t) {
    params.C.col(t) = project_to_simplex(params.C.col(t));
  }
  return params;
}

Matrix prox_sparsity(const Matrix& a, Scalar step, Scalar lambda_local,
                     Scalar lambda_global) {
  const Scalar thr = step * lambda_local;
  Matrix out(a.rows(), a.cols());
  if (thr > 0) {
    out = a.array().sign() * (a.array().abs() - thr).max(0.0);
  } else {
    out = a;
  }
  const Scalar budget = step * lambda_global;
  if (budget > 0) {
    std::vector<Scalar> mags(static_cast<std::size_t>(a.cols()));
    for (Index j = 0; j < a.rows(); ++j) {
      Scalar total = 0.0;
      for (Index t = 0; t < a.cols(); ++t) {
        mags[static_cast<std::size_t>(t)] = std::abs(out(j, t));
        total += mags[static_cast<std::size_t>(t)];
      }
      if (total <= budget) {
        out.row(j).setZero();
        continue;
      }
      // water level theta with sum (|x| - theta)_+ = budget; the row prox
      // clips every magnitude at theta
      std::sort(mags.begin(), mags.end(), std::greater<Scalar>());
      Scalar cum = 0.0;
      Scalar theta = 0.0;
      for (Index k = 0; k < a.cols(); ++k) {
        cum += mags[static_cast<std::size_t>(k)];
        const Scalar level = (cum - budget) / static_cast<Scalar>(k + 1);
        if (mags[static_cast<std::size_t>(k)] > level) theta = level;
      }
      for (Index t = 0; t < a.cols(); ++t) {
        const Scalar v = out(j, t);
        const Scalar m = std::min(std::abs(v), theta);
        out(j, t) = v >= 0 ? m : -m;
      }
    }
  }
  return out;
}

ModelParams random_start(const Dataset& data, const TreeTopology& topo,
                         std::uint64_t seed, int start_index) {
  Rng rng(stream_seed(seed, kStreamStart, static_cast<std::uint64_t>(start_index)));
  const Index p = data.n_features();
  const Index B = topo.n_branch();
  const Index K = data.n_classes;
  const Index L = topo.n_leaf();
  ModelParams params;
  params.a.resize(p, B);
  for (Index b = 0; b < B; ++b) {
    for (Index j = 0; j < p; ++j) params.a(j, b) = rng.uniform(-1.0, 1.0);
  }
  params.mu.resize(B);
  for (Index b = 0; b < B; ++b) params.mu[b] = rng.uniform(-1.0, 1.0);
  params.C.resize(K, L);
  for (Index t = 0; t < L; ++t) {
    Scalar total = 0.0;
    for (Index k = 0; k < K; ++k) {
      params.C(k, t) = rng.exponential();
      total += params.C(k, t);
    }
    params.C.col(t) /= total;
  }
  return params;
}

namespace {

// min sum (e_i - s_i)_+^2 over s >= 0, sum s <= budget; e_i >= 0.
Scalar waterfill_residual_sq(std::vector<Scalar> e, Scalar budget) {
  Scalar total = 0.0;
  for (Scalar v : e) total += v;
  if (total <= budget) return 0.0;
  std::sort(e.begin(), e.end(), std::greater<Scalar>());
  Scalar cum = 0.0;
  Scalar theta = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    cum += e[k];
    const Scalar level = (cum - budget) / static_cast<Scalar>(k + 1);
    if (e[k] > level) theta = level;
  }
  Scalar res = 0.0;
  for (Scalar v : e) {
    const Scalar kept = std::min(v, theta);
    res += kept * kept;
  }
  return res;
}

// Squared distance from v (= minus smooth gradient, one coefficient row) to
// lambda_local * d||.||_1(a_row) + lambda_global * d||.||_inf(a_row).
Scalar row_residual_sq(const RowVector& a_row, const RowVector& v,
                       Scalar lambda_local, Scalar lambda_global) {
  const Index B = a_row.size();
  if (lambda_global == 0.0) {
    Scalar s2 = 0.0;
    for (Index t = 0; t < B; ++t) {
      Scalar d;
      if (a_row[t] != 0.0) {
        d = v[t] - lambda_local * (a_row[t] > 0 ? 1.0 : -1.0);
      } else {
        d = std::max(std::abs(v[t]) - lambda_local, 0.0);
      }
      s2 += d * d;
    }
    return s2;
  }
  const Scalar rowmax = a_row.cwiseAbs().maxCoeff();
  if (rowmax == 0.0) {
    std::vector<Scalar> e(static_cast<std::size_t>(B));
    for (Index t = 0; t < B; ++t) {
      e[static_cast<std::size_t>(t)] = std::max(std::abs(v[t]) - lambda_local, 0.0);
    }
    return waterfill_residual_sq(std::move(e), lambda_global);
  }
  // l-inf subdifferential lives on the argmax face
  const Scalar face = rowmax * (1.0 - 1e-12);
  std::vector<Index> argmax;
  Scalar s2 = 0.0;
  for (Index t = 0; t < B; ++t) {
    if (std::abs(a_row[t]) >= face) {
      argmax.push_back(t);
    } else if (a_row[t] != 0.0) {
      const Scalar d = v[t] - lambda_local * (a_row[t] > 0 ? 1.0 : -1.0);
      s2 += d * d;
    } else {
      const Scalar d = std::max(std::abs(v[t]) - lambda_local, 0.0);
      s2 += d * d;
    }
  }
  Vector z(static_cast<Index>(argmax.size()));
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    const Index t = argmax[i];
    const Scalar sign = a_row[t] > 0 ? 1.0 : -1.0;
    z[static_cast<Index>(i)] = sign * v[t] - lambda_local;
  }
  const Vector w = project_to_simplex(z / lambda_global);
  s2 += (z - lambda_global * w).squaredNorm();
  return s2;
}

ResidualBreakdown residual_from_grads(const ModelParams& params,
                                      const Matrix& d_a, const Vector& d_mu,
                                      const Matrix& d_C, Scalar lambda_local,
                                      Scalar lambda_global, bool include_a) {
  ResidualBreakdown r;
  if (include_a) {
    Scalar s2 = 0.0;
    for (Index j = 0; j < params.a.rows(); ++j) {
      const RowVector v = -d_a.row(j);
      s2 += row_residual_sq(params.a.row(j), v, lambda_local, lambda_global);
    }
    r.a_block = std::sqrt(s2);
  }
  r.mu_block = (params.mu - clamp_box(params.mu - d_mu)).norm();
  Scalar c2 = 0.0;
  for (Index t = 0; t < params.C.cols(); ++t) {
    const Vector proj = project_to_simplex(params.C.col(t) - d_C.col(t));
    c2 += (params.C.col(t) - proj).squaredNorm();
  }
  r.c_block = std::sqrt(c2);
  r.total = std::sqrt(r.a_block * r.a_block + r.mu_block * r.mu_block + c2);
  return r;
}

struct MeritTerms {
  Scalar g = 0.0;
  Scalar violation_sq = 0.0;
  Vector cov;
  Vector perf;
  Scalar max_violation = 0.0;
};

struct StageStats {
  int iterations = 0;
  Scalar nu = 1.0;
};

class DescentEngine {
 public:
  DescentEngine(const Dataset& data, const TreeTopology& topo,
                const Hyperparams& hyper, const SolverConfig& config,
                bool update_a)
      : data_(data),
        topo_(topo),
        hyper_(hyper),
        config_(config),
        update_a_(update_a),
        ev_(data.X, data.y, data.n_classes, topo, hyper.W, hyper.gamma),
        a_scale_(static_cast<Scalar>(data.n_features())),
        rho_(data.n_classes),
        inv_class_size_(data.n_classes) {
    const bool with_rho = hyper_.rho.size() == data.n_classes;
    for (int k = 0; k < data_.n_classes; ++k) {
      const Scalar nk = static_cast<Scalar>(
          data_.class_indices[static_cast<std::size_t>(k)].size());
      rho_[k] = with_rho ? hyper_.rho[k] : 0.0;
      inv_class_size_[k] = nk > 0 ? 1.0 / nk : 0.0;
    }
  }

  // The performance violation is measured per class in mass-fraction units,
  // rho_k - q_k / |I_k|, so its penalty is commensurate with the cost term
  // regardless of the sample size.
  MeritTerms eval(const ModelParams& p) {
    ev_.forward(p);
    MeritTerms t;
    t.g = ev_.cost(p.C);
    const Vector q = ev_.class_mass(p.C);
    t.cov = (1.0 - p.C.rowwise().sum().array()).max(0.0);
    t.perf = (rho_ - q.cwiseProduct(inv_class_size_)).cwiseMax(0.0);
    t.violation_sq = t.cov.squaredNorm() + t.perf.squaredNorm();
    t.max_violation = std::max(t.cov.size() ? t.cov.maxCoeff() : 0.0,
                               t.perf.size() ? t.perf.maxCoeff() : 0.0);
    return t;
  }

  Scalar merit(const MeritTerms& t, const ModelParams& p, Scalar nu) const {
    return t.g + penalty_value(p.a, hyper_.lambda_local, hyper_.lambda_global) +
           nu * t.violation_sq;
  }

  // Gradients of the nu-smooth part; requires forward caches at p.
  void gradients(const ModelParams& p, const MeritTerms& t, Scalar nu,
                 Matrix& d_a, Vector& d_mu, Matrix& d_C) const {
    const Scalar inv_n = 1.0 / static_cast<Scalar>(data_.n());
    Matrix V = hyper_.W * p.C * inv_n;
    for (int k = 0; k < data_.n_classes; ++k) {
      if (t.perf[k] > 0.0) {
        V.row(k) -= 2.0 * nu * t.perf[k] * inv_class_size_[k] * p.C.row(k);
      }
    }
    ev_.backward(V, d_a, d_mu);
    d_C = ev_.cost_gradient_C();
    const Matrix& m = ev_.leaf_mass_by_class();
    for (int k = 0; k < data_.n_classes; ++k) {
      if (t.perf[k] > 0.0) {
        d_C.row(k) -= 2.0 * nu * t.perf[k] * inv_class_size_[k] * m.row(k);
      }
      if (t.cov[k] > 0.0) d_C.row(k).array() -= 2.0 * nu * t.cov[k];
    }
  }

  // The a block runs in a diagonally scaled metric (factor p): the cost
  // gradient in a carries a 1/p from the cut argument, and without the
  // rescaling the cuts move far slower than mu and C and the iterates drop
  // into label-collapse basins. Prox thresholds scale with the block step.
  ModelParams step(const ModelParams& p, const Matrix& d_a, const Vector& d_mu,
                   const Matrix& d_C, Scalar alpha) const {
    ModelParams cand;
    if (update_a_) {
      const Scalar a_step = alpha * a_scale_;
      cand.a = prox_sparsity(p.a - a_step * d_a, a_step, hyper_.lambda_local,
                             hyper_.lambda_global)
                   .cwiseMax(-1.0)
                   .cwiseMin(1.0);
    } else {
      cand.a = p.a;
    }
    cand.mu = clamp_box(p.mu - alpha * d_mu);
    cand.C.resize(p.C.rows(), p.C.cols());
    const Matrix target = p.C - alpha * d_C;
    for (Index t = 0; t < p.C.cols(); ++t) {
      cand.C.col(t) = project_to_simplex(target.col(t));
    }
    return cand;
  }

  Scalar step_metric_sq(const ModelParams& cand, const ModelParams& p) const {
    return (cand.a - p.a).squaredNorm() / a_scale_ +
           (cand.mu - p.mu).squaredNorm() + (cand.C - p.C).squaredNorm();
  }

  ResidualBreakdown residual(const ModelParams& p, const MeritTerms& t,
                             Scalar nu) const {
    Matrix d_a, d_C;
    Vector d_mu;
    gradients(p, t, nu, d_a, d_mu, d_C);
    return residual_from_grads(p, d_a, d_mu, d_C, hyper_.lambda_local,
                               hyper_.lambda_global, update_a_);
  }

  StageStats run(ModelParams& p, int budget, Scalar stat_tol) {
    StageStats stats;
    stats.nu = config_.penalty_init;
    Scalar alpha = config_.step_init;
    Scalar inner_tol = stat_tol;
    int tightenings = 0;
    MeritTerms cur = eval(p);
    Scalar cur_merit = merit(cur, p, stats.nu);
    while (stats.iterations < budget) {
      Matrix d_a, d_C;
      Vector d_mu;
      gradients(p, cur, stats.nu, d_a, d_mu, d_C);
      bool accepted = false;
      ModelParams cand;
      MeritTerms cand_terms;
      Scalar step_sq = 0.0;
      while (alpha >= kMinStep) {
        cand = step(p, d_a, d_mu, d_C, alpha);
        step_sq = step_metric_sq(cand, p);
        cand_terms = eval(cand);
        const Scalar cand_merit = merit(cand_terms, cand, stats.nu);
        if (cand_merit <= cur_merit - config_.armijo_c * step_sq / alpha) {
          accepted = true;
          cur_merit = cand_merit;
          break;
        }
        alpha *= config_.step_shrink;
      }
      ++stats.iterations;
      Scalar residual_gm = 0.0;
      if (accepted) {
        residual_gm = std::sqrt(step_sq) / alpha;
        p = std::move(cand);
        cur = cand_terms;
        alpha = std::min(alpha * 2.0, kMaxStep);
      } else {
        cur = eval(p);  // restore forward caches at p
        alpha = config_.step_init;
      }
      if (residual_gm <= inner_tol || !accepted) {
        if (cur.max_violation > config_.feasibility_tol &&
            stats.nu < kPenaltyMax) {
          stats.nu = std::min(stats.nu * config_.penalty_growth, kPenaltyMax);
          cur_merit = merit(cur, p, stats.nu);
          alpha = config_.step_init;
          inner_tol = stat_tol;
          continue;
        }
        const ResidualBreakdown res = residual(p, cur, stats.nu);
        if (res.total <= stat_tol || !accepted || tightenings >= 40) break;
        inner_tol *= 0.25;
        ++tightenings;
      }
    }
    return stats;
  }

 private:
  const Dataset& data_;
  const TreeTopology& topo_;
  Hyperparams hyper_;
  const SolverConfig& config_;
  bool update_a_;
  mutable BatchEvaluator ev_;
  Scalar a_scale_;
  Vector rho_;
  Vector inv_class_size_;
};

// Cold starts anneal the logistic steepness: each doubling keeps the previous
// solution inside the sharper stage's gradient window, so the cuts harden
// gradually instead of saturating from a random point.
std::vector<Scalar> gamma_stages(Scalar gamma, bool continuation) {
  if (!continuation || gamma <= 1.0) return {gamma};
  std::vector<Scalar> stages;
  for (Scalar s = 1.0; s < gamma; s *= 2.0) stages.push_back(s);
  stages.push_back(gamma);
  return stages;
}

SolveOutcome run_descent(const Dataset& data, const Hyperparams& hyper,
                         const TreeTopology& topo, const SolverConfig& config,
                         ModelParams params, bool cold_start, bool update_a) {
  const auto stages = gamma_stages(hyper.gamma,
                                   config.gamma_continuation && cold_start);
  int used = 0;
  Scalar final_nu = config.penalty_init;
  for (std::size_t s = 0; s < stages.size(); ++s) {
    const bool final_stage = s + 1 == stages.size();
    Hyperparams staged = hyper;
    staged.gamma = stages[s];
    const int budget =
        final_stage ? std::max(1, config.max_iters - used)
                    : std::max(1, config.max_iters /
                                      static_cast<int>(stages.size() + 1));
    DescentEngine engine(data, topo, staged, config, update_a);
    const StageStats stats = engine.run(
        params, budget,
        final_stage ? config.stationarity_tol : 10.0 * config.stationarity_tol);
    used += stats.iterations;
    if (final_stage) final_nu = stats.nu;
  }

  // soft-thresholding produces exact zeros; remove penalty-interaction dust
  for (Index j = 0; j < params.a.rows(); ++j) {
    for (Index t = 0; t < params.a.cols(); ++t) {
      if (std::abs(params.a(j, t)) < kSnapEps) params.a(j, t) = 0.0;
    }
  }

  SolveOutcome out;
  DescentEngine engine(data, topo, hyper, config, update_a);
  const MeritTerms terms = engine.eval(params);
  out.objective_value =
      terms.g + penalty_value(params.a, hyper.lambda_local, hyper.lambda_global);
  out.stationarity_residual = engine.residual(params, terms, final_nu).total;
  out.feasibility_residual = terms.max_violation;
  out.feasible = terms.max_violation <= config.feasibility_tol;
  out.iterations = used;
  out.params = std::move(params);
  return out;
}

}  // namespace

SolveResult solve(const Dataset& data, const Hyperparams& hyper,
                  const TreeTopology& topo, const SolverConfig& config,
                  const std::vector<ModelParams>* warm_starts) {
  const bool warm = warm_starts != nullptr && !warm_starts->empty();
  const int n = warm ? static_cast<int>(warm_starts->size()) : config.n_starts;
  if (n < 1) throw std::invalid_argument("solver needs at least one start");

  SolveResult result;
  result.pool.resize(static_cast<std::size_t>(n));
  parallel_for(n, config.threads, [&](Index i) {
    ModelParams start =
        warm ? project_feasible((*warm_starts)[static_cast<std::size_t>(i)])
             : random_start(data, topo, config.seed, static_cast<int>(i));
    SolveOutcome outcome = run_descent(data, hyper, topo, config,
                                       std::move(start), !warm, true);
    outcome.start_index = static_cast<int>(i);
    result.pool[static_cast<std::size_t>(i)] = std::move(outcome);
  });

  std::sort(result.pool.begin(), result.pool.end(),
            [](const SolveOutcome& x, const SolveOutcome& y) {
              if (x.objective_value != y.objective_value) {
                return x.objective_value < y.objective_value;
              }
              return x.start_index < y.start_index;
            });
  result.any_feasible = false;
  for (const auto& o : result.pool) {
    if (o.feasible) {
      result.best = o;
      result.any_feasible = true;
      break;
    }
  }
  if (!result.any_feasible) {
    // carry the least-infeasible outcome so callers can inspect it
    const auto it = std::min_element(
        result.pool.begin(), result.pool.end(),
        [](const SolveOutcome& x, const SolveOutcome& y) {
          if (x.feasibility_residual != y.feasibility_residual) {
            return x.feasibility_residual < y.feasibility_residual;
          }
          return x.objective_value < y.objective_value;
        });
    result.best = *it;
  }
  return result;
}

SolveOutcome solve_with_fixed_a(const Dataset& data, const Hyperparams& hyper,
                                const TreeTopology& topo,
                                const SolverConfig& config,
                                const Matrix& a_fixed) {
  std::vector<SolveOutcome> pool(static_cast<std::size_t>(config.n_starts));
  parallel_for(config.n_starts, config.threads, [&](Index i) {
    ModelParams start = random_start(data, topo, config.seed, static_cast<int>(i));
    start.a = a_fixed;
    SolveOutcome outcome =
        run_descent(data, hyper, topo, config, std::move(start), true, false);
    outcome.start_index = static_cast<int>(i);
    pool[static_cast<std::size_t>(i)] = std::move(outcome);
  });
  const auto it = std::min_element(
      pool.begin(), pool.end(), [](const SolveOutcome& x, const SolveOutcome& y) {
        if (x.feasible != y.feasible) return x.feasible;
        if (x.objective_value != y.objective_value) {
          return x.objective_value < y.objective_value;
        }
        return x.start_index < y.start_index;
      });
  return *it;
}

ResidualBreakdown stationarity_breakdown(const ModelParams& params,
                                         const Dataset& data,
                                         const Hyperparams& hyper,
                                         const TreeTopology& topo) {
  const auto [value, grad] = objective_and_gradient(params, data, hyper, topo);
  (void)value;
  return residual_from_grads(params, grad.d_a, grad.d_mu, grad.d_C,
                             hyper.lambda_local, hyper.lambda_global, true);
}

Scalar stationarity_residual(const ModelParams& params, const Dataset& data,
                             const Hyperparams& hyper, const TreeTopology& topo) {
  return stationarity_breakdown(params, data, hyper, topo).total;
}

}  // namespace sorct
