#pragma once

#include <cstdint>
#include <vector>

#include "sorct/data.hpp"
#include "sorct/model.hpp"
#include "sorct/topology.hpp"
#include "sorct/types.hpp"

namespace sorct {

struct SolverConfig {
  int n_starts = 20;
  int max_iters = 2000;
  Scalar stationarity_tol = 1e-4;
  Scalar feasibility_tol = 1e-6;
  Scalar penalty_init = 1.0;
  Scalar penalty_growth = 10.0;
  Scalar step_init = 1.0;
  Scalar step_shrink = 0.5;
  Scalar armijo_c = 1e-4;
  std::uint64_t seed = 0;
  int threads = 1;
  // Solve a relaxed-steepness ladder before the target gamma on cold starts;
  // the final stage always runs at the requested gamma.
  bool gamma_continuation = true;
};

struct SolveOutcome {
  ModelParams params;
  Scalar objective_value = 0.0;
  Scalar stationarity_residual = 0.0;
  Scalar feasibility_residual = 0.0;
  int iterations = 0;
  int start_index = -1;
  bool feasible = false;
};

struct SolveResult {
  SolveOutcome best;
  std::vector<SolveOutcome> pool;  // sorted by (objective, start_index)
  bool any_feasible = false;
};

// Multistart projected proximal-gradient descent on the penalized objective.
// Box and simplex constraints hold exactly by projection; coverage and
// performance constraints are driven below feasibility_tol by a growing
// quadratic penalty. When warm_starts are given they replace the random
// multistart pool one for one.
SolveResult solve(const Dataset& data, const Hyperparams& hyper,
                  const TreeTopology& topo, const SolverConfig& config,
                  const std::vector<ModelParams>* warm_starts = nullptr);

// Optimizes (mu, C) with the oblique coefficients pinned at a_fixed.
SolveOutcome solve_with_fixed_a(const Dataset& data, const Hyperparams& hyper,
                                const TreeTopology& topo,
                                const SolverConfig& config,
                                const Matrix& a_fixed);

// a, mu uniform on [-1, 1]; each leaf column of C uniform on the simplex.
ModelParams random_start(const Dataset& data, const TreeTopology& topo,
                         std::uint64_t seed, int start_index);

// Euclidean projection onto {w >= 0, sum w = 1}.
Vector project_to_simplex(const Vector& v);

// Clamps a and mu to their boxes, projects each leaf column of C onto the
// probability simplex. Idempotent.
ModelParams project_feasible(ModelParams params);

// Row-wise proximal map of step * (lambda_local ||.||_1 + lambda_global
// ||.||_inf): soft-threshold then magnitude clip at the l-inf water level.
Matrix prox_sparsity(const Matrix& a, Scalar step, Scalar lambda_local,
                     Scalar lambda_global);

struct ResidualBreakdown {
  Scalar a_block = 0.0;
  Scalar mu_block = 0.0;
  Scalar c_block = 0.0;
  Scalar total = 0.0;
};

// First-order stationarity measure: for each coefficient row, the distance
// from the negative smooth gradient to the set of admissible penalty
// subgradients (l1 kinks and the l-inf argmax face included); unit-step
// projected gradient norms for mu (box) and C (leaf simplexes). Coverage and
// performance constraints are not part of this measure.
ResidualBreakdown stationarity_breakdown(const ModelParams& params,
                                         const Dataset& data,
                                         const Hyperparams& hyper,
                                         const TreeTopology& topo);
Scalar stationarity_residual(const ModelParams& params, const Dataset& data,
                             const Hyperparams& hyper, const TreeTopology& topo);

}  // namespace sorct
