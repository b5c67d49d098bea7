#pragma once

#include "sorct/data.hpp"
#include "sorct/model.hpp"
#include "sorct/solver.hpp"
#include "sorct/topology.hpp"
#include "sorct/types.hpp"

namespace sorct {

struct BoundReport {
  Scalar lambda_local_bound = 0.0;
  Scalar lambda_global_bound = 0.0;
  Scalar sigma = 0.5;
  enum class Method { closed_form_depth1, enumerated_general } method =
      Method::enumerated_general;
  int grid_resolution = 0;
  // Largest row-gradient norms of the cost at a = 0 over the searched
  // (mu, binary C) space; the bounds are the sigma-weighted versions.
  Scalar max_grad_inf_norm = 0.0;
  Scalar max_grad_one_norm = 0.0;
};

// Closed-form depth-1 two-class threshold above which a = 0 is stationary:
// (1/(N p)) max_{mu in {-1,1}} f(-mu) * max_j |W_12 sum_{I_1} x_ij -
// W_21 sum_{I_2} x_ij|. Requires exactly two classes and depth 1.
Scalar lambda_bound_depth1(const Dataset& data, const Matrix& W, Scalar gamma);

// Variant with the 1/N constant (no 1/p); kept for reporting alongside the
// closed form, see cmd_bounds.
Scalar lambda_bound_depth1_no_p(const Dataset& data, const Matrix& W,
                                Scalar gamma);

// Grid-plus-polish approximation of the general thresholds: enumerates every
// feasible binary C, grids each mu_t over mu_grid equispaced points in
// [-1, 1] (nested refinement, stops when both maxima move < 1%), then runs a
// local coordinate search around the best grid point. Enforced caps:
// n_classes <= 4, depth <= 3, and bounded enumeration work.
BoundReport lambda_bound_general(const Dataset& data, const Matrix& W,
                                 Scalar gamma, const TreeTopology& topo,
                                 Scalar sigma, int mu_grid, bool refine = true);

// Optimizes (mu, C) with a frozen at zero, then checks the subdifferential
// inclusion -grad_a g in lambda_local*B_inf + lambda_global*B_1 row-wise.
bool verify_zero_stationary(const Dataset& data, const Hyperparams& hyper,
                            const TreeTopology& topo, const SolverConfig& config);

}  // namespace sorct
