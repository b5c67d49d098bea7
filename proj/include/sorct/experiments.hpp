#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sorct/baseline.hpp"
#include "sorct/data.hpp"
#include "sorct/model.hpp"
#include "sorct/solver.hpp"
#include "sorct/stats.hpp"
#include "sorct/topology.hpp"
#include "sorct/types.hpp"

namespace sorct {

struct SparsityReport {
  Scalar delta_local = 0.0;   // avg % of unused predictors per branch node
  Scalar delta_global = 0.0;  // % of predictors unused at every branch node
  Scalar zero_threshold = 0.0;
};

SparsityReport sparsity(const Matrix& a, Scalar epsilon = 1e-5);

// 17 values each: 0 followed by 2^r / (p * n_branch) (local) and 2^r / p
// (global) for r = -12 .. 3.
std::pair<std::vector<Scalar>, std::vector<Scalar>> lambda_grid(Index p,
                                                                Index n_branch);

struct GridCell {
  Scalar lambda_local = 0.0;
  Scalar lambda_global = 0.0;
  Scalar mean_acc = 0.0;
  Scalar mean_delta_local = 0.0;
  Scalar mean_delta_global = 0.0;
  std::vector<Scalar> acc;           // per repeat
  std::vector<Scalar> delta_local;   // per repeat
  std::vector<Scalar> delta_global;  // per repeat
  bool flagged = false;              // some repeat had no feasible start
  double wall_seconds = 0.0;
};

struct ExperimentConfig {
  SolverConfig solver;
  SplitPlan plan;
  Scalar zero_eps = 1e-5;
  int threads = 1;      // repeats run in parallel; each repeat serial
  int limit_local = 0;  // 0 = all 17 values
  int limit_global = 0;
};

struct GridResult {
  std::vector<Scalar> lambda_local_values;
  std::vector<Scalar> lambda_global_values;
  std::vector<std::vector<GridCell>> cells;  // [local][global]
};

// Traverses the grid row-major (lambda_local outer, lambda_global inner);
// cell (0,0) starts from fresh random starts and every later cell warm-starts
// from the full solution pool of the immediately preceding cell, chained per
// repeat. Each fit rounds the leaf labels before scoring test accuracy.
GridResult run_grid(const Dataset& data, const TreeTopology& topo,
                    const Matrix& W, const Vector& rho, Scalar gamma,
                    const ExperimentConfig& config);

struct CompareRow {
  Scalar lambda_global = 0.0;
  Scalar mean_acc_model = 0.0;
  Scalar mean_acc_baseline = 0.0;
  Scalar mean_dg_model = 0.0;
  Scalar mean_dg_baseline = 0.0;
  TTestResult acc_test;
  TTestResult dg_test;
};

// For each lambda_global (lambda_local = 0), fits both methods over the same
// splits and reports paired-t confidence intervals for the accuracy and
// global-sparsity differences (model minus baseline).
std::vector<CompareRow> compare_vs_baseline(const Dataset& data,
                                            const TreeTopology& topo,
                                            const Matrix& W, const Vector& rho,
                                            Scalar gamma,
                                            const ExperimentConfig& config,
                                            const BaselineConfig& baseline);

// CSV output, 6 significant digits.
std::string format_g6(Scalar v);
void write_grid_csv(const std::string& path, const GridResult& grid);
void write_path_csvs(const std::string& local_path, const std::string& global_path,
                     const GridResult& grid);
void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows);
void write_manifest(const std::string& path, const GridResult& grid,
                    const ExperimentConfig& config, Scalar gamma);

}  // namespace sorct
