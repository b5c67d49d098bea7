#include "sorct/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "sorct/parallel.hpp"
#include "sorct/rng.hpp"

namespace sorct {

SparsityReport sparsity(const Matrix& a, Scalar epsilon) {
  if (epsilon < 0) throw std::invalid_argument("sparsity: epsilon must be >= 0");
  const Index p = a.rows();
  const Index B = a.cols();
  SparsityReport report;
  report.zero_threshold = epsilon;
  Scalar local = 0.0;
  for (Index t = 0; t < B; ++t) {
    Index zeros = 0;
    for (Index j = 0; j < p; ++j) {
      if (std::abs(a(j, t)) <= epsilon) ++zeros;
    }
    local += static_cast<Scalar>(zeros) / static_cast<Scalar>(p);
  }
  report.delta_local = 100.0 * local / static_cast<Scalar>(B);
  Index global_zeros = 0;
  for (Index j = 0; j < p; ++j) {
    if (a.row(j).cwiseAbs().maxCoeff() <= epsilon) ++global_zeros;
  }
  report.delta_global = 100.0 * static_cast<Scalar>(global_zeros) / static_cast<Scalar>(p);
  return report;
}

std::pair<std::vector<Scalar>, std::vector<Scalar>> lambda_grid(Index p,
                                                                Index n_branch) {
  if (p < 1 || n_branch < 1) throw std::invalid_argument("lambda_grid: bad sizes");
  std::vector<Scalar> local{0.0}, global{0.0};
  for (int r = -12; r <= 3; ++r) {
    const Scalar pw = std::ldexp(1.0, r);
    local.push_back(pw / (static_cast<Scalar>(p) * static_cast<Scalar>(n_branch)));
    global.push_back(pw / static_cast<Scalar>(p));
  }
  return {local, global};
}

namespace {

struct RepeatOutcome {
  Scalar acc = 0.0;
  Scalar delta_local = 0.0;
  Scalar delta_global = 0.0;
  bool flagged = false;
  double wall_seconds = 0.0;
};

std::vector<ModelParams> pool_params(const SolveResult& result) {
  std::vector<ModelParams> out;
  out.reserve(result.pool.size());
  for (const auto& o : result.pool) out.push_back(o.params);
  return out;
}

// One warm-start chain: fits every cell in row-major order for a single
// train/test split, starting each cell from the previous cell's pool.
void run_chain(const Dataset& train, const Dataset& test,
               const TreeTopology& topo, const Matrix& W, const Vector& rho,
               Scalar gamma, const ExperimentConfig& config,
               const std::vector<Scalar>& lam_local,
               const std::vector<Scalar>& lam_global, int repeat_index,
               std::vector<std::vector<RepeatOutcome>>& out) {
  SolverConfig solver = config.solver;
  solver.threads = 1;
  solver.seed = stream_seed(config.solver.seed, kStreamStart,
                            static_cast<std::uint64_t>(repeat_index) + 1000);
  std::vector<ModelParams> pool;
  Hyperparams hyper;
  hyper.gamma = gamma;
  hyper.W = W;
  hyper.rho = rho;
  for (std::size_t li = 0; li < lam_local.size(); ++li) {
    for (std::size_t gi = 0; gi < lam_global.size(); ++gi) {
      hyper.lambda_local = lam_local[li];
      hyper.lambda_global = lam_global[gi];
      const auto t0 = std::chrono::steady_clock::now();
      const SolveResult result =
          solve(train, hyper, topo, solver, pool.empty() ? nullptr : &pool);
      pool = pool_params(result);
      const ModelParams& fitted = result.best.params;
      ModelParams rounded = fitted;
      rounded.C = round_leaf_labels(fitted.a, fitted.mu, train, W, topo, gamma);
      RepeatOutcome& cell = out[li][gi];
      cell.acc = accuracy(rounded, test, topo, gamma);
      const SparsityReport sp = sparsity(fitted.a, config.zero_eps);
      cell.delta_local = sp.delta_local;
      cell.delta_global = sp.delta_global;
      cell.flagged = !result.any_feasible;
      cell.wall_seconds = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
    }
  }
}

}  // namespace

GridResult run_grid(const Dataset& data, const TreeTopology& topo,
                    const Matrix& W, const Vector& rho, Scalar gamma,
                    const ExperimentConfig& config) {
  GridResult grid;
  auto [lam_local, lam_global] = lambda_grid(data.n_features(), topo.n_branch());
  if (config.limit_local > 0 &&
      config.limit_local < static_cast<int>(lam_local.size())) {
    lam_local.resize(static_cast<std::size_t>(config.limit_local));
  }
  if (config.limit_global > 0 &&
      config.limit_global < static_cast<int>(lam_global.size())) {
    lam_global.resize(static_cast<std::size_t>(config.limit_global));
  }
  grid.lambda_local_values = lam_local;
  grid.lambda_global_values = lam_global;

  const int n_repeats = config.plan.n_repeats;
  std::vector<std::pair<Dataset, Dataset>> splits;
  splits.reserve(static_cast<std::size_t>(n_repeats));
  for (int r = 0; r < n_repeats; ++r) splits.push_back(split(data, config.plan, r));

  // per repeat, per cell
  std::vector<std::vector<std::vector<RepeatOutcome>>> raw(
      static_cast<std::size_t>(n_repeats),
      std::vector<std::vector<RepeatOutcome>>(
          lam_local.size(), std::vector<RepeatOutcome>(lam_global.size())));
  parallel_for(n_repeats, config.threads, [&](Index r) {
    run_chain(splits[static_cast<std::size_t>(r)].first,
              splits[static_cast<std::size_t>(r)].second, topo, W, rho, gamma,
              config, lam_local, lam_global, static_cast<int>(r),
              raw[static_cast<std::size_t>(r)]);
  });

  grid.cells.assign(lam_local.size(), std::vector<GridCell>(lam_global.size()));
  for (std::size_t li = 0; li < lam_local.size(); ++li) {
    for (std::size_t gi = 0; gi < lam_global.size(); ++gi) {
      GridCell& cell = grid.cells[li][gi];
      cell.lambda_local = lam_local[li];
      cell.lambda_global = lam_global[gi];
      for (int r = 0; r < n_repeats; ++r) {
        const RepeatOutcome& o = raw[static_cast<std::size_t>(r)][li][gi];
        cell.acc.push_back(o.acc);
        cell.delta_local.push_back(o.delta_local);
        cell.delta_global.push_back(o.delta_global);
        cell.flagged = cell.flagged || o.flagged;
        cell.wall_seconds += o.wall_seconds;
      }
      const Scalar n = static_cast<Scalar>(n_repeats);
      Scalar sa = 0, sl = 0, sg = 0;
      for (int r = 0; r < n_repeats; ++r) {
        sa += cell.acc[static_cast<std::size_t>(r)];
        sl += cell.delta_local[static_cast<std::size_t>(r)];
        sg += cell.delta_global[static_cast<std::size_t>(r)];
      }
      cell.mean_acc = 100.0 * sa / n;
      cell.mean_delta_local = sl / n;
      cell.mean_delta_global = sg / n;
    }
  }
  return grid;
}

std::vector<CompareRow> compare_vs_baseline(const Dataset& data,
                                            const TreeTopology& topo,
                                            const Matrix& W, const Vector& rho,
                                            Scalar gamma,
                                            const ExperimentConfig& config,
                                            const BaselineConfig& baseline) {
  ExperimentConfig grid_config = config;
  grid_config.limit_local = 1;  // lambda_local = 0 only
  const GridResult grid = run_grid(data, topo, W, rho, gamma, grid_config);

  const int n_repeats = config.plan.n_repeats;
  std::vector<Scalar> base_acc(static_cast<std::size_t>(n_repeats));
  std::vector<Scalar> base_dg(static_cast<std::size_t>(n_repeats));
  parallel_for(n_repeats, config.threads, [&](Index r) {
    const auto [train, test] = split(data, config.plan, static_cast<int>(r));
    const BaselineTree tree = fit_baseline(train, baseline);
    base_acc[static_cast<std::size_t>(r)] = baseline_accuracy(tree, test);
    base_dg[static_cast<std::size_t>(r)] = baseline_global_sparsity(tree);
  });

  std::vector<CompareRow> rows;
  for (std::size_t gi = 0; gi < grid.lambda_global_values.size(); ++gi) {
    const GridCell& cell = grid.cells[0][gi];
    CompareRow row;
    row.lambda_global = grid.lambda_global_values[gi];
    Scalar sa = 0, sg = 0, sba = 0, sbg = 0;
    for (int r = 0; r < n_repeats; ++r) {
      sa += cell.acc[static_cast<std::size_t>(r)];
      sg += cell.delta_global[static_cast<std::size_t>(r)];
      sba += base_acc[static_cast<std::size_t>(r)];
      sbg += base_dg[static_cast<std::size_t>(r)];
    }
    row.mean_acc_model = 100.0 * sa / n_repeats;
    row.mean_acc_baseline = 100.0 * sba / n_repeats;
    row.mean_dg_model = sg / n_repeats;
    row.mean_dg_baseline = sbg / n_repeats;
    std::vector<Scalar> model_acc_pct(static_cast<std::size_t>(n_repeats));
    std::vector<Scalar> base_acc_pct(static_cast<std::size_t>(n_repeats));
    for (int r = 0; r < n_repeats; ++r) {
      model_acc_pct[static_cast<std::size_t>(r)] = 100.0 * cell.acc[static_cast<std::size_t>(r)];
      base_acc_pct[static_cast<std::size_t>(r)] = 100.0 * base_acc[static_cast<std::size_t>(r)];
    }
    row.acc_test = paired_t_test(model_acc_pct, base_acc_pct);
    row.dg_test = paired_t_test(cell.delta_global, base_dg);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_g6(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_grid_csv(const std::string& path, const GridResult& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "lambda_local,lambda_global,acc,delta_local,delta_global\n";
  for (const auto& row : grid.cells) {
    for (const auto& cell : row) {
      out << format_g6(cell.lambda_local) << ',' << format_g6(cell.lambda_global)
          << ',' << format_g6(cell.mean_acc) << ',' << format_g6(cell.mean_delta_local)
          << ',' << format_g6(cell.mean_delta_global) << '\n';
    }
  }
}

void write_path_csvs(const std::string& local_path, const std::string& global_path,
                     const GridResult& grid) {
  {
    std::ofstream out(local_path);
    if (!out) throw std::runtime_error("cannot write " + local_path);
    out << "lambda_local,delta_local,acc\n";
    for (std::size_t li = 0; li < grid.lambda_local_values.size(); ++li) {
      const GridCell& cell = grid.cells[li][0];
      out << format_g6(cell.lambda_local) << ',' << format_g6(cell.mean_delta_local)
          << ',' << format_g6(cell.mean_acc) << '\n';
    }
  }
  {
    std::ofstream out(global_path);
    if (!out) throw std::runtime_error("cannot write " + global_path);
    out << "lambda_global,delta_global,acc\n";
    for (std::size_t gi = 0; gi < grid.lambda_global_values.size(); ++gi) {
      const GridCell& cell = grid.cells[0][gi];
      out << format_g6(cell.lambda_global) << ',' << format_g6(cell.mean_delta_global)
          << ',' << format_g6(cell.mean_acc) << '\n';
    }
  }
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "lambda_global,acc_model,acc_baseline,acc_diff,acc_ci_lo,acc_ci_hi,"
         "acc_p,dg_model,dg_baseline,dg_diff,dg_ci_lo,dg_ci_hi,dg_p\n";
  for (const auto& row : rows) {
    out << format_g6(row.lambda_global) << ',' << format_g6(row.mean_acc_model)
        << ',' << format_g6(row.mean_acc_baseline) << ','
        << format_g6(row.acc_test.mean_diff) << ',' << format_g6(row.acc_test.ci_lo)
        << ',' << format_g6(row.acc_test.ci_hi) << ',' << format_g6(row.acc_test.p_value)
        << ',' << format_g6(row.mean_dg_model) << ',' << format_g6(row.mean_dg_baseline)
        << ',' << format_g6(row.dg_test.mean_diff) << ',' << format_g6(row.dg_test.ci_lo)
        << ',' << format_g6(row.dg_test.ci_hi) << ',' << format_g6(row.dg_test.p_value)
        << '\n';
  }
}

void write_manifest(const std::string& path, const GridResult& grid,
                    const ExperimentConfig& config, Scalar gamma) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "seed=" << config.plan.seed << "\n";
  out << "n_repeats=" << config.plan.n_repeats << "\n";
  out << "train_fraction=" << format_g6(config.plan.train_fraction) << "\n";
  out << "n_starts=" << config.solver.n_starts << "\n";
  out << "gamma=" << format_g6(gamma) << "\n";
  out << "stratified=false\n";
  out << "lambda_local_values=";
  for (std::size_t i = 0; i < grid.lambda_local_values.size(); ++i) {
    out << (i ? "," : "") << format_g6(grid.lambda_local_values[i]);
  }
  out << "\nlambda_global_values=";
  for (std::size_t i = 0; i < grid.lambda_global_values.size(); ++i) {
    out << (i ? "," : "") << format_g6(grid.lambda_global_values[i]);
  }
  out << "\n";
  for (std::size_t li = 0; li < grid.cells.size(); ++li) {
    for (std::size_t gi = 0; gi < grid.cells[li].size(); ++gi) {
      out << "cell_seconds_" << li << "_" << gi << "="
          << grid.cells[li][gi].wall_seconds << "\n";
      if (grid.cells[li][gi].flagged) {
        out << "cell_flagged_" << li << "_" << gi << "=1\n";
      }
    }
  }
}

}  // namespace sorct
