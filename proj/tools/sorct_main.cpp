#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sorct/bounds.hpp"
#include "sorct/experiments.hpp"
#include "sorct/model.hpp"
#include "sorct/parallel.hpp"
#include "sorct/solver.hpp"

namespace {

using namespace sorct;

// exit code 2; anything else that escapes is a runtime error (exit code 1)
class ConfigError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string data_path;
  std::string label = "class";
  std::string model_path;
  std::string out_dir = ".";
  std::string cost_matrix_path;
  int depth = 0;  // 0 = depth policy: 1 for two classes, 2 otherwise
  double gamma = 512.0;
  double lambda_local = 0.0;
  double lambda_global = 0.0;
  double rho = 0.1;
  double cost = 0.5;
  std::uint64_t seed = 13;
  int threads = 0;  // 0 = hardware concurrency
  int starts = 20;
  int max_iters = 2000;
  double stationarity_tol = 1e-4;
  double feasibility_tol = 1e-6;
  double penalty_init = 1.0;
  double penalty_growth = 10.0;
  double step_init = 1.0;
  double step_shrink = 0.5;
  double armijo_c = 1e-4;
  bool no_continuation = false;
  double train_fraction = 0.75;
  int repeats = 10;
  int grid_limit = 0;
  double sigma = 0.5;
  int mu_grid = 5;
  double zero_eps = 1e-5;
};

void require_file(const std::string& path, const std::string& key) {
  if (path.empty()) throw ConfigError("missing required key: " + key);
  if (!std::filesystem::exists(path)) {
    throw ConfigError(key + ": file does not exist: " + path);
  }
}

struct Prepared {
  Dataset data;
  TreeTopology topo;
  Matrix W;
  Vector rho;
};

Prepared prepare(const Options& opts) {
  require_file(opts.data_path, "data");
  Prepared prep;
  prep.data = scale_to_unit_box(load_csv(opts.data_path, opts.label));
  const int depth =
      opts.depth > 0 ? opts.depth : (prep.data.n_classes == 2 ? 1 : 2);
  prep.topo = build_topology(depth);
  if (!opts.cost_matrix_path.empty()) {
    require_file(opts.cost_matrix_path, "cost-matrix");
    std::ifstream in(opts.cost_matrix_path);
    const int K = prep.data.n_classes;
    prep.W.resize(K, K);
    for (int i = 0; i < K; ++i) {
      for (int j = 0; j < K; ++j) {
        if (!(in >> prep.W(i, j))) {
          throw ConfigError("cost-matrix: expected " + std::to_string(K * K) +
                            " numeric entries");
        }
      }
    }
  } else {
    prep.W = equal_cost_matrix(prep.data.n_classes, opts.cost);
  }
  prep.rho = Vector::Constant(prep.data.n_classes, opts.rho);
  return prep;
}

SolverConfig solver_config(const Options& opts) {
  SolverConfig config;
  config.n_starts = opts.starts;
  config.max_iters = opts.max_iters;
  config.stationarity_tol = opts.stationarity_tol;
  config.feasibility_tol = opts.feasibility_tol;
  config.penalty_init = opts.penalty_init;
  config.penalty_growth = opts.penalty_growth;
  config.step_init = opts.step_init;
  config.step_shrink = opts.step_shrink;
  config.armijo_c = opts.armijo_c;
  config.gamma_continuation = !opts.no_continuation;
  config.seed = opts.seed;
  config.threads = resolve_threads(opts.threads);
  return config;
}

std::filesystem::path out_file(const Options& opts, const std::string& name) {
  std::filesystem::create_directories(opts.out_dir);
  return std::filesystem::path(opts.out_dir) / name;
}

int cmd_train(const Options& opts) {
  const Prepared prep = prepare(opts);
  SplitPlan plan{opts.train_fraction, std::max(1, opts.repeats), opts.seed};
  const auto [train, test] = split(prep.data, plan, 0);

  Hyperparams hyper{opts.lambda_local, opts.lambda_global, opts.gamma, prep.W,
                    prep.rho};
  const SolveResult result = solve(train, hyper, prep.topo, solver_config(opts));
  if (!result.any_feasible) {
    std::cerr << "warning: no start reached feasibility; reporting the least "
                 "infeasible solution (violation="
              << result.best.feasibility_residual << ")\n";
  }
  ModelParams fitted = result.best.params;
  fitted.C =
      round_leaf_labels(fitted.a, fitted.mu, train, prep.W, prep.topo, opts.gamma);

  Model model;
  model.depth = prep.topo.depth;
  model.gamma = opts.gamma;
  model.params = fitted;
  model.scaling = prep.data.scaling;
  model.feature_names = prep.data.feature_names;
  model.class_names = prep.data.class_names;
  model.label_name = prep.data.label_name;
  const std::string model_path =
      opts.model_path.empty() ? out_file(opts, "model.txt").string()
                              : opts.model_path;
  save_model(model_path, model);

  const SparsityReport sp = sparsity(fitted.a, opts.zero_eps);
  std::cout << "objective=" << format_g6(result.best.objective_value) << "\n";
  std::cout << "train_accuracy="
            << format_g6(accuracy(fitted, train, prep.topo, opts.gamma)) << "\n";
  std::cout << "test_accuracy="
            << format_g6(accuracy(fitted, test, prep.topo, opts.gamma)) << "\n";
  std::cout << "delta_local=" << format_g6(sp.delta_local) << "\n";
  std::cout << "delta_global=" << format_g6(sp.delta_global) << "\n";
  std::cout << "stationarity_residual="
            << format_g6(result.best.stationarity_residual) << "\n";
  std::cout << "model=" << model_path << "\n";
  return 0;
}

int cmd_predict(const Options& opts) {
  require_file(opts.model_path, "model");
  require_file(opts.data_path, "data");
  const Model model = load_model(opts.model_path);
  const PlainTable table = load_plain_csv(opts.data_path);

  std::vector<Index> order;
  std::vector<std::string> missing, extra;
  for (const auto& name : model.feature_names) {
    auto it = std::find(table.column_names.begin(), table.column_names.end(), name);
    if (it == table.column_names.end()) {
      missing.push_back(name);
    } else {
      order.push_back(static_cast<Index>(it - table.column_names.begin()));
    }
  }
  for (const auto& name : table.column_names) {
    if (name == model.label_name) continue;
    if (std::find(model.feature_names.begin(), model.feature_names.end(), name) ==
        model.feature_names.end()) {
      extra.push_back(name);
    }
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "data columns do not match the model schema;";
    for (const auto& m : missing) msg += " missing: " + m;
    for (const auto& e : extra) msg += " extra: " + e;
    throw std::runtime_error(msg);
  }

  std::cout << "predicted";
  for (const auto& cls : model.class_names) std::cout << ",p_" << cls;
  std::cout << "\n";

  const TreeTopology topo = build_topology(model.depth);
  Matrix raw(1, static_cast<Index>(model.feature_names.size()));
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < order.size(); ++j) {
      char* end = nullptr;
      const std::string& cell = row[static_cast<std::size_t>(order[j])];
      raw(0, static_cast<Index>(j)) = std::strtod(cell.c_str(), &end);
      if (end != cell.c_str() + cell.size() || cell.empty()) {
        throw std::runtime_error("non-numeric feature value '" + cell + "'");
      }
    }
    const Matrix x = apply_scaling(model.scaling, raw);
    const Vector proba =
        predict_proba(x.row(0).transpose(), model.params, topo, model.gamma);
    Index best = 0;
    for (Index k = 1; k < proba.size(); ++k) {
      if (proba[k] > proba[best]) best = k;
    }
    std::cout << model.class_names[static_cast<std::size_t>(best)];
    for (Index k = 0; k < proba.size(); ++k) std::cout << ',' << format_g6(proba[k]);
    std::cout << "\n";
  }
  return 0;
}

ExperimentConfig experiment_config(const Options& opts) {
  ExperimentConfig config;
  config.solver = solver_config(opts);
  config.plan = SplitPlan{opts.train_fraction, opts.repeats, opts.seed};
  config.zero_eps = opts.zero_eps;
  config.threads = resolve_threads(opts.threads);
  config.limit_local = opts.grid_limit;
  config.limit_global = opts.grid_limit;
  return config;
}

int cmd_grid(const Options& opts) {
  const Prepared prep = prepare(opts);
  const ExperimentConfig config = experiment_config(opts);
  const GridResult grid =
      run_grid(prep.data, prep.topo, prep.W, prep.rho, opts.gamma, config);
  write_grid_csv(out_file(opts, "grid.csv").string(), grid);
  write_path_csvs(out_file(opts, "local_path.csv").string(),
                  out_file(opts, "global_path.csv").string(), grid);
  write_manifest(out_file(opts, "manifest.txt").string(), grid, config, opts.gamma);
  std::cout << "cells=" << grid.lambda_local_values.size() *
                               grid.lambda_global_values.size()
            << "\n";
  std::cout << "out=" << opts.out_dir << "\n";
  return 0;
}

int cmd_bounds(const Options& opts) {
  const Prepared prep = prepare(opts);
  const BoundReport report = lambda_bound_general(
      prep.data, prep.W, opts.gamma, prep.topo, opts.sigma, opts.mu_grid);
  std::cout << "method=enumerated_general\n";
  std::cout << "sigma=" << format_g6(report.sigma) << "\n";
  std::cout << "grid_resolution=" << report.grid_resolution << "\n";
  std::cout << "max_grad_inf_norm=" << format_g6(report.max_grad_inf_norm) << "\n";
  std::cout << "max_grad_one_norm=" << format_g6(report.max_grad_one_norm) << "\n";
  std::cout << "lambda_local_bound=" << format_g6(report.lambda_local_bound) << "\n";
  std::cout << "lambda_global_bound=" << format_g6(report.lambda_global_bound) << "\n";
  if (prep.topo.depth == 1 && prep.data.n_classes == 2) {
    std::cout << "depth1_bound=" << format_g6(lambda_bound_depth1(prep.data, prep.W, opts.gamma)) << "\n";
    std::cout << "depth1_bound_no_p="
              << format_g6(lambda_bound_depth1_no_p(prep.data, prep.W, opts.gamma)) << "\n";
  }
  std::cout << "csv:method,sigma,grid_resolution,lambda_local_bound,"
               "lambda_global_bound,max_grad_inf_norm,max_grad_one_norm\n";
  std::cout << "csv:enumerated_general," << format_g6(report.sigma) << ','
            << report.grid_resolution << ',' << format_g6(report.lambda_local_bound)
            << ',' << format_g6(report.lambda_global_bound) << ','
            << format_g6(report.max_grad_inf_norm) << ','
            << format_g6(report.max_grad_one_norm) << "\n";
  return 0;
}

int cmd_compare(const Options& opts) {
  const Prepared prep = prepare(opts);
  const ExperimentConfig config = experiment_config(opts);
  const auto rows = compare_vs_baseline(prep.data, prep.topo, prep.W, prep.rho,
                                        opts.gamma, config, BaselineConfig{});
  write_compare_csv(out_file(opts, "compare.csv").string(), rows);
  std::cout << "rows=" << rows.size() << "\n";
  std::cout << "out=" << opts.out_dir << "\n";
  return 0;
}

int cmd_metrics(const Options& opts) {
  require_file(opts.model_path, "model");
  require_file(opts.data_path, "data");
  const Model model = load_model(opts.model_path);
  RawTable raw = load_csv(opts.data_path, model.label_name);
  if (raw.feature_names != model.feature_names) {
    throw std::runtime_error(
        "data feature columns do not match the model (order and names must "
        "agree)");
  }
  const TreeTopology topo = build_topology(model.depth);
  const Matrix X = apply_scaling(model.scaling, raw.features);

  Index hits = 0;
  std::vector<Index> class_hits(model.class_names.size(), 0);
  std::vector<Index> class_total(model.class_names.size(), 0);
  const auto preds = predict_batch(X, model.params, topo, model.gamma);
  for (Index i = 0; i < X.rows(); ++i) {
    const std::string& lab = raw.labels[static_cast<std::size_t>(i)];
    const auto it =
        std::find(model.class_names.begin(), model.class_names.end(), lab);
    if (it == model.class_names.end()) {
      throw std::runtime_error("unknown class label in data: " + lab);
    }
    const int truth = static_cast<int>(it - model.class_names.begin());
    ++class_total[static_cast<std::size_t>(truth)];
    if (preds[static_cast<std::size_t>(i)] == truth) {
      ++hits;
      ++class_hits[static_cast<std::size_t>(truth)];
    }
  }
  const SparsityReport sp = sparsity(model.params.a, opts.zero_eps);
  std::cout << "accuracy="
            << format_g6(static_cast<Scalar>(hits) / static_cast<Scalar>(X.rows()))
            << "\n";
  std::cout << "delta_local=" << format_g6(sp.delta_local) << "\n";
  std::cout << "delta_global=" << format_g6(sp.delta_global) << "\n";
  for (std::size_t k = 0; k < model.class_names.size(); ++k) {
    const Scalar rate =
        class_total[k] ? static_cast<Scalar>(class_hits[k]) /
                             static_cast<Scalar>(class_total[k])
                       : 0.0;
    std::cout << "accuracy_" << model.class_names[k] << "=" << format_g6(rate)
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sorct: sparse optimal randomized classification trees"};
  Options opts;
  app.set_config("--config", "", "flat key=value configuration; flags override");
  app.add_option("--data", opts.data_path, "input CSV (header row required)");
  app.add_option("--label", opts.label,
                 "label column, name or 0-based index (default: class)");
  app.add_option("--model", opts.model_path, "model file path");
  app.add_option("--out", opts.out_dir, "output directory (default: .)");
  auto* depth_opt =
      app.add_option("--depth", opts.depth,
                     "tree depth (default: 1 for two classes, else 2)");
  app.add_option("--gamma", opts.gamma, "logistic steepness (default 512)");
  app.add_option("--lambda-local", opts.lambda_local, "l1 sparsity weight");
  app.add_option("--lambda-global", opts.lambda_global, "row l-inf sparsity weight");
  app.add_option("--rho", opts.rho, "per-class performance floor (default 0.1)");
  app.add_option("--cost", opts.cost, "off-diagonal misclassification cost (default 0.5)");
  app.add_option("--cost-matrix", opts.cost_matrix_path,
                 "file with a full K x K cost matrix (overrides --cost)");
  app.add_option("--seed", opts.seed, "run seed (default 13)");
  app.add_option("--threads", opts.threads, "thread cap; 1 = bit-reproducible");
  app.add_option("--starts", opts.starts, "multistart count (default 20)");
  app.add_option("--max-iters", opts.max_iters, "iteration budget per start");
  app.add_option("--stationarity-tol", opts.stationarity_tol,
                 "first-order residual target (default 1e-4)");
  app.add_option("--feasibility-tol", opts.feasibility_tol,
                 "coverage/performance violation target (default 1e-6)");
  app.add_option("--penalty-init", opts.penalty_init, "initial penalty weight");
  app.add_option("--penalty-growth", opts.penalty_growth, "penalty growth factor");
  app.add_option("--step-init", opts.step_init, "initial Armijo step");
  app.add_option("--step-shrink", opts.step_shrink, "Armijo backtracking factor");
  app.add_option("--armijo-c", opts.armijo_c, "sufficient-decrease constant");
  app.add_flag("--no-continuation", opts.no_continuation,
               "disable the steepness ladder on cold starts");
  app.add_option("--train-fraction", opts.train_fraction, "train share (default 0.75)");
  app.add_option("--repeats", opts.repeats, "number of train/test repeats (default 10)");
  app.add_option("--grid-limit", opts.grid_limit,
                 "use only the first n values of each lambda list (0 = all)");
  app.add_option("--sigma", opts.sigma, "bound split parameter in [0,1]");
  app.add_option("--mu-grid", opts.mu_grid, "initial mu grid resolution");
  app.add_option("--zero-eps", opts.zero_eps, "zero threshold for sparsity metrics");

  auto* train = app.add_subcommand("train", "fit a tree and write a model file");
  auto* predict = app.add_subcommand("predict", "per-row class and probabilities CSV");
  auto* grid = app.add_subcommand("grid", "warm-started regularization grid");
  auto* bounds = app.add_subcommand("bounds", "sparsity-parameter thresholds");
  auto* compare = app.add_subcommand("compare", "paired comparison against a greedy orthogonal tree");
  auto* metrics = app.add_subcommand("metrics", "evaluate a saved model on a data file");
  for (auto* sub : {train, predict, grid, bounds, compare, metrics}) {
    sub->fallthrough();
  }
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (!depth_opt->empty() && (opts.depth < 1 || opts.depth > 10)) {
      throw ConfigError("depth must be >= 1 (and <= 10)");
    }
    if (opts.gamma <= 0) throw ConfigError("gamma must be > 0");
    if (opts.rho < 0 || opts.rho >= 1) throw ConfigError("rho must be in [0, 1)");
    if (opts.starts < 1) throw ConfigError("starts must be >= 1");
    if (opts.repeats < 1) throw ConfigError("repeats must be >= 1");
    if (opts.train_fraction <= 0 || opts.train_fraction >= 1) {
      throw ConfigError("train-fraction must be in (0, 1)");
    }
    if (train->parsed()) return cmd_train(opts);
    if (predict->parsed()) return cmd_predict(opts);
    if (grid->parsed()) return cmd_grid(opts);
    if (bounds->parsed()) return cmd_bounds(opts);
    if (compare->parsed()) return cmd_compare(opts);
    if (metrics->parsed()) return cmd_metrics(opts);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
