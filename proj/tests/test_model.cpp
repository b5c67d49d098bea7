#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "sorct/model.hpp"
#include "sorct/rng.hpp"
#include "test_util.hpp"

using namespace sorct;
using namespace sorct::testutil;

namespace {

// Independent oracle: leaf-fall probabilities by recursive descent from the
// root, multiplying branch probabilities along the way.
void descend_probs(int node, int depth_left, Scalar mass, const Vector& x,
                   const ModelParams& params, Scalar gamma, std::vector<Scalar>& out) {
  if (depth_left == 0) {
    out.push_back(mass);
    return;
  }
  const Scalar arg =
      params.a.col(node - 1).dot(x) / static_cast<Scalar>(x.size()) -
      params.mu[node - 1];
  const Scalar p = 1.0 / (1.0 + std::exp(-arg * gamma));
  descend_probs(2 * node, depth_left - 1, mass * p, x, params, gamma, out);
  descend_probs(2 * node + 1, depth_left - 1, mass * (1.0 - p), x, params, gamma, out);
}

Vector oracle_leaf_probs(const Vector& x, const ModelParams& params,
                         const TreeTopology& topo, Scalar gamma) {
  std::vector<Scalar> probs;
  descend_probs(1, topo.depth, 1.0, x, params, gamma, probs);
  return Eigen::Map<Vector>(probs.data(), static_cast<Index>(probs.size()));
}

// Independent oracle: the expected-cost triple sum, written out naively.
// Two-class dataset with deliberately unequal class sizes.
Dataset make_unbalanced(Rng& rng) {
  Dataset data = random_dataset(rng, 15, 2, 2);
  for (Index i = 4; i < 15; ++i) data.y[static_cast<std::size_t>(i)] = 1;
  for (Index i = 0; i < 4; ++i) data.y[static_cast<std::size_t>(i)] = 0;
  data.class_indices.assign(2, {});
  for (Index i = 0; i < 15; ++i) {
    data.class_indices[static_cast<std::size_t>(data.y[static_cast<std::size_t>(i)])].push_back(i);
  }
  return data;
}

Scalar oracle_expected_cost(const ModelParams& params, const Dataset& data,
                            const Matrix& W, const TreeTopology& topo,
                            Scalar gamma) {
  Scalar total = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const Vector P = oracle_leaf_probs(data.X.row(i).transpose(), params, topo, gamma);
    for (Index t = 0; t < topo.n_leaf(); ++t) {
      for (Index k = 0; k < data.n_classes; ++k) {
        total += P[t] * W(data.y[static_cast<std::size_t>(i)], k) * params.C(k, t);
      }
    }
  }
  return total / static_cast<Scalar>(data.n());
}

}  // namespace

TEST_CASE("logistic cdf basics") {
  CHECK(logistic_cdf(0.0, 1.0) == doctest::Approx(0.5));
  CHECK(logistic_cdf(0.0, 512.0) == doctest::Approx(0.5));
  // frozen high-precision value of 1 / (1 + exp(-5.12))
  CHECK(logistic_cdf(0.01, 512.0) ==
        doctest::Approx(0.99405947780165963).epsilon(1e-12));
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const Scalar v = rng.uniform(-3, 3);
    const Scalar g = rng.uniform(0.5, 64);
    CHECK(logistic_cdf(-v, g) == doctest::Approx(1.0 - logistic_cdf(v, g)).epsilon(1e-12));
  }
  // stiff gamma saturates: exactly 1 above, below 1e-200 underneath
  CHECK(logistic_cdf(-1.0, 512.0) < 1e-200);
  CHECK(logistic_cdf(2.0, 512.0) == 1.0);
  CHECK(logistic_cdf(-2.0, 512.0) < 1e-300);
}

TEST_CASE("logistic density basics") {
  CHECK(logistic_density(0.0, 4.0) == doctest::Approx(1.0));      // gamma / 4
  CHECK(logistic_density(0.0, 512.0) == doctest::Approx(128.0));  // gamma / 4
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Scalar v = rng.uniform(-2, 2);
    const Scalar g = rng.uniform(0.5, 32);
    CHECK(logistic_density(v, g) == doctest::Approx(logistic_density(-v, g)).epsilon(1e-12));
    CHECK(logistic_density(v, g) >= 0.0);
  }
  // density equals the derivative of the cdf
  const Scalar h = 1e-7;
  const Scalar fd = (logistic_cdf(0.3 + h, 4.0) - logistic_cdf(0.3 - h, 4.0)) / (2 * h);
  CHECK(logistic_density(0.3, 4.0) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("branch probability") {
  Vector x = Vector::Constant(3, 0.7);
  Vector a0 = Vector::Zero(3);
  CHECK(branch_probability(x, a0, 0.0, 512.0) == doctest::Approx(0.5));
  CHECK(branch_probability(x, a0, 1.0, 512.0) == doctest::Approx(0.0).epsilon(1e-200));

  Vector x2(2), a2(2);
  x2 << 1.0, 0.5;
  a2 << 1.0, -1.0;
  // (1/2)(1*1 + (-1)*0.5) - 0.25 = 0
  CHECK(branch_probability(x2, a2, 0.25, 4.0) == doctest::Approx(0.5));

  Vector bad(4);
  CHECK_THROWS_AS(branch_probability(bad, a2, 0.0, 4.0), std::invalid_argument);
}

TEST_CASE("leaf probabilities: uniform splits") {
  const TreeTopology topo = build_topology(2);
  ModelParams params;
  params.a = Matrix::Zero(3, 3);
  params.mu = Vector::Zero(3);
  params.C = Matrix::Constant(2, 4, 0.5);
  const Vector P = leaf_probabilities(Vector::Constant(3, 0.3), params, topo, 512.0);
  for (Index t = 0; t < 4; ++t) CHECK(P[t] == doctest::Approx(0.25));
}

TEST_CASE("leaf probabilities: depth 1 is (p, 1-p)") {
  const TreeTopology topo = build_topology(1);
  Rng rng(3);
  ModelParams params = random_params(rng, 4, topo, 2);
  const Vector x = Vector::Constant(4, 0.6);
  const Vector P = leaf_probabilities(x, params, topo, 8.0);
  const Scalar p = branch_probability(x, params.a.col(0), params.mu[0], 8.0);
  CHECK(P[0] == doctest::Approx(p).epsilon(1e-15));
  CHECK(P[1] == doctest::Approx(1.0 - p).epsilon(1e-15));
}

TEST_CASE("leaf probabilities match recursive-descent oracle and sum to one") {
  const TreeTopology topo = build_topology(3);
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    ModelParams params = random_params(rng, 5, topo, 3);
    Vector x(5);
    for (Index j = 0; j < 5; ++j) x[j] = rng.unit();
    const Vector P = leaf_probabilities(x, params, topo, 4.0);
    const Vector Q = oracle_leaf_probs(x, params, topo, 4.0);
    CHECK((P - Q).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(P.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("expected cost: fair depth-1 split with distinct binary labels") {
  const TreeTopology topo = build_topology(1);
  Rng rng(5);
  Dataset data = random_dataset(rng, 12, 3, 2);
  ModelParams params;
  params.a = Matrix::Zero(3, 1);
  params.mu = Vector::Zero(1);
  params.C.resize(2, 2);
  params.C << 1, 0, 0, 1;
  const Matrix W = equal_cost_matrix(2, 0.5);
  // every individual puts probability 0.5 on the wrong leaf at cost 0.5
  CHECK(expected_cost(params, data, W, topo, 512.0) == doctest::Approx(0.25));
}

TEST_CASE("expected cost: uniform C removes dependence on cuts") {
  const TreeTopology topo = build_topology(2);
  Rng rng(6);
  Dataset data = random_dataset(rng, 15, 4, 3);
  const Matrix W = equal_cost_matrix(3, 0.5);
  ModelParams a_params = random_params(rng, 4, topo, 3);
  ModelParams b_params = random_params(rng, 4, topo, 3);
  a_params.C = Matrix::Constant(3, 4, 1.0 / 3.0);
  b_params.C = a_params.C;
  const Scalar ga = expected_cost(a_params, data, W, topo, 16.0);
  const Scalar gb = expected_cost(b_params, data, W, topo, 16.0);
  CHECK(ga == doctest::Approx(gb).epsilon(1e-12));
  Scalar expected = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    for (Index k = 0; k < 3; ++k) expected += W(data.y[static_cast<std::size_t>(i)], k) / 3.0;
  }
  expected /= static_cast<Scalar>(data.n());
  CHECK(ga == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("expected cost matches naive triple-sum oracle") {
  const TreeTopology topo = build_topology(2);
  Rng rng(7);
  for (int rep = 0; rep < 10; ++rep) {
    Dataset data = random_dataset(rng, 4, 3, 2);
    ModelParams params = random_params(rng, 3, topo, 2);
    const Matrix W = equal_cost_matrix(2, 0.5);
    const Scalar g = expected_cost(params, data, W, topo, 4.0);
    const Scalar oracle = oracle_expected_cost(params, data, W, topo, 4.0);
    CHECK(g == doctest::Approx(oracle).epsilon(1e-12));
  }
}

TEST_CASE("objective: zero coefficients leave only the cost") {
  const TreeTopology topo = build_topology(2);
  Rng rng(8);
  Dataset data = random_dataset(rng, 10, 3, 2);
  ModelParams params = random_params(rng, 3, topo, 2);
  params.a.setZero();
  Hyperparams hyper{0.7, 1.3, 8.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
  CHECK(objective(params, data, hyper, topo) ==
        doctest::Approx(expected_cost(params, data, hyper.W, topo, 8.0)));
}

TEST_CASE("objective: hand-computed penalty") {
  Matrix a(2, 3);
  a << 0.5, -0.5, 0.0, 0.0, 0.0, 1.0;
  // l1: 1.0 + 1.0; row-max: 0.5 + 1.0
  CHECK(penalty_value(a, 1.0, 1.0) == doctest::Approx(3.5));
  CHECK(penalty_value(a, 2.0, 0.0) == doctest::Approx(4.0));
  CHECK(penalty_value(a, 0.0, 2.0) == doctest::Approx(3.0));
}

TEST_CASE("objective: local and global penalties coincide at depth 1") {
  const TreeTopology topo = build_topology(1);
  Rng rng(9);
  Dataset data = random_dataset(rng, 10, 4, 2);
  for (int rep = 0; rep < 10; ++rep) {
    ModelParams params = random_params(rng, 4, topo, 2);
    const Scalar c = rng.uniform(0.1, 2.0);
    Hyperparams local{c, 0.0, 8.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
    Hyperparams global{0.0, c, 8.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
    CHECK(objective(params, data, local, topo) ==
          doctest::Approx(objective(params, data, global, topo)).epsilon(1e-12));
  }
}

TEST_CASE("gradient: C block at fair depth-1 split") {
  const TreeTopology topo = build_topology(1);
  Rng rng(10);
  Dataset data = random_dataset(rng, 14, 3, 2);
  ModelParams params = random_params(rng, 3, topo, 2);
  params.a.setZero();
  params.mu.setZero();
  Hyperparams hyper{0, 0, 16.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
  const auto [value, grad] = objective_and_gradient(params, data, hyper, topo);
  for (Index k = 0; k < 2; ++k) {
    Scalar expected = 0.0;
    for (Index i = 0; i < data.n(); ++i) expected += hyper.W(data.y[static_cast<std::size_t>(i)], k);
    expected = 0.5 * expected / static_cast<Scalar>(data.n());
    CHECK(grad.d_C(k, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(grad.d_C(k, 1) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central finite differences") {
  const TreeTopology topo = build_topology(2);
  Rng rng(11);
  Dataset data = random_dataset(rng, 10, 3, 2);
  ModelParams params = random_params(rng, 3, topo, 2);
  Hyperparams hyper{0, 0, 4.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
  const auto [value, grad] = objective_and_gradient(params, data, hyper, topo);
  const Scalar h = 1e-6;
  auto check = [&](Scalar analytic, Scalar plus, Scalar minus) {
    const Scalar fd = (plus - minus) / (2 * h);
    const Scalar err = std::abs(analytic - fd);
    const Scalar tol = std::max(1e-8, 1e-5 * std::abs(fd));
    CHECK(err < tol);
  };
  for (Index j = 0; j < 3; ++j) {
    for (Index b = 0; b < topo.n_branch(); ++b) {
      ModelParams up = params, dn = params;
      up.a(j, b) += h;
      dn.a(j, b) -= h;
      check(grad.d_a(j, b), expected_cost(up, data, hyper.W, topo, 4.0),
            expected_cost(dn, data, hyper.W, topo, 4.0));
    }
  }
  for (Index b = 0; b < topo.n_branch(); ++b) {
    ModelParams up = params, dn = params;
    up.mu[b] += h;
    dn.mu[b] -= h;
    check(grad.d_mu[b], expected_cost(up, data, hyper.W, topo, 4.0),
          expected_cost(dn, data, hyper.W, topo, 4.0));
  }
  // g is linear in C, so the analytic C gradient is exact
  for (Index k = 0; k < 2; ++k) {
    for (Index t = 0; t < topo.n_leaf(); ++t) {
      ModelParams up = params;
      up.C(k, t) += 1.0;
      const Scalar diff = expected_cost(up, data, hyper.W, topo, 4.0) -
                          expected_cost(params, data, hyper.W, topo, 4.0);
      CHECK(grad.d_C(k, t) == doctest::Approx(diff).epsilon(1e-9));
    }
  }
}

TEST_CASE("gradient: displayed depth-1 two-class formula at a = 0") {
  const TreeTopology topo = build_topology(1);
  Rng rng(12);
  Dataset data = random_dataset(rng, 16, 4, 2);
  for (const Scalar mu1 : {-0.8, 0.1, 0.9}) {
    ModelParams params = random_params(rng, 4, topo, 2);
    params.a.setZero();
    params.mu[0] = mu1;
    Hyperparams hyper{0, 0, 4.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
    const auto [value, grad] = objective_and_gradient(params, data, hyper, topo);
    const Scalar f = logistic_density(-mu1, 4.0);
    for (Index j = 0; j < 4; ++j) {
      Scalar s1 = 0.0, s2 = 0.0;
      for (Index i : data.class_indices[0]) s1 += data.X(i, j);
      for (Index i : data.class_indices[1]) s2 += data.X(i, j);
      const Scalar expected =
          f / (static_cast<Scalar>(data.n()) * 4.0) *
          (hyper.W(0, 1) * s1 * (params.C(1, 0) - params.C(1, 1)) +
           hyper.W(1, 0) * s2 * (params.C(0, 0) - params.C(0, 1)));
      CHECK(grad.d_a(j, 0) == doctest::Approx(expected).epsilon(1e-10));
    }
  }
}

TEST_CASE("cost is monotone in mu at a = 0 (depth 1, two classes)") {
  // the sign of dg/dmu_1 at a = 0 is constant over the whole mu range when
  // C_22 != C_23 and W_12 |I_1| != W_21 |I_2|
  const TreeTopology topo = build_topology(1);
  Rng rng(33);
  for (int rep = 0; rep < 20; ++rep) {
    Dataset data = make_unbalanced(rng);
    ModelParams params = random_params(rng, 2, topo, 2);
    params.a.setZero();
    if (std::abs(params.C(1, 0) - params.C(1, 1)) < 1e-3) continue;
    Hyperparams hyper{0, 0, 4.0, equal_cost_matrix(2, 0.5), Vector::Zero(2)};
    Scalar sign_lo = 0, sign_hi = 0;
    for (const Scalar mu1 : {-0.9, 0.9}) {
      params.mu[0] = mu1;
      const auto [value, grad] = objective_and_gradient(params, data, hyper, topo);
      (void)value;
      (mu1 < 0 ? sign_lo : sign_hi) = grad.d_mu[0];
    }
    CHECK(sign_lo * sign_hi > 0.0);
  }
}

TEST_CASE("objective decomposes into cost plus penalties exactly") {
  const TreeTopology topo = build_topology(2);
  Rng rng(34);
  Dataset data = random_dataset(rng, 12, 3, 2);
  for (int rep = 0; rep < 10; ++rep) {
    ModelParams params = random_params(rng, 3, topo, 2);
    Hyperparams hyper{rng.uniform(0, 1), rng.uniform(0, 1), 8.0,
                      equal_cost_matrix(2, 0.5), Vector::Zero(2)};
    const Scalar total = objective(params, data, hyper, topo);
    const Scalar g = expected_cost(params, data, hyper.W, topo, hyper.gamma);
    const Scalar pen =
        penalty_value(params.a, hyper.lambda_local, hyper.lambda_global);
    CHECK(total == g + pen);  // same summation order, bit-exact
  }
}

TEST_CASE("performance slack") {
  const TreeTopology topo = build_topology(2);
  Rng rng(13);
  Dataset data = random_dataset(rng, 18, 3, 3);
  ModelParams params = random_params(rng, 3, topo, 3);

  // rho = 0: slack is the (nonnegative) expected within-class mass
  Vector slack = performance_slack(params, data, Vector::Zero(3), topo, 8.0);
  for (Index k = 0; k < 3; ++k) CHECK(slack[k] >= 0.0);

  // uniform C and centred cuts split the mass evenly
  params.a.setZero();
  params.C = Matrix::Constant(3, 4, 1.0 / 3.0);
  const Vector rho = Vector::Constant(3, 0.1);
  slack = performance_slack(params, data, rho, topo, 8.0);
  for (Index k = 0; k < 3; ++k) {
    const Scalar nk = static_cast<Scalar>(data.class_indices[static_cast<std::size_t>(k)].size());
    CHECK(slack[k] == doctest::Approx(nk * (1.0 / 3.0 - 0.1)).epsilon(1e-12));
  }

  // naive double-sum oracle on a random instance
  params = random_params(rng, 3, topo, 3);
  slack = performance_slack(params, data, rho, topo, 8.0);
  for (Index k = 0; k < 3; ++k) {
    Scalar total = 0.0;
    for (Index i : data.class_indices[static_cast<std::size_t>(k)]) {
      const Vector P = oracle_leaf_probs(data.X.row(i).transpose(), params, topo, 8.0);
      for (Index t = 0; t < 4; ++t) total += P[t] * params.C(k, t);
    }
    const Scalar nk = static_cast<Scalar>(data.class_indices[static_cast<std::size_t>(k)].size());
    CHECK(slack[k] == doctest::Approx(total - 0.1 * nk).epsilon(1e-10));
  }
}

TEST_CASE("leaf-label rounding: coverage forces distinct labels") {
  const TreeTopology topo = build_topology(1);
  Rng rng(14);
  Dataset data = random_dataset(rng, 12, 3, 2);
  ModelParams params = random_params(rng, 3, topo, 2);
  const Matrix C =
      round_leaf_labels(params.a, params.mu, data, equal_cost_matrix(2, 0.5), topo, 8.0);
  CHECK(C.sum() == doctest::Approx(2.0));
  CHECK(C.col(0).sum() == doctest::Approx(1.0));
  CHECK(C.col(1).sum() == doctest::Approx(1.0));
  CHECK(C.row(0).sum() == doctest::Approx(1.0));
  CHECK(C.row(1).sum() == doctest::Approx(1.0));
}

TEST_CASE("leaf-label rounding: more classes than leaves is infeasible") {
  const TreeTopology topo = build_topology(1);
  Rng rng(15);
  Dataset data = random_dataset(rng, 12, 3, 3);
  ModelParams params = random_params(rng, 3, topo, 3);
  CHECK_THROWS_AS(
      round_leaf_labels(params.a, params.mu, data, equal_cost_matrix(3, 0.5), topo, 8.0),
      std::invalid_argument);
}

TEST_CASE("leaf-label rounding matches exhaustive enumeration") {
  Rng rng(16);
  for (int depth = 1; depth <= 2; ++depth) {
    const TreeTopology topo = build_topology(depth);
    for (int K = 2; K <= std::min<Index>(3, topo.n_leaf()); ++K) {
      for (int rep = 0; rep < 8; ++rep) {
        Dataset data = random_dataset(rng, 15, 3, K);
        ModelParams params = random_params(rng, 3, topo, K);
        const Matrix W = equal_cost_matrix(K, 0.5);
        const Matrix C = round_leaf_labels(params.a, params.mu, data, W, topo, 4.0);
        ModelParams rounded = params;
        rounded.C = C;
        const Scalar got = expected_cost(rounded, data, W, topo, 4.0);
        Scalar best = 1e300;
        for (const Matrix& cand : all_feasible_binary_C(K, topo.n_leaf())) {
          ModelParams probe = params;
          probe.C = cand;
          best = std::min(best, expected_cost(probe, data, W, topo, 4.0));
        }
        CHECK(got == doctest::Approx(best).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("rounded labels dominate random feasible fractional C") {
  const TreeTopology topo = build_topology(2);
  Rng rng(17);
  Dataset data = random_dataset(rng, 12, 3, 3);
  ModelParams params = random_params(rng, 3, topo, 3);
  const Matrix W = equal_cost_matrix(3, 0.5);
  const Matrix C = round_leaf_labels(params.a, params.mu, data, W, topo, 4.0);
  ModelParams rounded = params;
  rounded.C = C;
  const Scalar opt = expected_cost(rounded, data, W, topo, 4.0);
  const auto vertices = all_feasible_binary_C(3, topo.n_leaf());
  for (int rep = 0; rep < 100; ++rep) {
    // random convex combination of feasible vertices stays feasible
    Matrix mix = Matrix::Zero(3, topo.n_leaf());
    Scalar total = 0.0;
    for (int v = 0; v < 3; ++v) {
      const Scalar w = rng.exponential();
      mix += w * vertices[rng.below(vertices.size())];
      total += w;
    }
    mix /= total;
    ModelParams probe = params;
    probe.C = mix;
    CHECK(opt <= expected_cost(probe, data, W, topo, 4.0) + 1e-12);
  }
}

TEST_CASE("predict_proba") {
  const TreeTopology topo = build_topology(2);
  ModelParams params;
  params.a = Matrix::Zero(2, 3);
  params.mu = Vector::Zero(3);
  params.C.resize(3, 4);
  params.C << 1, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1;
  const Vector x = Vector::Constant(2, 0.4);

  // centred cuts: class probability is the share of leaves with that label
  Vector proba = predict_proba(x, params, topo, 512.0);
  CHECK(proba[0] == doctest::Approx(0.5));
  CHECK(proba[1] == doctest::Approx(0.25));
  CHECK(proba[2] == doctest::Approx(0.25));
  CHECK(proba.sum() == doctest::Approx(1.0).epsilon(1e-12));

  // saturated routing to the leftmost leaf (label 0)
  params.mu = Vector::Constant(3, -1.0);
  proba = predict_proba(x, params, topo, 512.0);
  CHECK(proba[0] == doctest::Approx(1.0));

  // against the direct sum
  Rng rng(18);
  ModelParams rnd = random_params(rng, 2, topo, 3);
  proba = predict_proba(x, rnd, topo, 8.0);
  const Vector P = leaf_probabilities(x, rnd, topo, 8.0);
  for (Index k = 0; k < 3; ++k) {
    Scalar expected = 0.0;
    for (Index t = 0; t < 4; ++t) expected += rnd.C(k, t) * P[t];
    CHECK(proba[k] == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("predict breaks ties toward the lowest class") {
  const TreeTopology topo = build_topology(1);
  ModelParams params;
  params.a = Matrix::Zero(2, 1);
  params.mu = Vector::Zero(1);
  params.C.resize(2, 2);
  params.C << 1, 0, 0, 1;  // proba = (0.5, 0.5)
  CHECK(predict(Vector::Constant(2, 0.5), params, topo, 8.0) == 0);
  params.C << 0.2, 0.2, 0.8, 0.8;  // proba = (0.2, 0.8)
  CHECK(predict(Vector::Constant(2, 0.5), params, topo, 8.0) == 1);
}

TEST_CASE("model save/load round trip reproduces predictions bit-exactly") {
  const TreeTopology topo = build_topology(2);
  Rng rng(19);
  Model model;
  model.depth = 2;
  model.gamma = 512.0;
  model.params = random_params(rng, 3, topo, 3);
  model.scaling.min.resize(3);
  model.scaling.range.resize(3);
  for (Index j = 0; j < 3; ++j) {
    model.scaling.min[j] = rng.uniform(-5, 5);
    model.scaling.range[j] = rng.uniform(0.1, 10);
  }
  model.feature_names = {"alpha", "beta two", "gamma"};
  model.class_names = {"yes", "no", "maybe so"};
  model.label_name = "outcome";

  const std::string path = "/tmp/sorct_model_roundtrip.txt";
  save_model(path, model);
  const Model loaded = load_model(path);
  std::remove(path.c_str());

  CHECK(loaded.depth == model.depth);
  CHECK(loaded.gamma == model.gamma);
  CHECK(loaded.feature_names == model.feature_names);
  CHECK(loaded.class_names == model.class_names);
  CHECK(loaded.label_name == model.label_name);
  CHECK((loaded.params.a - model.params.a).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.params.mu - model.params.mu).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.params.C - model.params.C).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.scaling.min - model.scaling.min).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.scaling.range - model.scaling.range).cwiseAbs().maxCoeff() == 0.0);

  for (int rep = 0; rep < 20; ++rep) {
    Vector x(3);
    for (Index j = 0; j < 3; ++j) x[j] = rng.unit();
    const Vector p1 = predict_proba(x, model.params, topo, model.gamma);
    const Vector p2 = predict_proba(x, loaded.params, topo, loaded.gamma);
    CHECK((p1 - p2).cwiseAbs().maxCoeff() == 0.0);
  }
}
