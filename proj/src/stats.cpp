#include "sorct/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sorct {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
Scalar beta_cf(Scalar a, Scalar b, Scalar x) {
  constexpr int kMaxIter = 400;
  constexpr Scalar kEps = 3e-16;
  constexpr Scalar kTiny = 1e-300;
  const Scalar qab = a + b;
  const Scalar qap = a + 1.0;
  const Scalar qam = a - 1.0;
  Scalar c = 1.0;
  Scalar d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  Scalar h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const Scalar m2 = 2.0 * m;
    Scalar aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const Scalar del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

Scalar incomplete_beta(Scalar a, Scalar b, Scalar x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const Scalar ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                       a * std::log(x) + b * std::log1p(-x);
  const Scalar bt = std::exp(ln_bt);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return bt * beta_cf(a, b, x) / a;
  }
  return 1.0 - bt * beta_cf(b, a, 1.0 - x) / b;
}

Scalar student_t_cdf(Scalar t, int df) {
  if (df < 1) throw std::invalid_argument("student_t_cdf: df must be >= 1");
  const Scalar nu = static_cast<Scalar>(df);
  const Scalar x = nu / (nu + t * t);
  const Scalar tail = 0.5 * incomplete_beta(0.5 * nu, 0.5, x);
  return t >= 0.0 ? 1.0 - tail : tail;
}

Scalar student_t_quantile(Scalar prob, int df) {
  if (prob <= 0.0 || prob >= 1.0) {
    throw std::invalid_argument("student_t_quantile: prob must be in (0, 1)");
  }
  Scalar lo = -1e8, hi = 1e8;
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = 0.5 * (lo + hi);
    (student_t_cdf(mid, df) < prob ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TTestResult paired_t_test(const std::vector<Scalar>& sample_a,
                          const std::vector<Scalar>& sample_b, Scalar alpha) {
  if (sample_a.size() != sample_b.size()) {
    throw std::invalid_argument("paired_t_test: samples must have equal length");
  }
  const int n = static_cast<int>(sample_a.size());
  if (n < 2) throw std::invalid_argument("paired_t_test: need at least 2 pairs");

  TTestResult r;
  r.df = n - 1;
  Scalar mean = 0.0;
  for (int i = 0; i < n; ++i) mean += sample_a[static_cast<std::size_t>(i)] - sample_b[static_cast<std::size_t>(i)];
  mean /= n;
  Scalar ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const Scalar d = sample_a[static_cast<std::size_t>(i)] - sample_b[static_cast<std::size_t>(i)] - mean;
    ss += d * d;
  }
  const Scalar sd = std::sqrt(ss / (n - 1));
  r.mean_diff = mean;
  if (sd == 0.0) {
    if (mean == 0.0) {
      r.t_stat = 0.0;
      r.p_value = 1.0;
      r.ci_lo = r.ci_hi = 0.0;
    } else {
      r.degenerate = true;
      r.t_stat = mean > 0 ? std::numeric_limits<Scalar>::infinity()
                          : -std::numeric_limits<Scalar>::infinity();
      r.p_value = 0.0;
      r.ci_lo = r.ci_hi = mean;
    }
    return r;
  }
  const Scalar se = sd / std::sqrt(static_cast<Scalar>(n));
  r.t_stat = mean / se;
  r.p_value = 2.0 * (1.0 - student_t_cdf(std::abs(r.t_stat), r.df));
  const Scalar tcrit = student_t_quantile(1.0 - 0.5 * alpha, r.df);
  r.ci_lo = mean - tcrit * se;
  r.ci_hi = mean + tcrit * se;
  return r;
}

namespace {

std::vector<Scalar> average_ranks(const std::vector<Scalar>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
  std::vector<Scalar> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const Scalar avg = 0.5 * static_cast<Scalar>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Scalar spearman_rho(const std::vector<Scalar>& x, const std::vector<Scalar>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman_rho: need two equal-length samples");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const Scalar n = static_cast<Scalar>(x.size());
  Scalar mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  Scalar sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace sorct
