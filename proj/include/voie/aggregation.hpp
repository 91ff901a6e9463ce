#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "voie/errors.hpp"
#include "voie/estimators.hpp"
#include "voie/normal.hpp"

namespace voie {

/// Fixed- or inverse-variance-weighted aggregate of independent per-experiment
/// VOIE estimates.
struct AggregateEstimate {
  double delta_hat = 0.0;
  double var_hat = 0.0;
  std::vector<double> weights;  // sum to 1; zero for excluded experiments
  double p_value = 1.0;
  std::optional<double> normalized;
  std::size_t experiment_count = 0;
  std::vector<std::string> warnings;
};

/// Two-sided p-value for the aggregate against zero, normal reference with
/// the estimated variance treated as known.
inline double test_zero(double delta_hat, double var_hat,
                        std::optional<double> df = std::nullopt) {
  if (!(var_hat > 0.0)) {
    throw error("test_zero: variance must be > 0");
  }
  double z = std::abs(delta_hat) / std::sqrt(var_hat);
  if (df) {
    // Student-t override via the incomplete beta function.
    double v = *df;
    double x = v / (v + z * z);
    // Regularized incomplete beta I_x(v/2, 1/2) equals the two-sided p-value.
    // Continued fraction (Lentz).
    auto betacf = [](double a, double b, double x) {
      const int kMaxIter = 200;
      const double eps = 1e-14, fpmin = 1e-300;
      double qab = a + b, qap = a + 1.0, qam = a - 1.0;
      double c = 1.0, d = 1.0 - qab * x / qap;
      if (std::abs(d) < fpmin) d = fpmin;
      d = 1.0 / d;
      double h = d;
      for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
      }
      return h;
    };
    double a = v / 2.0, b = 0.5;
    double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    double front = std::exp(std::log(x) * a + std::log1p(-x) * b - lbeta) / a;
    double p = (x < (a + 1.0) / (a + b + 2.0))
                   ? front * betacf(a, b, x)
                   : 1.0 - std::exp(std::log1p(-x) * b + std::log(x) * a -
                                    lbeta) /
                               b * betacf(b, a, 1.0 - x);
    return std::min(1.0, std::max(0.0, p));
  }
  return 2.0 * (1.0 - normal_cdf(z));
}

/// delta_hat / (baseline_curr - baseline_prev): the aggregate as a fraction
/// of the year-over-year baseline movement.
inline double normalize(double delta_hat, double baseline_prev,
                        double baseline_curr) {
  double denom = baseline_curr - baseline_prev;
  if (denom == 0.0) {
    throw error("normalize: baseline difference is zero");
  }
  return delta_hat / denom;
}

namespace detail {

inline double variance_of(const VoieEstimate& e, std::size_t j) {
  if (!e.var_upper_hat) {
    throw error("aggregate: estimate " + std::to_string(j) +
                " carries no variance");
  }
  return *e.var_upper_hat;
}

inline void fill_p_value(AggregateEstimate& a) {
  if (a.var_hat > 0.0) {
    a.p_value = test_zero(a.delta_hat, a.var_hat);
  } else {
    a.p_value = (a.delta_hat == 0.0) ? 1.0 : 0.0;
  }
}

}  // namespace detail

inline AggregateEstimate aggregate_weighted(
    const std::vector<VoieEstimate>& estimates,
    const std::vector<double>& weights) {
  if (estimates.empty()) throw error("aggregate_weighted: empty input");
  if (weights.size() != estimates.size()) {
    throw error("aggregate_weighted: weights and estimates length mismatch");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) {
    throw error("aggregate_weighted: weights must sum to 1");
  }
  AggregateEstimate a;
  a.experiment_count = estimates.size();
  a.weights = weights;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    a.delta_hat += weights[j] * estimates[j].tau_hat;
    a.var_hat += weights[j] * weights[j] * detail::variance_of(estimates[j], j);
  }
  detail::fill_p_value(a);
  return a;
}

/// Inverse-variance weights; the conservative per-experiment variance
/// estimates are treated as true variances. Zero-variance estimates are
/// excluded with a warning and the remaining weights renormalized.
inline AggregateEstimate aggregate_inverse_variance(
    const std::vector<VoieEstimate>& estimates) {
  if (estimates.empty()) throw error("aggregate_inverse_variance: empty input");
  AggregateEstimate a;
  a.experiment_count = estimates.size();
  a.weights.assign(estimates.size(), 0.0);

  std::vector<double> vars(estimates.size());
  double inv_sum = 0.0;
  std::size_t usable = 0;
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    vars[j] = detail::variance_of(estimates[j], j);
    if (vars[j] > 0.0 && std::isfinite(vars[j])) {
      inv_sum += 1.0 / vars[j];
      ++usable;
    }
  }
  if (usable == 0) {
    throw error("aggregate_inverse_variance: no estimate has positive finite "
                "variance");
  }
  if (usable < estimates.size()) {
    a.warnings.push_back(std::to_string(estimates.size() - usable) +
                         " zero/non-finite-variance estimate(s) excluded");
  }
  for (std::size_t j = 0; j < estimates.size(); ++j) {
    if (vars[j] > 0.0 && std::isfinite(vars[j])) {
      a.weights[j] = (1.0 / vars[j]) / inv_sum;
      a.delta_hat += a.weights[j] * estimates[j].tau_hat;
      a.var_hat += a.weights[j] * a.weights[j] * vars[j];
    }
  }
  detail::fill_p_value(a);
  return a;
}

}  // namespace voie
