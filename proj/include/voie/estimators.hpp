#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "voie/errors.hpp"
#include "voie/normal.hpp"
#include "voie/population.hpp"

namespace voie {

/// Count, mean and sample variance (divisor count - 1) of one bucket. For
/// difference buckets the summarized quantity is y2_obs - y1_obs.
struct BucketSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double sample_variance = 0.0;  // valid when count >= 2
};

inline BucketSummary summarize(const std::vector<double>& xs) {
  BucketSummary s;
  s.count = xs.size();
  if (s.count == 0) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(s.count);
  if (s.count >= 2) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.sample_variance = ss / static_cast<double>(s.count - 1);
  }
  return s;
}

enum class EstimandKind {
  progressive,
  repeated_max_power,
  de_ramp,
  multi_variant,
  collapsed,
};

inline const char* to_string(EstimandKind k) {
  switch (k) {
    case EstimandKind::progressive: return "progressive";
    case EstimandKind::repeated_max_power: return "repeated-max-power";
    case EstimandKind::de_ramp: return "de-ramp";
    case EstimandKind::multi_variant: return "multi-variant";
    case EstimandKind::collapsed: return "collapsed";
  }
  return "?";
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

inline Interval wald_interval(double tau_hat, double var_upper_hat,
                              double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::domain_error("wald_interval: alpha must lie in (0, 1)");
  }
  if (var_upper_hat < 0.0) {
    throw std::domain_error("wald_interval: variance must be >= 0");
  }
  double half = z_alpha_half(alpha) * std::sqrt(var_upper_hat);
  return {tau_hat - half, tau_hat + half};
}

/// Point estimate, conservative variance estimate and Wald interval. The
/// variance and interval are absent when computed in variance-optional mode
/// with a singleton bucket.
struct VoieEstimate {
  EstimandKind kind = EstimandKind::progressive;
  double tau_hat = 0.0;
  std::optional<double> var_upper_hat;
  double alpha = 0.05;
  std::optional<Interval> ci;
  std::vector<std::pair<std::string, BucketSummary>> buckets;
};

struct EstimateOptions {
  double alpha = 0.05;
  // When false, a singleton bucket yields a point estimate with absent
  // variance instead of an error.
  bool require_variance = true;
};

namespace detail {

inline void require_count(const BucketSummary& b, const char* name,
                          const EstimateOptions& opts) {
  if (b.count == 0) {
    throw insufficient_bucket_error(std::string("bucket ") + name +
                                    " is empty");
  }
  if (opts.require_variance && b.count < 2) {
    throw insufficient_bucket_error(
        std::string("bucket ") + name + " has count " +
        std::to_string(b.count) + "; need >= 2 for variance estimation");
  }
}

inline VoieEstimate finalize(EstimandKind kind, double tau,
                             std::optional<double> var,
                             const EstimateOptions& opts,
                             std::vector<std::pair<std::string, BucketSummary>>
                                 buckets) {
  VoieEstimate e;
  e.kind = kind;
  e.tau_hat = tau;
  e.var_upper_hat = var;
  e.alpha = opts.alpha;
  if (var) e.ci = wald_interval(tau, *var, opts.alpha);
  e.buckets = std::move(buckets);
  return e;
}

}  // namespace detail

/// Plug-in VOIE estimator for the progressive design, from pre-aggregated
/// bucket summaries: second-iteration outcomes of the newly treated, first-
/// iteration outcomes of the originally treated, and the control drift.
inline VoieEstimate estimate_progressive_summaries(
    const BucketSummary& cv2_y2, const BucketSummary& v1_y1,
    const BucketSummary& cc_delta, const EstimateOptions& opts = {}) {
  detail::require_count(cv2_y2, "(c,v2)", opts);
  detail::require_count(v1_y1, "(v1,.)", opts);
  detail::require_count(cc_delta, "(c,c)", opts);

  double tau = cv2_y2.mean - v1_y1.mean - cc_delta.mean;
  std::optional<double> var;
  if (cv2_y2.count >= 2 && v1_y1.count >= 2 && cc_delta.count >= 2) {
    var = cv2_y2.sample_variance / static_cast<double>(cv2_y2.count) +
          v1_y1.sample_variance / static_cast<double>(v1_y1.count) +
          cc_delta.sample_variance / static_cast<double>(cc_delta.count);
  }
  return detail::finalize(EstimandKind::progressive, tau, var, opts,
                          {{"cv2_y2", cv2_y2},
                           {"v1_y1", v1_y1},
                           {"cc_delta", cc_delta}});
}

/// Repeated max-power estimator from difference-bucket summaries.
inline VoieEstimate estimate_repeated_mp_summaries(
    const BucketSummary& treated_diff, const BucketSummary& control_diff,
    const EstimateOptions& opts = {}) {
  detail::require_count(treated_diff, "(v1,v2)", opts);
  detail::require_count(control_diff, "(c,c)", opts);

  double tau = treated_diff.mean - control_diff.mean;
  std::optional<double> var;
  if (treated_diff.count >= 2 && control_diff.count >= 2) {
    var = treated_diff.sample_variance /
              static_cast<double>(treated_diff.count) +
          control_diff.sample_variance /
              static_cast<double>(control_diff.count);
  }
  return detail::finalize(EstimandKind::repeated_max_power, tau, var, opts,
                          {{"treated_diff", treated_diff},
                           {"control_diff", control_diff}});
}

/// Prevented-loss estimator from first-iteration summaries: the negated
/// two-sample difference in means.
inline VoieEstimate estimate_deramp_summaries(
    const BucketSummary& treated_y1, const BucketSummary& control_y1,
    const EstimateOptions& opts = {}) {
  detail::require_count(treated_y1, "treated", opts);
  detail::require_count(control_y1, "control", opts);

  double tau = -(treated_y1.mean - control_y1.mean);
  std::optional<double> var;
  if (treated_y1.count >= 2 && control_y1.count >= 2) {
    var = treated_y1.sample_variance / static_cast<double>(treated_y1.count) +
          control_y1.sample_variance / static_cast<double>(control_y1.count);
  }
  return detail::finalize(EstimandKind::de_ramp, tau, var, opts,
                          {{"treated_y1", treated_y1},
                           {"control_y1", control_y1}});
}

/// Multi-variant estimator from summaries. The first-iteration term is the
/// share-weighted mixture of the variant bucket means; the control drift
/// enters once, through the delta bucket, so the single-variant case reduces
/// exactly to the progressive estimator.
inline VoieEstimate estimate_multivariant_summaries(
    const std::vector<BucketSummary>& variant_y1,
    const std::vector<double>& shares, double p1, const BucketSummary& cv2_y2,
    const BucketSummary& cc_delta, const EstimateOptions& opts = {}) {
  if (variant_y1.size() != shares.size() || variant_y1.empty()) {
    throw share_sum_error("multivariant: shares and variant buckets mismatch");
  }
  double total = 0.0;
  for (double s : shares) total += s;
  if (std::abs(total - p1) > 1e-9) {
    throw share_sum_error("variant shares must sum to p1");
  }

  if (variant_y1.size() == 1) {
    VoieEstimate e = estimate_progressive_summaries(cv2_y2, variant_y1[0],
                                                    cc_delta, opts);
    e.kind = EstimandKind::multi_variant;
    return e;
  }

  detail::require_count(cv2_y2, "(c,v2)", opts);
  detail::require_count(cc_delta, "(c,c)", opts);
  bool have_var = cv2_y2.count >= 2 && cc_delta.count >= 2;
  std::vector<std::pair<std::string, BucketSummary>> buckets{
      {"cv2_y2", cv2_y2}, {"cc_delta", cc_delta}};

  double mixture = 0.0;
  double mix_var = 0.0;
  for (std::size_t j = 0; j < variant_y1.size(); ++j) {
    std::string name = "variant_" + std::to_string(j);
    detail::require_count(variant_y1[j], name.c_str(), opts);
    double w = shares[j] / p1;
    mixture += w * variant_y1[j].mean;
    if (variant_y1[j].count < 2) have_var = false;
    if (have_var) {
      mix_var += w * w * variant_y1[j].sample_variance /
                 static_cast<double>(variant_y1[j].count);
    }
    buckets.emplace_back(std::move(name), variant_y1[j]);
  }

  double tau = cv2_y2.mean - cc_delta.mean - mixture;
  std::optional<double> var;
  if (have_var) {
    var = cv2_y2.sample_variance / static_cast<double>(cv2_y2.count) +
          cc_delta.sample_variance / static_cast<double>(cc_delta.count) +
          mix_var;
  }
  return detail::finalize(EstimandKind::multi_variant, tau, var, opts,
                          std::move(buckets));
}

namespace detail {

inline double require_y2(const ObservedData& obs, std::size_t i) {
  if (!obs.y2_obs[i]) {
    throw missing_path_error(
        "unit " + std::to_string(i) +
        " has no second-iteration observation (truncated experiment?)");
  }
  return *obs.y2_obs[i];
}

}  // namespace detail

inline VoieEstimate estimate_progressive(const ObservedData& obs,
                                         const EstimateOptions& opts = {}) {
  std::vector<double> cv2_y2, v1_y1, cc_delta;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    switch (obs.paths[i].kind) {
      case PathKind::control_treated:
        cv2_y2.push_back(detail::require_y2(obs, i));
        break;
      case PathKind::treated:
      case PathKind::reverted:
        v1_y1.push_back(obs.y1_obs[i]);
        break;
      case PathKind::control_control:
        cc_delta.push_back(detail::require_y2(obs, i) - obs.y1_obs[i]);
        break;
    }
  }
  return estimate_progressive_summaries(summarize(cv2_y2), summarize(v1_y1),
                                        summarize(cc_delta), opts);
}

inline VoieEstimate estimate_repeated_mp(const ObservedData& obs,
                                         const EstimateOptions& opts = {}) {
  std::vector<double> treated_diff, control_diff;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs.paths[i].kind == PathKind::treated) {
      treated_diff.push_back(detail::require_y2(obs, i) - obs.y1_obs[i]);
    } else if (obs.paths[i].kind == PathKind::control_control) {
      control_diff.push_back(detail::require_y2(obs, i) - obs.y1_obs[i]);
    }
  }
  return estimate_repeated_mp_summaries(summarize(treated_diff),
                                        summarize(control_diff), opts);
}

/// Uses only first-iteration observations; valid for truncated (de-ramped)
/// experiments.
inline VoieEstimate estimate_deramp(const ObservedData& obs,
                                    const EstimateOptions& opts = {}) {
  std::vector<double> treated_y1, control_y1;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (obs.paths[i].treated_first()) {
      treated_y1.push_back(obs.y1_obs[i]);
    } else {
      control_y1.push_back(obs.y1_obs[i]);
    }
  }
  return estimate_deramp_summaries(summarize(treated_y1),
                                   summarize(control_y1), opts);
}

inline VoieEstimate estimate_multivariant(const ObservedData& obs,
                                          const std::vector<double>& shares,
                                          double p1,
                                          const EstimateOptions& opts = {}) {
  std::vector<std::vector<double>> by_variant(shares.size());
  std::vector<double> cv2_y2, cc_delta;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    switch (obs.paths[i].kind) {
      case PathKind::treated:
      case PathKind::reverted: {
        std::size_t j = static_cast<std::size_t>(obs.paths[i].variant);
        if (j >= by_variant.size()) {
          throw share_sum_error("observed variant index " + std::to_string(j) +
                                " outside the declared split");
        }
        by_variant[j].push_back(obs.y1_obs[i]);
        break;
      }
      case PathKind::control_treated:
        cv2_y2.push_back(detail::require_y2(obs, i));
        break;
      case PathKind::control_control:
        cc_delta.push_back(detail::require_y2(obs, i) - obs.y1_obs[i]);
        break;
    }
  }
  std::vector<BucketSummary> variant_y1(by_variant.size());
  for (std::size_t j = 0; j < by_variant.size(); ++j) {
    variant_y1[j] = summarize(by_variant[j]);
  }
  return estimate_multivariant_summaries(variant_y1, shares, p1,
                                         summarize(cv2_y2),
                                         summarize(cc_delta), opts);
}

/// Re-indexing of the two-iteration data into the three-bucket auxiliary
/// design: label 1 for first-iteration treated units (collapsed outcome y1),
/// label 2 for the newly treated (y2), label 3 for never treated (y2 - y1).
struct CollapsedView {
  std::vector<int> labels;
  std::vector<double> outcomes;
};

inline CollapsedView collapse(const ObservedData& obs) {
  CollapsedView v;
  v.labels.resize(obs.size());
  v.outcomes.resize(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    switch (obs.paths[i].kind) {
      case PathKind::treated:
      case PathKind::reverted:
        v.labels[i] = 1;
        v.outcomes[i] = obs.y1_obs[i];
        break;
      case PathKind::control_treated:
        v.labels[i] = 2;
        v.outcomes[i] = detail::require_y2(obs, i);
        break;
      case PathKind::control_control:
        v.labels[i] = 3;
        v.outcomes[i] = detail::require_y2(obs, i) - obs.y1_obs[i];
        break;
    }
  }
  return v;
}

/// Signed three-bucket mean over the collapsed view; numerically identical to
/// estimate_progressive on the same data.
inline VoieEstimate estimate_collapsed(const ObservedData& obs,
                                       const EstimateOptions& opts = {}) {
  CollapsedView v = collapse(obs);
  std::vector<double> b1, b2, b3;
  for (std::size_t i = 0; i < v.labels.size(); ++i) {
    if (v.labels[i] == 1) b1.push_back(v.outcomes[i]);
    else if (v.labels[i] == 2) b2.push_back(v.outcomes[i]);
    else b3.push_back(v.outcomes[i]);
  }
  VoieEstimate e = estimate_progressive_summaries(summarize(b2), summarize(b1),
                                                  summarize(b3), opts);
  e.kind = EstimandKind::collapsed;
  return e;
}

}  // namespace voie
