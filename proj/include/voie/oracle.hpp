#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "voie/design.hpp"
#include "voie/errors.hpp"
#include "voie/estimators.hpp"
#include "voie/population.hpp"

namespace voie {

namespace detail {

inline double population_s2(const Column& xs) {
  double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (n - 1.0);
}

}  // namespace detail

/// The always-identified estimand the plug-in estimator targets:
/// mean over units of the observable transcription of the VOIE. Equals the
/// oracle VOIE exactly when the time-invariance (and, for repeated
/// max-power, no-carryover) identity holds on the table.
inline double estimand_transcription(const PotentialOutcomeTable& table,
                                     const Design& design) {
  std::size_t n = table.size();
  double sum = 0.0;
  if (design.kind == DesignKind::repeated_max_power) {
    if (!table.y2_v1v2) {
      throw missing_column_error("estimand: table lacks the (v1,v2) column");
    }
    const Column& v1 = table.y1_of_variant(0);
    for (std::size_t i = 0; i < n; ++i) {
      sum += ((*table.y2_v1v2)[i] - v1[i]) - table.delta(i);
    }
  } else {
    if (!table.y2_cv2) {
      throw missing_column_error("estimand: table lacks the (c,v2) column");
    }
    const Column& v1 = table.y1_of_variant(0);
    for (std::size_t i = 0; i < n; ++i) {
      sum += (*table.y2_cv2)[i] - v1[i] - table.delta(i);
    }
  }
  return sum / static_cast<double>(n);
}

/// Finite-population S^2 terms and the randomization variance they imply.
struct VarianceTerms {
  double s2_second = 0.0;  // S^2_{c,v2} (progressive) or S^2_{v1,v2} (diffs)
  double s2_first = 0.0;   // S^2_{v1}; zero for repeated max-power
  double s2_delta = 0.0;   // S^2_{Delta}
  double s2_tau = 0.0;     // S^2 of the per-unit transcription
};

inline VarianceTerms variance_terms(const PotentialOutcomeTable& table,
                                    const Design& design) {
  std::size_t n = table.size();
  VarianceTerms t;
  const Column& v1 = table.y1_of_variant(0);

  Column delta(n);
  for (std::size_t i = 0; i < n; ++i) delta[i] = table.delta(i);
  t.s2_delta = detail::population_s2(delta);

  Column transcription(n);
  if (design.kind == DesignKind::repeated_max_power) {
    if (!table.y2_v1v2) {
      throw missing_column_error("variance: table lacks the (v1,v2) column");
    }
    Column diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = (*table.y2_v1v2)[i] - v1[i];
    t.s2_second = detail::population_s2(diff);
    for (std::size_t i = 0; i < n; ++i) transcription[i] = diff[i] - delta[i];
  } else {
    if (!table.y2_cv2) {
      throw missing_column_error("variance: table lacks the (c,v2) column");
    }
    t.s2_second = detail::population_s2(*table.y2_cv2);
    t.s2_first = detail::population_s2(v1);
    for (std::size_t i = 0; i < n; ++i) {
      transcription[i] = (*table.y2_cv2)[i] - v1[i] - delta[i];
    }
  }
  t.s2_tau = detail::population_s2(transcription);
  return t;
}

/// Randomization variance of the plug-in estimator, from the S^2 formulas
/// with all four terms (including the -S^2_tau / N correction).
inline double theoretical_variance(const PotentialOutcomeTable& table,
                                   const Design& design) {
  VarianceTerms t = variance_terms(table, design);
  BucketTargets b = bucket_targets(design);
  double n = static_cast<double>(table.size());
  if (design.kind == DesignKind::repeated_max_power) {
    return t.s2_second / static_cast<double>(b.n_first_treated) +
           t.s2_delta / static_cast<double>(b.n_never_treated) -
           t.s2_tau / n;
  }
  return t.s2_second / static_cast<double>(b.n_newly_treated) +
         t.s2_first / static_cast<double>(b.n_first_treated) +
         t.s2_delta / static_cast<double>(b.n_never_treated) - t.s2_tau / n;
}

/// Exact randomization moments of the estimator by full enumeration, side by
/// side with the closed-form variance.
struct OracleMoments {
  double exact_mean = 0.0;
  double exact_variance = 0.0;
  double theoretical_variance = 0.0;
  VarianceTerms s_terms;
  std::uint64_t assignment_count = 0;
  // Enumeration average of the reported conservative variance estimate;
  // NaN when some assignment has a singleton bucket.
  double mean_var_upper = 0.0;
};

inline OracleMoments exact_moments(const PotentialOutcomeTable& table,
                                   const Design& design,
                                   std::uint64_t cap = 1'000'000) {
  std::vector<Assignment> all = enumerate_assignments(design, cap);
  OracleMoments m;
  m.assignment_count = all.size();
  m.s_terms = variance_terms(table, design);
  m.theoretical_variance = theoretical_variance(table, design);

  EstimateOptions opts;
  opts.require_variance = false;
  std::vector<double> taus;
  taus.reserve(all.size());
  double var_upper_sum = 0.0;
  bool var_upper_ok = true;
  for (const Assignment& a : all) {
    ObservedData obs = observe(table, a);
    VoieEstimate e = (design.kind == DesignKind::repeated_max_power)
                         ? estimate_repeated_mp(obs, opts)
                         : estimate_progressive(obs, opts);
    taus.push_back(e.tau_hat);
    if (e.var_upper_hat) {
      var_upper_sum += *e.var_upper_hat;
    } else {
      var_upper_ok = false;
    }
  }
  double count = static_cast<double>(taus.size());
  for (double t : taus) m.exact_mean += t;
  m.exact_mean /= count;
  for (double t : taus) {
    m.exact_variance += (t - m.exact_mean) * (t - m.exact_mean);
  }
  m.exact_variance /= count;
  m.mean_var_upper = var_upper_ok ? var_upper_sum / count
                                  : std::nan("");
  return m;
}

/// Monte Carlo check of Wald-interval coverage. Coverage is reported against
/// the always-identified transcription and, separately, against the oracle
/// VOIE when the table stores the Y1(v2) column.
struct CoverageReport {
  double estimand = 0.0;       // transcription targeted by the estimator
  double oracle_voie = std::nan("");  // tau_1 from the Y1(v2) column
  double coverage = 0.0;              // intervals containing `estimand`
  double coverage_oracle = std::nan("");
  double binomial_se = 0.0;
  std::size_t reps = 0;
  double mean_tau_hat = 0.0;
};

inline CoverageReport monte_carlo_coverage(const PotentialOutcomeTable& table,
                                           const Design& design, double alpha,
                                           std::size_t reps,
                                           std::uint64_t seed) {
  if (reps < 1000) {
    throw error("monte_carlo_coverage: reps must be >= 1000");
  }
  CoverageReport r;
  r.reps = reps;
  r.estimand = estimand_transcription(table, design);
  bool have_oracle = table.y1_v2.has_value();
  if (have_oracle) r.oracle_voie = true_voie(table);

  EstimateOptions opts;
  opts.alpha = alpha;
  std::size_t hit = 0, hit_oracle = 0;
  double tau_sum = 0.0;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    std::uint64_t s = detail::derive_seed(seed, rep);
    Assignment a = (design.kind == DesignKind::repeated_max_power)
                       ? assign_repeated_mp(design, s)
                       : assign_progressive(design, s);
    ObservedData obs = observe(table, a);
    VoieEstimate e = (design.kind == DesignKind::repeated_max_power)
                         ? estimate_repeated_mp(obs, opts)
                         : estimate_progressive(obs, opts);
    tau_sum += e.tau_hat;
    if (e.ci->lo <= r.estimand && r.estimand <= e.ci->hi) ++hit;
    if (have_oracle && e.ci->lo <= r.oracle_voie && r.oracle_voie <= e.ci->hi) {
      ++hit_oracle;
    }
  }
  double n = static_cast<double>(reps);
  r.coverage = static_cast<double>(hit) / n;
  if (have_oracle) r.coverage_oracle = static_cast<double>(hit_oracle) / n;
  r.binomial_se = std::sqrt(r.coverage * (1.0 - r.coverage) / n);
  r.mean_tau_hat = tau_sum / n;
  return r;
}

}  // namespace voie
