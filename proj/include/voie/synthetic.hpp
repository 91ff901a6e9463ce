#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "voie/design.hpp"
#include "voie/ingest.hpp"
#include "voie/population.hpp"

namespace voie {

/// Bounded-outcome synthetic population: per-unit baselines drawn once from a
/// fixed range, additive unit-level effects, optional control drift. The
/// time-invariance and no-carryover identities hold by construction unless a
/// violation is requested.
struct SyntheticTableSpec {
  std::size_t n = 1000;
  double baseline_lo = 0.0, baseline_hi = 10.0;
  double effect_lo = -1.0, effect_hi = 1.0;       // v1 effect vs control
  double improvement_lo = 0.0, improvement_hi = 2.0;  // v2 over v1
  double drift_lo = -0.5, drift_hi = 0.5;         // Delta_i
  double time_invariance_violation = 0.0;  // added to y2_cv2 per unit
  bool include_deramp_branch = false;
};

inline PotentialOutcomeTable synthetic_table(const SyntheticTableSpec& spec,
                                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto unif = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  std::size_t n = spec.n;
  PotentialOutcomeTable t;
  t.y1_c.resize(n);
  t.y1_variant.assign(1, Column(n));
  t.y1_v2 = Column(n);
  t.y2_cc.resize(n);
  t.y2_cv2 = Column(n);
  t.y2_v1v2 = Column(n);
  if (spec.include_deramp_branch) t.y2_v1c = Column(n);

  std::uniform_real_distribution<double> viol(-1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double base = unif(spec.baseline_lo, spec.baseline_hi);
    double effect = unif(spec.effect_lo, spec.effect_hi);
    double improvement = unif(spec.improvement_lo, spec.improvement_hi);
    double drift = unif(spec.drift_lo, spec.drift_hi);
    t.y1_c[i] = base;
    t.y1_variant[0][i] = base + effect;
    (*t.y1_v2)[i] = base + effect + improvement;
    t.y2_cc[i] = base + drift;
    (*t.y2_cv2)[i] = t.y2_cc[i] + ((*t.y1_v2)[i] - t.y1_c[i]) +
                     spec.time_invariance_violation * viol(rng);
    (*t.y2_v1v2)[i] = (*t.y2_cv2)[i];
    if (t.y2_v1c) (*t.y2_v1c)[i] = t.y2_cc[i] + effect * 0.25;
  }
  return t;
}

/// Fully random table on [0, 10]: no structure unless the identities are
/// explicitly enforced. Used by the randomization oracles, which must hold
/// for arbitrary potential outcomes.
inline PotentialOutcomeTable random_table(std::size_t n, std::uint64_t seed,
                                          bool enforce_time_invariance,
                                          bool enforce_no_carryover) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  PotentialOutcomeTable t;
  t.y1_c.resize(n);
  t.y1_variant.assign(1, Column(n));
  t.y1_v2 = Column(n);
  t.y2_cc.resize(n);
  t.y2_cv2 = Column(n);
  t.y2_v1v2 = Column(n);
  for (std::size_t i = 0; i < n; ++i) {
    t.y1_c[i] = unif(rng);
    t.y1_variant[0][i] = unif(rng);
    (*t.y1_v2)[i] = unif(rng);
    t.y2_cc[i] = unif(rng);
    (*t.y2_cv2)[i] = enforce_time_invariance
                         ? t.y2_cc[i] + ((*t.y1_v2)[i] - t.y1_c[i])
                         : unif(rng);
    (*t.y2_v1v2)[i] = enforce_no_carryover ? (*t.y2_cv2)[i] : unif(rng);
  }
  return t;
}

/// The four-unit reference population used across the test suites.
inline PotentialOutcomeTable reference_table_four_unit() {
  PotentialOutcomeTable t;
  t.y1_c = {10, 20, 30, 40};
  t.y1_variant = {{12, 21, 33, 40}};
  t.y1_v2 = Column{13, 24, 33, 45};
  t.y2_cc = {10, 20, 30, 40};
  t.y2_cv2 = Column{13, 24, 33, 45};
  t.y2_v1v2 = Column{13, 24, 33, 45};
  return t;
}

/// One synthesized finished experiment: the summary-log record plus the
/// ground truth it was generated from.
struct SyntheticExperiment {
  ExperimentRecord record;
  double true_value = 0.0;  // estimand of the record's kind
};

struct SyntheticCorpusSpec {
  std::size_t experiments = 200;
  std::size_t population = 25000;
  double deramp_fraction = 0.1;
  double repeated_mp_fraction = 0.2;
  std::uint64_t seed = 1;
};

/// Simulates a corpus of finished experiments end to end: for each one, draw
/// a population, run the design, and write only what a platform would keep
/// (per-bucket summaries).
inline std::vector<SyntheticExperiment> synthetic_corpus(
    const SyntheticCorpusSpec& spec) {
  static const double kAllocs[] = {0.01, 0.05, 0.10, 0.25};
  static const char* kTeams[] = {"growth", "search", "ads", "infra"};
  static const char* kMonths[] = {"2019-01", "2019-02", "2019-03", "2019-04",
                                  "2019-05", "2019-06", "2019-07"};
  std::vector<SyntheticExperiment> out;
  out.reserve(spec.experiments);
  std::mt19937_64 rng(spec.seed);

  for (std::size_t j = 0; j < spec.experiments; ++j) {
    std::uint64_t table_seed = detail::derive_seed(spec.seed, j);
    SyntheticTableSpec ts;
    ts.n = spec.population;
    ts.improvement_lo = -0.5;
    ts.improvement_hi = 1.5;
    PotentialOutcomeTable table = synthetic_table(ts, table_seed);

    double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    ExperimentRecord r;
    r.id = "exp-" + std::to_string(j);
    r.team = kTeams[j % 4];
    r.end_month = kMonths[j % 7];

    SyntheticExperiment s;
    std::uint64_t assign_seed = detail::derive_seed(spec.seed ^ 0xabcdULL, j);

    if (u < spec.deramp_fraction) {
      Design d{spec.population, 0.25, 0.5, DesignKind::progressive};
      Assignment a = assign_deramp(d, assign_seed);
      ObservedData obs = observe(table, a);
      std::vector<double> ty, cy;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        (obs.paths[i].treated_first() ? ty : cy).push_back(obs.y1_obs[i]);
      }
      r.kind = EstimandKind::de_ramp;
      r.lu.allocation = 0.25;
      r.lu.duration_days = 5;
      r.lu.treated = summarize(ty);
      r.lu.control = summarize(cy);
      s.true_value = true_voie_deramp(table);
    } else if (u < spec.deramp_fraction + spec.repeated_mp_fraction) {
      Design d{spec.population, 0.5, 0.5, DesignKind::repeated_max_power};
      Assignment a = assign_repeated_mp(d, assign_seed);
      ObservedData obs = observe(table, a);
      std::vector<double> td, cd;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        double diff = *obs.y2_obs[i] - obs.y1_obs[i];
        (obs.paths[i].kind == PathKind::treated ? td : cd).push_back(diff);
      }
      r.kind = EstimandKind::repeated_max_power;
      r.lu.allocation = 0.5;
      r.lu.duration_days = 4;
      IterationSummary lmp;
      lmp.allocation = 0.5;
      lmp.duration_days = 7;
      lmp.treated = summarize(td);
      lmp.delta = summarize(cd);
      r.lmp = lmp;
      // LU summaries kept for the eligibility filter.
      std::vector<double> ty, cy;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        (obs.paths[i].treated_first() ? ty : cy).push_back(obs.y1_obs[i]);
      }
      r.lu.treated = summarize(ty);
      r.lu.control = summarize(cy);
      s.true_value = true_voie(table);
    } else {
      double alloc = kAllocs[j % 4];
      Design d{spec.population, alloc, 0.5, DesignKind::progressive};
      Assignment a = assign_progressive(d, assign_seed);
      ObservedData obs = observe(table, a);
      std::vector<double> v1y, cy1, cv2y, ccd;
      for (std::size_t i = 0; i < obs.size(); ++i) {
        switch (obs.paths[i].kind) {
          case PathKind::treated:
          case PathKind::reverted:
            v1y.push_back(obs.y1_obs[i]);
            break;
          case PathKind::control_treated:
            cv2y.push_back(*obs.y2_obs[i]);
            cy1.push_back(obs.y1_obs[i]);
            break;
          case PathKind::control_control:
            ccd.push_back(*obs.y2_obs[i] - obs.y1_obs[i]);
            cy1.push_back(obs.y1_obs[i]);
            break;
        }
      }
      r.kind = EstimandKind::progressive;
      r.lu.allocation = alloc;
      r.lu.duration_days = 5;
      r.lu.treated = summarize(v1y);
      r.lu.control = summarize(cy1);
      IterationSummary lmp;
      lmp.allocation = 0.5;
      lmp.duration_days = 7;
      lmp.treated = summarize(cv2y);
      lmp.delta = summarize(ccd);
      r.lmp = lmp;
      s.true_value = true_voie(table);
    }
    s.record = std::move(r);
    out.push_back(std::move(s));
  }
  return out;
}

/// Serializes a corpus into the voie-log/v1 schema.
inline void write_corpus(const std::vector<ExperimentRecord>& records,
                         std::ostream& out) {
  out << kLogSchemaVersion << '\n';
  out << "id,team,end_month,kind,lu_alloc,lu_days,lu_nt,lu_mt,lu_vt,lu_nc,"
         "lu_mc,lu_vc,lu_ndelta,lu_mdelta,lu_vdelta,lmp_alloc,lmp_days,"
         "lmp_nt,lmp_mt,lmp_vt,lmp_nc,lmp_mc,lmp_vc,lmp_ndelta,lmp_mdelta,"
         "lmp_vdelta\n";
  out.precision(17);
  auto bucket = [&out](const BucketSummary& b) {
    if (b.count == 0) {
      out << ",,,";
      return;
    }
    out << ',' << b.count << ',' << b.mean << ',';
    if (b.count >= 2) out << b.sample_variance;
  };
  for (const ExperimentRecord& r : records) {
    out << r.id << ',' << r.team << ',' << r.end_month << ','
        << to_string(r.kind) << ',' << r.lu.allocation << ','
        << r.lu.duration_days;
    bucket(r.lu.treated);
    bucket(r.lu.control);
    bucket(r.lu.delta);
    if (r.lmp) {
      out << ',' << r.lmp->allocation << ',' << r.lmp->duration_days;
      bucket(r.lmp->treated);
      bucket(r.lmp->control);
      bucket(r.lmp->delta);
    } else {
      out << ",,";
      for (int k = 0; k < 9; ++k) out << ',';
    }
    out << '\n';
  }
}

}  // namespace voie
