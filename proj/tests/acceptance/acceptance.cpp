// Acceptance gate: one line per criterion, nonzero exit if any fails.
//
// Usage: voie_acceptance <data-dir> [--update-golden]
//   <data-dir> holds filter_fixture.csv and report_golden.csv.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "voie/aggregation.hpp"
#include "voie/design.hpp"
#include "voie/estimators.hpp"
#include "voie/ingest.hpp"
#include "voie/oracle.hpp"
#include "voie/population.hpp"
#include "voie/synthetic.hpp"

using namespace voie;

namespace {

int g_failures = 0;

void report(int k, const std::string& name, bool ok,
            const std::string& detail) {
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << k << ": " << name;
  if (!detail.empty()) std::cout << " — " << detail;
  std::cout << std::endl;
  if (!ok) ++g_failures;
}

double rel_err(double got, double want) {
  double scale = std::max(1.0, std::abs(want));
  return std::abs(got - want) / scale;
}

struct EnumCase {
  PotentialOutcomeTable table;
  Design design;
};

std::vector<EnumCase> progressive_cases() {
  std::vector<EnumCase> cases;
  cases.push_back({reference_table_four_unit(),
                   Design{4, 0.25, 0.5, DesignKind::progressive}});
  std::mt19937_64 rng(2024);
  for (int k = 0; k < 10; ++k) {
    cases.push_back({random_table(8, rng(), true, true),
                     Design{8, 0.25, 0.5, DesignKind::progressive}});
  }
  for (int k = 0; k < 10; ++k) {
    // No identities enforced: unbiasedness for the transcription must hold
    // for arbitrary potential outcomes.
    cases.push_back({random_table(8, rng(), false, false),
                     Design{8, 0.25, 0.5, DesignKind::progressive}});
  }
  return cases;
}

std::vector<EnumCase> repeated_mp_cases() {
  std::vector<EnumCase> cases;
  std::mt19937_64 rng(4048);
  for (int k = 0; k < 10; ++k) {
    cases.push_back({random_table(8, rng(), false, true),
                     Design{8, 0.5, 0.5, DesignKind::repeated_max_power}});
  }
  for (int k = 0; k < 10; ++k) {
    cases.push_back({random_table(6, rng(), false, true),
                     Design{6, 0.5, 0.5, DesignKind::repeated_max_power}});
  }
  return cases;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: voie_acceptance <data-dir> [--update-golden]\n";
    return 2;
  }
  const std::string data_dir = argv[1];
  const bool update_golden =
      argc > 2 && std::string(argv[2]) == "--update-golden";

  std::vector<EnumCase> prog = progressive_cases();
  std::vector<EnumCase> rmp = repeated_mp_cases();

  // 1. Exact unbiasedness, progressive designs.
  {
    bool ok = true;
    double worst = 0.0;
    for (const EnumCase& c : prog) {
      OracleMoments m = exact_moments(c.table, c.design);
      double target = estimand_transcription(c.table, c.design);
      worst = std::max(worst, rel_err(m.exact_mean, target));
      ok = ok && rel_err(m.exact_mean, target) <= 1e-12;
      if (check_time_invariance(c.table).holds) {
        ok = ok && rel_err(m.exact_mean, true_voie(c.table)) <= 1e-12;
      }
    }
    std::ostringstream d;
    d << prog.size() << " tables, worst rel err " << worst;
    report(1, "exact unbiasedness (progressive)", ok, d.str());
  }

  // 2. Exact unbiasedness, repeated max-power designs (no-carryover holds
  // by generator construction).
  {
    bool ok = true;
    double worst = 0.0;
    for (const EnumCase& c : rmp) {
      OracleMoments m = exact_moments(c.table, c.design);
      double target = estimand_transcription(c.table, c.design);
      worst = std::max(worst, rel_err(m.exact_mean, target));
      ok = ok && rel_err(m.exact_mean, target) <= 1e-12;
    }
    std::ostringstream d;
    d << rmp.size() << " tables, worst rel err " << worst;
    report(2, "exact unbiasedness (repeated max-power)", ok, d.str());
  }

  // 3. Variance identity and conservativeness across all enumerated cases.
  {
    bool ok = true;
    double worst = 0.0;
    std::size_t strict_checked = 0;
    std::vector<EnumCase> all = prog;
    all.insert(all.end(), rmp.begin(), rmp.end());
    for (const EnumCase& c : all) {
      OracleMoments m = exact_moments(c.table, c.design);
      worst = std::max(worst, rel_err(m.exact_variance, m.theoretical_variance));
      ok = ok && rel_err(m.exact_variance, m.theoretical_variance) <= 1e-10;
      if (!std::isnan(m.mean_var_upper)) {
        ok = ok && m.mean_var_upper >= m.exact_variance - 1e-12;
        if (m.s_terms.s2_tau > 0.0) {
          ok = ok && m.mean_var_upper > m.exact_variance;
          ++strict_checked;
        }
      }
    }
    std::ostringstream d;
    d << "worst rel err " << worst << ", strict conservativeness on "
      << strict_checked << " tables";
    report(3, "variance identity and conservative estimate", ok, d.str());
  }

  // 4. Wald coverage at n = 1000, p1 = 0.1, alpha = 0.05, 10^4 reps.
  {
    SyntheticTableSpec spec;
    spec.n = 1000;
    PotentialOutcomeTable t = synthetic_table(spec, 90210);
    Design d{1000, 0.1, 0.5, DesignKind::progressive};
    CoverageReport r = monte_carlo_coverage(t, d, 0.05, 10000, 77);
    bool ok = r.coverage >= 0.945;
    std::ostringstream msg;
    msg << "coverage " << r.coverage << " (binomial SE " << r.binomial_se
        << (r.coverage > 0.95 ? ", conservative: above nominal 0.95" : "")
        << ")";
    report(4, "Wald interval coverage", ok, msg.str());
  }

  // 5. Collapsed-design equivalence: exact zero difference.
  {
    bool ok = true;
    std::mt19937_64 rng(515);
    for (int tbl = 0; tbl < 5; ++tbl) {
      PotentialOutcomeTable t = random_table(8, rng(), false, false);
      Design d{8, 0.25, 0.5, DesignKind::progressive};
      for (int s = 0; s < 20; ++s) {
        ObservedData obs = observe(t, assign_progressive(d, rng()));
        VoieEstimate a = estimate_progressive(obs);
        VoieEstimate b = estimate_collapsed(obs);
        ok = ok && (a.tau_hat - b.tau_hat == 0.0) &&
             (*a.var_upper_hat - *b.var_upper_hat == 0.0);
      }
    }
    report(5, "collapsed design equals progressive exactly", ok,
           "100 assignments across 5 tables");
  }

  // 6. Inverse-variance optimality over 1000 random weight vectors.
  {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> unif(0.1, 4.0);
    std::vector<VoieEstimate> es(50);
    for (VoieEstimate& e : es) {
      e.tau_hat = unif(rng);
      e.var_upper_hat = unif(rng);
    }
    AggregateEstimate inv = aggregate_inverse_variance(es);
    AggregateEstimate at_opt = aggregate_weighted(es, inv.weights);
    bool ok = std::abs(at_opt.var_hat - inv.var_hat) <= 1e-12;
    std::uniform_real_distribution<double> wdist(0.0, 1.0);
    for (int trial = 0; trial < 1000 && ok; ++trial) {
      std::vector<double> w(es.size());
      double total = 0.0;
      for (double& x : w) total += (x = wdist(rng) + 1e-3);
      double dev = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        w[j] /= total;
        dev = std::max(dev, std::abs(w[j] - inv.weights[j]));
      }
      AggregateEstimate a = aggregate_weighted(es, w);
      ok = ok && a.var_hat >= inv.var_hat - 1e-15;
      if (dev > 1e-6) ok = ok && a.var_hat > inv.var_hat + 1e-12;
    }
    report(6, "inverse-variance weights are optimal", ok,
           "J = 50, 1000 random weight vectors");
  }

  // 7. End-to-end pipeline on a 200-experiment synthetic corpus.
  {
    SyntheticCorpusSpec spec;  // 200 experiments, population 25000
    spec.seed = 707;
    std::vector<SyntheticExperiment> corpus = synthetic_corpus(spec);
    std::vector<ExperimentRecord> records;
    for (const auto& e : corpus) records.push_back(e.record);
    std::stringstream log;
    write_corpus(records, log);

    LoadResult loaded = load_experiments(log);
    bool ok = loaded.rejects.empty();
    std::vector<ExperimentRecord> kept = filter_experiments(loaded.records);
    ok = ok && kept.size() == corpus.size();

    std::vector<VoieEstimate> ests;
    std::vector<double> truths;
    for (const ExperimentRecord& r : kept) {
      ests.push_back(per_experiment_voie(r));
      for (const auto& e : corpus) {
        if (e.record.id == r.id) truths.push_back(e.true_value);
      }
    }
    AggregateEstimate agg = aggregate_inverse_variance(ests);
    double truth_weighted = 0.0;
    for (std::size_t j = 0; j < truths.size(); ++j) {
      truth_weighted += agg.weights[j] * truths[j];
    }
    double se = std::sqrt(agg.var_hat);
    double z = std::abs(agg.delta_hat - truth_weighted) / se;
    ok = ok && z <= 3.0;

    ReportTable by_month = group_and_report(kept, GroupKey::month);
    ReportTable by_alloc = group_and_report(kept, GroupKey::allocation);
    std::size_t month_total = 0, alloc_total = 0;
    for (const auto& row : by_month.rows) month_total += row.count;
    for (const auto& row : by_alloc.rows) alloc_total += row.count;
    ok = ok && month_total == kept.size() && alloc_total == kept.size();

    std::ostringstream d;
    d << "delta_inv " << agg.delta_hat << " vs truth " << truth_weighted
      << " (" << z << " SE), partitions " << month_total << "/" << alloc_total
      << " of " << kept.size();
    report(7, "end-to-end pipeline within 3 SE", ok, d.str());
  }

  // 8. Filter fidelity and report golden file.
  {
    bool ok = true;
    std::string detail;
    try {
      LoadResult lr = load_experiments(data_dir + "/filter_fixture.csv");
      ok = ok && lr.rejects.empty() && lr.records.size() == 6;
      std::vector<ExperimentRecord> kept = filter_experiments(lr.records);
      ok = ok && kept.size() == 4;
      for (const ExperimentRecord& r : kept) {
        ok = ok && r.id != "f4" && r.id != "f5";
        if (r.id == "f6") {
          ok = ok && !r.flags.empty() && r.flags[0] == "exceeds_max_days";
        } else {
          ok = ok && r.flags.empty();
        }
      }
      ReportTable table = group_and_report(kept, GroupKey::allocation);
      std::ostringstream rendered;
      write_report(table, rendered);
      const std::string golden_path = data_dir + "/report_golden.csv";
      if (update_golden) {
        std::ofstream out(golden_path);
        out << rendered.str();
        detail = "golden file rewritten";
      } else {
        std::ifstream in(golden_path);
        std::stringstream golden;
        golden << in.rdbuf();
        ok = ok && in.good() && golden.str() == rendered.str();
        detail = "fixture: 6 rows in, 4 kept, report matches golden";
      }
    } catch (const std::exception& e) {
      ok = false;
      detail = e.what();
    }
    report(8, "filter fidelity and report schema", ok, detail);
  }

  return g_failures == 0 ? 0 : 1;
}
