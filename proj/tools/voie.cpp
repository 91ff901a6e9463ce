// Command-line front end: simulate, estimate, aggregate, report.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
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
#include "voie/table_io.hpp"

using namespace voie;

namespace {

struct DesignFlags {
  std::size_t n = 0;
  double p1 = 0.0;
  double p2 = 0.5;
  std::string kind = "progressive";
  std::string split;
  bool complement_sizes = false;
  bool allow_p2_override = false;
};

void add_design_flags(CLI::App* cmd, DesignFlags& f, bool require_n) {
  auto* n = cmd->add_option("--n", f.n, "population size");
  if (require_n) n->required();
  cmd->add_option("--p1", f.p1, "first-iteration allocation")->required();
  cmd->add_option("--p2", f.p2, "second-iteration allocation (default 0.5)");
  cmd->add_option("--kind", f.kind,
                  "design kind: progressive|repeated-max-power");
  cmd->add_option("--split", f.split,
                  "variant split, e.g. A=0.05,B=0.05 (multi-variant)");
  cmd->add_flag("--complement-sizes", f.complement_sizes,
                "size the newly-treated group as (1-p1)*p2*n");
  cmd->add_flag("--allow-p2-override", f.allow_p2_override,
                "permit a progressive second iteration with p2 != 0.5");
}

VariantSplit parse_split(const std::string& s) {
  VariantSplit split;
  std::string part;
  std::istringstream ss(s);
  while (std::getline(ss, part, ',')) {
    std::istringstream inner(part);
    std::string piece;
    while (std::getline(inner, piece, ';')) {
      std::size_t eq = piece.find('=');
      if (eq == std::string::npos) {
        throw error("bad --split entry '" + piece + "' (want LABEL=SHARE)");
      }
      split.labels.push_back(piece.substr(0, eq));
      split.shares.push_back(std::stod(piece.substr(eq + 1)));
    }
  }
  return split;
}

Design make_design(const DesignFlags& f) {
  Design d;
  d.n = f.n;
  d.p1 = f.p1;
  d.p2 = f.p2;
  if (f.kind == "progressive") {
    d.kind = DesignKind::progressive;
  } else if (f.kind == "repeated-max-power") {
    d.kind = DesignKind::repeated_max_power;
  } else {
    throw error("unknown --kind '" + f.kind + "'");
  }
  if (!f.split.empty()) d.split = parse_split(f.split);
  d.complement_sizes = f.complement_sizes;
  d.allow_p2_override = f.allow_p2_override;
  return d;
}

std::ostream& open_out(std::ofstream& file, const std::string& path) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw error("cannot open output file '" + path + "'");
  return file;
}

// --- estimate: unit-level observed data --------------------------------

ObservedData load_observed(std::istream& in, std::size_t variants) {
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty observed-data file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "path,y1,y2") {
    throw parse_error("observed data must start with header 'path,y1,y2'");
  }
  ObservedData obs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = detail::split_csv(line);
    if (f.size() != 3) {
      throw parse_error("line " + std::to_string(lineno) +
                        ": expected 3 fields");
    }
    UnitPath p{PathKind::control_control, 0};
    const std::string& tok = f[0];
    auto variant_of = [&](const std::string& t, std::size_t off) {
      int j = std::stoi(t.substr(off)) - 1;
      if (j < 0 || static_cast<std::size_t>(j) >= variants) {
        throw parse_error("line " + std::to_string(lineno) +
                          ": variant index out of range in '" + t + "'");
      }
      return static_cast<std::int16_t>(j);
    };
    if (tok == "cc") {
      p.kind = PathKind::control_control;
    } else if (tok == "cv2") {
      p.kind = PathKind::control_treated;
    } else if (tok.rfind("rv", 0) == 0 && tok.size() > 2) {
      p.kind = PathKind::reverted;
      p.variant = variant_of(tok, 2);
    } else if (tok.rfind("v", 0) == 0 && tok.size() > 1) {
      p.kind = PathKind::treated;
      p.variant = variant_of(tok, 1);
    } else {
      throw parse_error("line " + std::to_string(lineno) +
                        ": unknown path token '" + tok + "'");
    }
    obs.paths.push_back(p);
    obs.y1_obs.push_back(detail::parse_num(f[1], "y1"));
    if (f[2].empty()) {
      obs.y2_obs.push_back(std::nullopt);
    } else {
      obs.y2_obs.push_back(detail::parse_num(f[2], "y2"));
    }
  }
  return obs;
}

BucketSummary parse_bucket(const std::string& s) {
  // count:mean:variance (variance optional for count < 2)
  std::vector<std::string> parts;
  std::istringstream ss(s);
  std::string piece;
  while (std::getline(ss, piece, ':')) parts.push_back(piece);
  if (parts.size() < 2 || parts.size() > 3) {
    throw error("bad bucket spec '" + s + "' (want COUNT:MEAN[:VARIANCE])");
  }
  BucketSummary b;
  b.count = static_cast<std::size_t>(std::stoull(parts[0]));
  b.mean = std::stod(parts[1]);
  if (parts.size() == 3) b.sample_variance = std::stod(parts[2]);
  return b;
}

void print_estimate(const VoieEstimate& e, std::ostream& out) {
  out.precision(12);
  out << "kind,tau_hat,var_upper_hat,ci_lo,ci_hi,alpha\n";
  out << to_string(e.kind) << ',' << e.tau_hat << ',';
  if (e.var_upper_hat) out << *e.var_upper_hat;
  out << ',';
  if (e.ci) out << e.ci->lo;
  out << ',';
  if (e.ci) out << e.ci->hi;
  out << ',' << e.alpha << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Finite-population estimation for two-iteration phased releases"};
  app.require_subcommand(1);

  // ---- simulate ----
  auto* sim = app.add_subcommand(
      "simulate", "enumerate or Monte Carlo a design on a population table");
  std::string sim_table, sim_generator;
  DesignFlags sim_design;
  std::string sim_mode = "enumerate";
  std::size_t sim_reps = 10000;
  double sim_alpha = 0.05;
  std::uint64_t sim_seed = 1, sim_table_seed = 1;
  std::uint64_t sim_cap = 1'000'000;
  std::string sim_out;
  sim->add_option("--table", sim_table, "columnar potential-outcome table");
  sim->add_option("--generator", sim_generator,
                  "synthetic|random table generator (instead of --table)");
  add_design_flags(sim, sim_design, false);
  sim->add_option("--mode", sim_mode, "enumerate|mc (default enumerate)");
  sim->add_option("--reps", sim_reps, "Monte Carlo repetitions (mc mode)");
  sim->add_option("--alpha", sim_alpha, "interval level (mc mode)");
  sim->add_option("--seed", sim_seed, "assignment RNG seed (mc mode)");
  sim->add_option("--table-seed", sim_table_seed, "generator seed");
  sim->add_option("--cap", sim_cap, "enumeration cap (enumerate mode)");
  sim->add_option("--out", sim_out, "output file (default stdout)");

  // ---- estimate ----
  auto* est = app.add_subcommand(
      "estimate", "per-experiment estimate from unit rows or bucket summaries");
  std::string est_kind = "progressive";
  std::string est_units;
  std::vector<std::string> est_buckets;
  std::string est_split;
  double est_p1 = 0.0, est_alpha = 0.05;
  bool est_point_only = false;
  std::string est_out;
  est->add_option("--kind", est_kind,
                  "progressive|repeated-max-power|de-ramp|multi-variant");
  est->add_option("--units", est_units,
                  "observed-data file with header path,y1,y2 "
                  "(path: v<j>, cv2, cc, rv<j>)");
  est->add_option("--bucket", est_buckets,
                  "NAME=COUNT:MEAN[:VARIANCE]; names per kind: "
                  "progressive cv2/v1/delta, repeated-max-power diff_t/diff_c, "
                  "de-ramp treated/control, multi-variant cv2/delta/v<j>");
  est->add_option("--split", est_split, "variant split (multi-variant)");
  est->add_option("--p1", est_p1, "first-iteration allocation (multi-variant)");
  est->add_option("--alpha", est_alpha, "interval level");
  est->add_flag("--point-only", est_point_only,
                "skip variance/interval estimation");
  est->add_option("--out", est_out, "output file (default stdout)");

  // ---- aggregate ----
  auto* agg = app.add_subcommand(
      "aggregate", "combine per-experiment estimates into a platform value");
  std::string agg_file, agg_weights = "inverse", agg_out;
  double agg_alpha = 0.05;
  std::optional<double> agg_prev, agg_curr, agg_df;
  agg->add_option("file", agg_file,
                  "delimited records: id,tau_hat,var_upper_hat[,weight]")
      ->required();
  agg->add_option("--weights", agg_weights,
                  "inverse (default) or file (use the fourth column)");
  agg->add_option("--alpha", agg_alpha, "significance level");
  agg->add_option("--baseline-prev", agg_prev, "previous-period baseline");
  agg->add_option("--baseline-curr", agg_curr, "current-period baseline");
  agg->add_option("--df", agg_df,
                  "Student-t degrees of freedom for the zero test "
                  "(default: normal reference)");
  agg->add_option("--out", agg_out, "output file (default stdout)");

  // ---- report ----
  auto* rep = app.add_subcommand(
      "report", "filter a voie-log corpus, group it, and aggregate per group");
  std::string rep_file, rep_group = "month", rep_out;
  std::size_t rep_min_samples = 10000;
  int rep_min_days = 3, rep_max_days = 14;
  double rep_alpha = 0.05;
  std::optional<double> rep_prev, rep_curr;
  rep->add_option("file", rep_file, "voie-log/v1 input file")->required();
  rep->add_option("--group-by", rep_group, "month|allocation|team");
  rep->add_option("--min-samples", rep_min_samples,
                  "per-iteration sample floor (default 10000)");
  rep->add_option("--min-days", rep_min_days,
                  "per-iteration duration floor (default 3)");
  rep->add_option("--max-days", rep_max_days,
                  "days beyond which a record is flagged (default 14)");
  rep->add_option("--alpha", rep_alpha, "significance level");
  rep->add_option("--baseline-prev", rep_prev, "previous-period baseline");
  rep->add_option("--baseline-curr", rep_curr, "current-period baseline");
  rep->add_option("--out", rep_out, "output file (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    std::ofstream file;
    if (sim->parsed()) {
      if (sim_table.empty() == sim_generator.empty()) {
        throw error("simulate: give exactly one of --table or --generator");
      }
      PotentialOutcomeTable table;
      if (!sim_table.empty()) {
        std::ifstream in(sim_table);
        if (!in) throw error("cannot open '" + sim_table + "'");
        table = load_table(in);
        if (sim_design.n == 0) sim_design.n = table.size();
      } else if (sim_generator == "synthetic") {
        SyntheticTableSpec spec;
        if (sim_design.n == 0) throw error("simulate --generator needs --n");
        spec.n = sim_design.n;
        table = synthetic_table(spec, sim_table_seed);
      } else if (sim_generator == "random") {
        if (sim_design.n == 0) throw error("simulate --generator needs --n");
        table = random_table(sim_design.n, sim_table_seed, false, false);
      } else {
        throw error("unknown --generator '" + sim_generator + "'");
      }
      Design d = make_design(sim_design);
      std::ostream& out = open_out(file, sim_out);
      out.precision(12);
      if (sim_mode == "enumerate") {
        OracleMoments m = exact_moments(table, d, sim_cap);
        out << "estimand,exact_mean,exact_variance,theoretical_variance,"
               "mean_var_upper,assignments\n";
        out << estimand_transcription(table, d) << ',' << m.exact_mean << ','
            << m.exact_variance << ',' << m.theoretical_variance << ','
            << m.mean_var_upper << ',' << m.assignment_count << '\n';
      } else if (sim_mode == "mc") {
        CoverageReport r =
            monte_carlo_coverage(table, d, sim_alpha, sim_reps, sim_seed);
        out << "estimand,oracle_voie,coverage,coverage_oracle,binomial_se,"
               "reps,mean_tau_hat\n";
        out << r.estimand << ',' << r.oracle_voie << ',' << r.coverage << ','
            << r.coverage_oracle << ',' << r.binomial_se << ',' << r.reps
            << ',' << r.mean_tau_hat << '\n';
      } else {
        throw error("unknown --mode '" + sim_mode + "' (enumerate|mc)");
      }
    } else if (est->parsed()) {
      EstimateOptions opts;
      opts.alpha = est_alpha;
      opts.require_variance = !est_point_only;
      VariantSplit split;
      if (!est_split.empty()) split = parse_split(est_split);
      std::map<std::string, BucketSummary> buckets;
      for (const std::string& b : est_buckets) {
        std::size_t eq = b.find('=');
        if (eq == std::string::npos) {
          throw error("bad --bucket '" + b + "' (want NAME=COUNT:MEAN[:VAR])");
        }
        buckets[b.substr(0, eq)] = parse_bucket(b.substr(eq + 1));
      }
      if (est_units.empty() == buckets.empty()) {
        throw error("estimate: give exactly one of --units or --bucket");
      }
      auto need = [&](const char* name) {
        auto it = buckets.find(name);
        if (it == buckets.end()) {
          throw error(std::string("estimate: missing --bucket ") + name);
        }
        return it->second;
      };
      VoieEstimate e;
      if (!est_units.empty()) {
        std::ifstream in(est_units);
        if (!in) throw error("cannot open '" + est_units + "'");
        std::size_t variants = split.labels.empty() ? 1 : split.labels.size();
        ObservedData obs = load_observed(in, variants);
        if (est_kind == "progressive") {
          e = estimate_progressive(obs, opts);
        } else if (est_kind == "repeated-max-power") {
          e = estimate_repeated_mp(obs, opts);
        } else if (est_kind == "de-ramp") {
          e = estimate_deramp(obs, opts);
        } else if (est_kind == "multi-variant") {
          if (split.labels.empty() || est_p1 <= 0.0) {
            throw error("estimate multi-variant needs --split and --p1");
          }
          e = estimate_multivariant(obs, split.shares, est_p1, opts);
        } else {
          throw error("unknown --kind '" + est_kind + "'");
        }
      } else {
        if (est_kind == "progressive") {
          e = estimate_progressive_summaries(need("cv2"), need("v1"),
                                             need("delta"), opts);
        } else if (est_kind == "repeated-max-power") {
          e = estimate_repeated_mp_summaries(need("diff_t"), need("diff_c"),
                                             opts);
        } else if (est_kind == "de-ramp") {
          e = estimate_deramp_summaries(need("treated"), need("control"),
                                        opts);
        } else if (est_kind == "multi-variant") {
          if (split.labels.empty() || est_p1 <= 0.0) {
            throw error("estimate multi-variant needs --split and --p1");
          }
          std::vector<BucketSummary> variant_y1;
          for (std::size_t j = 0; j < split.labels.size(); ++j) {
            variant_y1.push_back(need(("v" + std::to_string(j + 1)).c_str()));
          }
          e = estimate_multivariant_summaries(variant_y1, split.shares, est_p1,
                                              need("cv2"), need("delta"),
                                              opts);
        } else {
          throw error("unknown --kind '" + est_kind + "'");
        }
      }
      print_estimate(e, open_out(file, est_out));
    } else if (agg->parsed()) {
      std::ifstream in(agg_file);
      if (!in) throw error("cannot open '" + agg_file + "'");
      std::vector<VoieEstimate> estimates;
      std::vector<double> weights;
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<std::string> f = detail::split_csv(line);
        if (lineno == 1 && f.size() >= 2 && f[0] == "id") continue;  // header
        if (f.size() < 3) {
          throw parse_error("aggregate input line " + std::to_string(lineno) +
                            ": want id,tau_hat,var_upper_hat[,weight]");
        }
        VoieEstimate e;
        e.tau_hat = detail::parse_num(f[1], "tau_hat");
        e.var_upper_hat = detail::parse_num(f[2], "var_upper_hat");
        estimates.push_back(e);
        if (f.size() >= 4 && !f[3].empty()) {
          weights.push_back(detail::parse_num(f[3], "weight"));
        }
      }
      AggregateEstimate a;
      if (agg_weights == "inverse") {
        a = aggregate_inverse_variance(estimates);
      } else if (agg_weights == "file") {
        if (weights.size() != estimates.size()) {
          throw error("aggregate --weights file: every record needs a weight");
        }
        a = aggregate_weighted(estimates, weights);
      } else {
        throw error("unknown --weights '" + agg_weights + "' (inverse|file)");
      }
      a.p_value = test_zero(a.delta_hat, a.var_hat, agg_df);
      if (agg_prev && agg_curr) {
        a.normalized = normalize(a.delta_hat, *agg_prev, *agg_curr);
      }
      std::ostream& out = open_out(file, agg_out);
      out.precision(12);
      out << "experiments,delta_hat,var_hat,p_value,significant,normalized\n";
      out << a.experiment_count << ',' << a.delta_hat << ',' << a.var_hat
          << ',' << a.p_value << ',' << (a.p_value < agg_alpha ? 1 : 0) << ',';
      if (a.normalized) out << *a.normalized;
      out << '\n';
      for (const std::string& w : a.warnings) std::cerr << w << '\n';
    } else if (rep->parsed()) {
      LoadResult lr = load_experiments(rep_file);
      for (const RejectedRow& r : lr.rejects) {
        std::cerr << "rejected line " << r.line << ": " << r.reason << '\n';
      }
      std::vector<ExperimentRecord> kept = filter_experiments(
          std::move(lr.records), rep_min_samples, rep_min_days, rep_max_days);
      ReportOptions opts;
      opts.alpha = rep_alpha;
      opts.baseline_prev = rep_prev;
      opts.baseline_curr = rep_curr;
      ReportTable table =
          group_and_report(kept, parse_group_key(rep_group), opts);
      write_report(table, open_out(file, rep_out));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
