#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "voie/aggregation.hpp"
#include "voie/errors.hpp"
#include "voie/estimators.hpp"

namespace voie {

inline constexpr const char* kLogSchemaVersion = "voie-log/v1";

/// Per-iteration summary of a finished experiment, as experimentation
/// platforms store it: bucket counts, means and sample variances. The
/// meaning of `treated` depends on the experiment kind (see
/// per_experiment_voie).
struct IterationSummary {
  double allocation = 0.0;
  int duration_days = 0;
  BucketSummary treated;
  BucketSummary control;
  BucketSummary delta;
};

struct MultiVariantInfo {
  std::vector<std::string> labels;
  std::vector<double> shares;
  std::string winner;
  std::vector<BucketSummary> variant_y1;
};

struct ExperimentRecord {
  std::string id;
  std::string team;
  std::string end_month;  // YYYY-MM, keyed on the LMP end date
  EstimandKind kind = EstimandKind::progressive;
  IterationSummary lu;
  std::optional<IterationSummary> lmp;
  std::optional<MultiVariantInfo> mv;
  std::vector<double> daily_effects;  // day 1, 2, ... where tracked
  std::vector<std::string> flags;
};

struct RejectedRow {
  std::size_t line = 0;
  std::string reason;
};

struct LoadResult {
  std::vector<ExperimentRecord> records;
  std::vector<RejectedRow> rejects;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_num(const std::string& s, const char* what) {
  std::size_t pos = 0;
  double v = std::stod(s, &pos);
  if (pos != s.size()) {
    throw parse_error(std::string("bad number in field ") + what + ": '" + s +
                      "'");
  }
  return v;
}

inline EstimandKind parse_kind(const std::string& s) {
  if (s == "progressive") return EstimandKind::progressive;
  if (s == "repeated-max-power") return EstimandKind::repeated_max_power;
  if (s == "de-ramp") return EstimandKind::de_ramp;
  if (s == "multi-variant") return EstimandKind::multi_variant;
  throw parse_error("unknown experiment kind '" + s + "'");
}

inline void check_iteration(const IterationSummary& it, const char* name) {
  if (it.duration_days < 1) {
    throw parse_error(std::string(name) + ": duration_days must be >= 1");
  }
  auto check_bucket = [&](const BucketSummary& b, const char* bucket) {
    if (b.count == 1) {
      throw parse_error(std::string(name) + "." + bucket +
                        ": summarized buckets need count >= 2");
    }
    if (b.count >= 2 && b.sample_variance < 0.0) {
      throw parse_error(std::string(name) + "." + bucket +
                        ": negative sample variance");
    }
  };
  check_bucket(it.treated, "treated");
  check_bucket(it.control, "control");
  check_bucket(it.delta, "delta");
}

}  // namespace detail

/// Loads a `voie-log/v1` delimited file. Malformed rows are collected into
/// the rejects report, not silently dropped.
inline LoadResult load_experiments(std::istream& in) {
  static const std::vector<std::string> kFixed = {
      "id",        "team",      "end_month", "kind",      "lu_alloc",
      "lu_days",   "lu_nt",     "lu_mt",     "lu_vt",     "lu_nc",
      "lu_mc",     "lu_vc",     "lu_ndelta", "lu_mdelta", "lu_vdelta",
      "lmp_alloc", "lmp_days",  "lmp_nt",    "lmp_mt",    "lmp_vt",
      "lmp_nc",    "lmp_mc",    "lmp_vc",    "lmp_ndelta", "lmp_mdelta",
      "lmp_vdelta"};

  std::string line;
  if (!std::getline(in, line)) {
    throw parse_error("empty input: missing schema version header");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogSchemaVersion) {
    throw parse_error("schema version mismatch: expected '" +
                      std::string(kLogSchemaVersion) + "', got '" + line + "'");
  }
  if (!std::getline(in, line)) {
    throw parse_error("missing column header row");
  }
  std::vector<std::string> header = detail::split_csv(line);
  if (header.size() < kFixed.size()) {
    throw parse_error("column header too short");
  }
  for (std::size_t k = 0; k < kFixed.size(); ++k) {
    if (header[k] != kFixed[k]) {
      throw parse_error("unexpected column '" + header[k] + "' at position " +
                        std::to_string(k) + " (expected '" + kFixed[k] + "')");
    }
  }

  // Optional trailing columns: day<k> effect series and mv_* variant data.
  std::vector<std::pair<std::size_t, int>> day_cols;  // (column, day index)
  std::optional<std::size_t> mv_split_col, mv_winner_col;
  std::map<std::string, std::array<std::optional<std::size_t>, 3>> mv_cols;
  for (std::size_t k = kFixed.size(); k < header.size(); ++k) {
    const std::string& name = header[k];
    if (name.rfind("day", 0) == 0) {
      day_cols.emplace_back(k, std::stoi(name.substr(3)));
    } else if (name == "mv_split") {
      mv_split_col = k;
    } else if (name == "mv_winner") {
      mv_winner_col = k;
    } else if (name.rfind("mv_n_", 0) == 0) {
      mv_cols[name.substr(5)][0] = k;
    } else if (name.rfind("mv_m_", 0) == 0) {
      mv_cols[name.substr(5)][1] = k;
    } else if (name.rfind("mv_v_", 0) == 0) {
      mv_cols[name.substr(5)][2] = k;
    } else {
      throw parse_error("unknown column '" + name + "'");
    }
  }
  std::sort(day_cols.begin(), day_cols.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });

  LoadResult out;
  std::size_t lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> f = detail::split_csv(line);
    try {
      if (f.size() != header.size()) {
        throw parse_error("expected " + std::to_string(header.size()) +
                          " fields, got " + std::to_string(f.size()));
      }
      ExperimentRecord r;
      r.id = f[0];
      r.team = f[1];
      r.end_month = f[2];
      r.kind = detail::parse_kind(f[3]);

      auto bucket = [&](std::size_t base) {
        BucketSummary b;
        if (!f[base].empty()) {
          b.count = static_cast<std::size_t>(
              detail::parse_num(f[base], "count"));
          b.mean = detail::parse_num(f[base + 1], "mean");
          if (b.count >= 2) {
            b.sample_variance = detail::parse_num(f[base + 2], "variance");
          }
        }
        return b;
      };

      r.lu.allocation = detail::parse_num(f[4], "lu_alloc");
      r.lu.duration_days =
          static_cast<int>(detail::parse_num(f[5], "lu_days"));
      r.lu.treated = bucket(6);
      r.lu.control = bucket(9);
      r.lu.delta = bucket(12);
      detail::check_iteration(r.lu, "lu");
      if (r.lu.allocation > 0.5) {
        throw parse_error("lu_alloc must be <= 0.5");
      }

      if (!f[15].empty()) {
        IterationSummary lmp;
        lmp.allocation = detail::parse_num(f[15], "lmp_alloc");
        lmp.duration_days =
            static_cast<int>(detail::parse_num(f[16], "lmp_days"));
        lmp.treated = bucket(17);
        lmp.control = bucket(20);
        lmp.delta = bucket(23);
        detail::check_iteration(lmp, "lmp");
        if (lmp.allocation != 0.5) {
          throw parse_error("lmp_alloc must equal 0.5");
        }
        r.lmp = lmp;
      }

      for (const auto& [col, day] : day_cols) {
        if (f[col].empty()) break;
        r.daily_effects.push_back(detail::parse_num(f[col], "day effect"));
      }

      if (mv_split_col && !f[*mv_split_col].empty()) {
        MultiVariantInfo mv;
        std::istringstream ss(f[*mv_split_col]);
        std::string part;
        while (std::getline(ss, part, ';')) {
          std::size_t eq = part.find('=');
          if (eq == std::string::npos) {
            throw parse_error("bad mv_split entry '" + part + "'");
          }
          mv.labels.push_back(part.substr(0, eq));
          mv.shares.push_back(
              detail::parse_num(part.substr(eq + 1), "mv share"));
        }
        if (mv_winner_col) mv.winner = f[*mv_winner_col];
        for (const std::string& label : mv.labels) {
          auto it = mv_cols.find(label);
          if (it == mv_cols.end() || !it->second[0] || !it->second[1] ||
              !it->second[2]) {
            throw parse_error("missing mv_n/m/v columns for variant '" +
                              label + "'");
          }
          BucketSummary b;
          b.count = static_cast<std::size_t>(
              detail::parse_num(f[*it->second[0]], "mv count"));
          b.mean = detail::parse_num(f[*it->second[1]], "mv mean");
          b.sample_variance =
              detail::parse_num(f[*it->second[2]], "mv variance");
          mv.variant_y1.push_back(b);
        }
        r.mv = std::move(mv);
      }

      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.rejects.push_back({lineno, e.what()});
    }
  }
  return out;
}

inline LoadResult load_experiments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");
  return load_experiments(in);
}

namespace detail {

inline std::size_t iteration_samples(const IterationSummary& it) {
  return it.treated.count + it.control.count + it.delta.count;
}

}  // namespace detail

/// Eligibility filter: both iterations must carry at least `min_samples`
/// units and run at least `min_days` days. Iterations exceeding
/// `max_days_used` are flagged, not recomputed; truncation to the first
/// `max_days_used` days happens upstream where per-day data exists.
inline std::vector<ExperimentRecord> filter_experiments(
    std::vector<ExperimentRecord> records, std::size_t min_samples = 10000,
    int min_days = 3, int max_days_used = 14) {
  std::vector<ExperimentRecord> out;
  for (ExperimentRecord& r : records) {
    bool keep = detail::iteration_samples(r.lu) >= min_samples &&
                r.lu.duration_days >= min_days;
    if (r.lmp) {
      keep = keep && detail::iteration_samples(*r.lmp) >= min_samples &&
             r.lmp->duration_days >= min_days;
    }
    if (!keep) continue;
    if (r.lu.duration_days > max_days_used ||
        (r.lmp && r.lmp->duration_days > max_days_used)) {
      r.flags.push_back("exceeds_max_days");
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Per-experiment VOIE, dispatching on the record's kind hint. The LU
/// iteration supplies the first-iteration terms, the LMP the second-iteration
/// terms:
///   progressive:        lmp.treated = (c,v2) outcomes, lu.treated = v1
///                       outcomes, lmp.delta = (c,c) drift.
///   repeated-max-power: lmp.treated and lmp.delta are difference buckets.
///   de-ramp:            lu.treated vs lu.control first-iteration outcomes.
///   multi-variant:      mv variant buckets for the mixture term.
inline VoieEstimate per_experiment_voie(const ExperimentRecord& r,
                                        const EstimateOptions& opts = {}) {
  switch (r.kind) {
    case EstimandKind::progressive:
    case EstimandKind::collapsed:
      if (!r.lmp) {
        throw error("record " + r.id + ": progressive kind requires an LMP "
                    "iteration");
      }
      if (r.lmp->delta.count == 0) {
        throw error("record " + r.id + ": progressive kind requires the (c,c) "
                    "delta summary");
      }
      return estimate_progressive_summaries(r.lmp->treated, r.lu.treated,
                                            r.lmp->delta, opts);
    case EstimandKind::repeated_max_power:
      if (!r.lmp) {
        throw error("record " + r.id + ": repeated-max-power kind requires an "
                    "LMP iteration");
      }
      return estimate_repeated_mp_summaries(r.lmp->treated, r.lmp->delta,
                                            opts);
    case EstimandKind::de_ramp:
      return estimate_deramp_summaries(r.lu.treated, r.lu.control, opts);
    case EstimandKind::multi_variant: {
      if (!r.mv) {
        throw error("record " + r.id + ": multi-variant kind requires mv "
                    "columns");
      }
      if (!r.lmp) {
        throw error("record " + r.id + ": multi-variant kind requires an LMP "
                    "iteration");
      }
      return estimate_multivariant_summaries(r.mv->variant_y1, r.mv->shares,
                                             r.lu.allocation, r.lmp->treated,
                                             r.lmp->delta, opts);
    }
  }
  throw error("record " + r.id + ": unknown kind");
}

enum class GroupKey { month, allocation, team };

inline GroupKey parse_group_key(const std::string& s) {
  if (s == "month") return GroupKey::month;
  if (s == "allocation") return GroupKey::allocation;
  if (s == "team") return GroupKey::team;
  throw error("unknown grouping key '" + s + "' (month|allocation|team)");
}

/// Default allocation bands, matching common ramp presets.
inline const std::vector<std::pair<double, std::string>>& allocation_bands() {
  static const std::vector<std::pair<double, std::string>> bands = {
      {0.01, "1%"}, {0.05, "5%"}, {0.10, "10%"}, {0.25, "25%"}, {0.50, "50%"}};
  return bands;
}

inline std::string allocation_band(double alloc) {
  const auto& bands = allocation_bands();
  std::size_t best = 0;
  double best_d = std::abs(alloc - bands[0].first);
  for (std::size_t k = 1; k < bands.size(); ++k) {
    double d = std::abs(alloc - bands[k].first);
    if (d < best_d) {
      best = k;
      best_d = d;
    }
  }
  return bands[best].second;
}

struct ReportRow {
  std::string group;
  std::size_t count = 0;
  std::optional<AggregateEstimate> aggregate;
  bool significant_05 = false;
  bool significant_01 = false;
};

struct ReportTable {
  GroupKey key = GroupKey::month;
  std::vector<ReportRow> rows;
};

struct ReportOptions {
  double alpha = 0.05;
  std::optional<double> baseline_prev;
  std::optional<double> baseline_curr;
};

/// Groups the corpus, aggregates each group with inverse-variance weights and
/// flags significance at 0.05 / 0.01. For the allocation key, all preset
/// bands are emitted; empty groups carry a null aggregate.
inline ReportTable group_and_report(const std::vector<ExperimentRecord>& records,
                                    GroupKey key,
                                    const ReportOptions& opts = {}) {
  if (records.empty()) throw error("group_and_report: empty corpus");

  auto group_of = [&](const ExperimentRecord& r) -> std::string {
    switch (key) {
      case GroupKey::month: return r.end_month;
      case GroupKey::allocation: return allocation_band(r.lu.allocation);
      case GroupKey::team: return r.team.empty() ? "(none)" : r.team;
    }
    return "?";
  };

  std::map<std::string, std::vector<VoieEstimate>> groups;
  if (key == GroupKey::allocation) {
    for (const auto& [alloc, label] : allocation_bands()) groups[label];
  }
  EstimateOptions est_opts;
  est_opts.alpha = opts.alpha;
  for (const ExperimentRecord& r : records) {
    groups[group_of(r)].push_back(per_experiment_voie(r, est_opts));
  }

  ReportTable table;
  table.key = key;
  for (auto& [group, ests] : groups) {
    ReportRow row;
    row.group = group;
    row.count = ests.size();
    if (!ests.empty()) {
      AggregateEstimate a = aggregate_inverse_variance(ests);
      if (opts.baseline_prev && opts.baseline_curr) {
        a.normalized =
            normalize(a.delta_hat, *opts.baseline_prev, *opts.baseline_curr);
      }
      row.significant_05 = a.p_value < 0.05;
      row.significant_01 = a.p_value < 0.01;
      row.aggregate = std::move(a);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// Plot-ready delimited dump of a report table.
inline void write_report(const ReportTable& table, std::ostream& out) {
  out << "group,count,delta_hat,var_hat,p_value,sig_05,sig_01,normalized\n";
  out.precision(12);
  for (const ReportRow& r : table.rows) {
    out << r.group << ',' << r.count << ',';
    if (r.aggregate) {
      out << r.aggregate->delta_hat << ',' << r.aggregate->var_hat << ','
          << r.aggregate->p_value << ',' << (r.significant_05 ? 1 : 0) << ','
          << (r.significant_01 ? 1 : 0) << ',';
      if (r.aggregate->normalized) out << *r.aggregate->normalized;
    } else {
      out << ",,,,,";
    }
    out << '\n';
  }
}

struct DailyQuantileRow {
  int day = 0;
  std::size_t count = 0;
  std::vector<double> quantiles;  // aligned with the requested levels
};

/// Empirical quantile with linear interpolation between order statistics.
inline double quantile_linear(std::vector<double> xs, double q) {
  if (xs.empty()) throw error("quantile of empty sample");
  std::sort(xs.begin(), xs.end());
  double h = q * static_cast<double>(xs.size() - 1);
  std::size_t lo = static_cast<std::size_t>(std::floor(h));
  std::size_t hi = std::min(lo + 1, xs.size() - 1);
  double frac = h - std::floor(h);
  return xs[lo] + frac * (xs[hi] - xs[lo]);
}

/// Cross-experiment quantiles of the day-T estimated effects, for each day in
/// [day_from, day_to] possessed by at least one record.
inline std::vector<DailyQuantileRow> daily_effect_quantiles(
    const std::vector<ExperimentRecord>& records, int day_from, int day_to,
    const std::vector<double>& q_levels = {0.025, 0.975}) {
  for (double q : q_levels) {
    if (!(q > 0.0 && q < 1.0)) {
      throw error("daily_effect_quantiles: quantile levels must lie in (0,1)");
    }
  }
  bool any_series = false;
  for (const auto& r : records) any_series |= !r.daily_effects.empty();
  if (!any_series) {
    throw error("daily_effect_quantiles: no record carries per-day effects");
  }

  std::vector<DailyQuantileRow> out;
  for (int day = day_from; day <= day_to; ++day) {
    std::vector<double> effects;
    for (const auto& r : records) {
      if (static_cast<int>(r.daily_effects.size()) >= day) {
        effects.push_back(r.daily_effects[static_cast<std::size_t>(day - 1)]);
      }
    }
    if (effects.empty()) continue;
    DailyQuantileRow row;
    row.day = day;
    row.count = effects.size();
    for (double q : q_levels) row.quantiles.push_back(quantile_linear(effects, q));
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace voie
