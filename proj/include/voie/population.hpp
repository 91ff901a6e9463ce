#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "voie/design.hpp"
#include "voie/errors.hpp"

namespace voie {

using Column = std::vector<double>;

/// Fixed finite population: every unit's outcome under every treatment path,
/// both iterations. Immutable ground truth for simulation and oracles.
///
/// Iteration-1 columns: control, one column per variant, and the oracle
/// column for the improved version v2 (never observable in a real experiment
/// but required for verification). Iteration-2 columns are indexed by the
/// full path; the de-ramp branch (v1, c) and the never-realized (c, v1)
/// branch are optional.
struct PotentialOutcomeTable {
  Column y1_c;
  std::vector<std::string> variant_labels{"v1"};
  std::vector<Column> y1_variant;  // one column per label
  std::optional<Column> y1_v2;

  Column y2_cc;
  std::optional<Column> y2_cv2;
  std::optional<Column> y2_v1v2;
  std::optional<Column> y2_v1c;
  std::optional<Column> y2_cv1;

  std::size_t size() const { return y1_c.size(); }

  const Column& y1_of_variant(std::size_t j) const {
    if (j >= y1_variant.size()) {
      throw missing_column_error("unknown variant index " + std::to_string(j));
    }
    return y1_variant[j];
  }

  std::size_t variant_index(const std::string& label) const {
    for (std::size_t j = 0; j < variant_labels.size(); ++j) {
      if (variant_labels[j] == label) return j;
    }
    throw missing_column_error("unknown variant label '" + label + "'");
  }

  /// Control-path drift Delta_i = Y2(c,c) - Y1(c).
  double delta(std::size_t i) const { return y2_cc[i] - y1_c[i]; }

  void validate() const {
    std::size_t n = size();
    if (n < 2) throw error("table: population size must be >= 2");
    if (variant_labels.size() != y1_variant.size() || y1_variant.empty()) {
      throw error("table: variant labels and columns mismatch");
    }
    auto check = [n](const Column& col, const char* name) {
      if (col.size() != n) {
        throw error(std::string("table: column ") + name +
                    " has inconsistent length");
      }
      for (double v : col) {
        if (!std::isfinite(v)) {
          throw error(std::string("table: non-finite outcome in column ") +
                      name);
        }
      }
    };
    check(y1_c, "y1_c");
    check(y2_cc, "y2_cc");
    for (const auto& col : y1_variant) check(col, "y1_variant");
    if (y1_v2) check(*y1_v2, "y1_v2");
    if (y2_cv2) check(*y2_cv2, "y2_cv2");
    if (y2_v1v2) check(*y2_v1v2, "y2_v1v2");
    if (y2_v1c) check(*y2_v1c, "y2_v1c");
    if (y2_cv1) check(*y2_cv1, "y2_cv1");
  }
};

/// Realized data under an assignment. y2_obs entries are absent for units
/// whose experiment was truncated after the first iteration (de-ramp).
struct ObservedData {
  std::vector<UnitPath> paths;
  std::vector<double> y1_obs;
  std::vector<std::optional<double>> y2_obs;

  std::size_t size() const { return paths.size(); }

  /// Realized Delta_i, defined exactly for path-(c,c) units.
  std::optional<double> delta(std::size_t i) const {
    if (paths[i].kind != PathKind::control_control || !y2_obs[i]) {
      return std::nullopt;
    }
    return *y2_obs[i] - y1_obs[i];
  }
};

/// Reads observed outcomes off the table at the assigned paths.
inline ObservedData observe(const PotentialOutcomeTable& table,
                            const Assignment& assignment) {
  std::size_t n = table.size();
  if (assignment.size() != n) {
    throw error("observe: assignment and table sizes differ");
  }
  ObservedData obs;
  obs.paths = assignment.paths;
  obs.y1_obs.resize(n);
  obs.y2_obs.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const UnitPath& p = assignment.paths[i];
    if (p.treated_first()) {
      obs.y1_obs[i] = table.y1_of_variant(static_cast<std::size_t>(p.variant))[i];
    } else {
      obs.y1_obs[i] = table.y1_c[i];
    }
    if (assignment.truncated_after_first) continue;
    switch (p.kind) {
      case PathKind::control_control:
        obs.y2_obs[i] = table.y2_cc[i];
        break;
      case PathKind::control_treated:
        if (!table.y2_cv2) {
          throw missing_path_error("observe: table lacks the (c, v2) outcome");
        }
        obs.y2_obs[i] = (*table.y2_cv2)[i];
        break;
      case PathKind::treated:
        if (!table.y2_v1v2) {
          throw missing_path_error("observe: table lacks the (v1, v2) outcome");
        }
        obs.y2_obs[i] = (*table.y2_v1v2)[i];
        break;
      case PathKind::reverted:
        if (!table.y2_v1c) {
          throw missing_path_error(
              "observe: de-ramp branch (v1, c) requested but absent from the "
              "table");
        }
        obs.y2_obs[i] = (*table.y2_v1c)[i];
        break;
    }
  }
  return obs;
}

/// Exact population-average VOIE: mean of Y1(v2) - Y1(v1).
inline double true_voie(const PotentialOutcomeTable& table) {
  if (!table.y1_v2) {
    throw missing_column_error("true_voie: table lacks the Y1(v2) column");
  }
  const Column& v1 = table.y1_of_variant(0);
  double sum = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    sum += (*table.y1_v2)[i] - v1[i];
  }
  return sum / static_cast<double>(table.size());
}

/// Per-unit VOIE values tau_{i,1}.
inline Column per_unit_voie(const PotentialOutcomeTable& table) {
  if (!table.y1_v2) {
    throw missing_column_error("per_unit_voie: table lacks the Y1(v2) column");
  }
  const Column& v1 = table.y1_of_variant(0);
  Column out(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    out[i] = (*table.y1_v2)[i] - v1[i];
  }
  return out;
}

/// Prevented-loss estimand for de-ramped experiments:
/// -mean(Y1(v1) - Y1(c)).
inline double true_voie_deramp(const PotentialOutcomeTable& table) {
  const Column& v1 = table.y1_of_variant(0);
  double sum = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    sum += v1[i] - table.y1_c[i];
  }
  return -sum / static_cast<double>(table.size());
}

/// Multi-variant estimand: mean of Y1(v2) minus the share-weighted mixture of
/// the variant columns. When the winner was launched unimproved, Y1(v2) is
/// the winner's own column.
inline double true_voie_multivariant(const PotentialOutcomeTable& table,
                                     const VariantSplit& split, double p1,
                                     const std::string& winner) {
  if (split.shares.size() != split.labels.size() || split.shares.empty()) {
    throw share_sum_error("true_voie_multivariant: malformed split");
  }
  if (std::abs(split.total() - p1) > 1e-9) {
    throw share_sum_error("variant shares must sum to p1");
  }
  std::size_t w = table.variant_index(winner);
  const Column& improved = table.y1_v2 ? *table.y1_v2 : table.y1_of_variant(w);

  double sum = 0.0;
  std::size_t n = table.size();
  for (std::size_t i = 0; i < n; ++i) {
    double mixture = 0.0;
    for (std::size_t j = 0; j < split.shares.size(); ++j) {
      std::size_t idx = table.variant_index(split.labels[j]);
      mixture += split.shares[j] / p1 * table.y1_of_variant(idx)[i];
    }
    sum += improved[i] - mixture;
  }
  return sum / static_cast<double>(n);
}

/// Result of an identifiability-assumption check: max residual plus the full
/// per-unit diagnostics, so the caller owns the tolerance decision.
struct AssumptionCheck {
  bool holds = true;
  bool skipped = false;
  std::string note;
  double max_abs_residual = 0.0;
  std::vector<std::pair<std::string, Column>> residuals;  // per checked branch
};

inline constexpr double kDefaultAssumptionTol = 1e-9;

/// Time-invariant control effect: Y2(c,v) - Y2(c,c) = Y1(v) - Y1(c).
/// The v1 branch is checked only when the optional (c,v1) column is stored.
inline AssumptionCheck check_time_invariance(
    const PotentialOutcomeTable& table, double tol = kDefaultAssumptionTol) {
  AssumptionCheck out;
  std::size_t n = table.size();
  auto add_branch = [&](const std::string& name, const Column& y2_cv,
                        const Column& y1_v) {
    Column res(n);
    for (std::size_t i = 0; i < n; ++i) {
      res[i] = (y2_cv[i] - table.y2_cc[i]) - (y1_v[i] - table.y1_c[i]);
      out.max_abs_residual = std::max(out.max_abs_residual, std::abs(res[i]));
    }
    out.residuals.emplace_back(name, std::move(res));
  };
  if (table.y2_cv2 && table.y1_v2) {
    add_branch("v2", *table.y2_cv2, *table.y1_v2);
  }
  if (table.y2_cv1) {
    add_branch("v1", *table.y2_cv1, table.y1_of_variant(0));
  }
  if (out.residuals.empty()) {
    out.skipped = true;
    out.note = "no branch checkable: required columns absent";
    return out;
  }
  out.holds = out.max_abs_residual <= tol;
  return out;
}

/// No carryover: Y2(c,v) = Y2(v1,v).
inline AssumptionCheck check_no_carryover(
    const PotentialOutcomeTable& table, double tol = kDefaultAssumptionTol) {
  AssumptionCheck out;
  std::size_t n = table.size();
  auto add_branch = [&](const std::string& name, const Column& cv,
                        const Column& v1v) {
    Column res(n);
    for (std::size_t i = 0; i < n; ++i) {
      res[i] = cv[i] - v1v[i];
      out.max_abs_residual = std::max(out.max_abs_residual, std::abs(res[i]));
    }
    out.residuals.emplace_back(name, std::move(res));
  };
  if (table.y2_cv2 && table.y2_v1v2) {
    add_branch("v2", *table.y2_cv2, *table.y2_v1v2);
  }
  if (out.residuals.empty()) {
    out.skipped = true;
    out.note = "no branch checkable: (c,v2) or (v1,v2) column absent";
    return out;
  }
  out.holds = out.max_abs_residual <= tol;
  return out;
}

}  // namespace voie
