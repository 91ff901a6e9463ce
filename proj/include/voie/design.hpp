#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "voie/errors.hpp"

namespace voie {

/// Treatment path of a single unit across the two iterations.
///
/// `treated` means (v, v2): exposed to a first-iteration variant and kept in
/// the treatment group. `reverted` means (v, c): treated first, then reverted
/// (the de-ramp branch). `variant` indexes the first-iteration variant; 0 in
/// the single-variant case.
enum class PathKind : std::uint8_t {
  control_control,  // (c, c)
  control_treated,  // (c, v2)
  treated,          // (v, v2)
  reverted,         // (v, c)
};

struct UnitPath {
  PathKind kind = PathKind::control_control;
  std::int16_t variant = 0;

  bool treated_first() const {
    return kind == PathKind::treated || kind == PathKind::reverted;
  }
  friend bool operator==(const UnitPath&, const UnitPath&) = default;
};

enum class DesignKind { progressive, repeated_max_power };

/// Per-variant first-iteration shares; shares sum to p1.
struct VariantSplit {
  std::vector<std::string> labels;
  std::vector<double> shares;

  double total() const {
    return std::accumulate(shares.begin(), shares.end(), 0.0);
  }
};

struct Design {
  std::size_t n = 0;
  double p1 = 0.0;
  double p2 = 0.5;
  DesignKind kind = DesignKind::progressive;
  std::optional<VariantSplit> split;

  // Second-iteration group sized as (1-p1)*p2*n instead of p2*n - p1*n.
  bool complement_sizes = false;
  // Permit progressive designs with p2 != 0.5; flagged on the assignment.
  bool allow_p2_override = false;
};

struct Assignment {
  std::vector<UnitPath> paths;
  std::size_t n_first_treated = 0;   // N_{v1} (or N_{v1,v2} for repeated MP)
  std::size_t n_newly_treated = 0;   // N_{c,v2}
  std::size_t n_never_treated = 0;   // N_{c,c}
  bool truncated_after_first = false;  // de-ramp: no second iteration observed
  bool unbalanced = false;  // rounding produced unequal repeated-MP halves
  std::vector<std::string> flags;

  std::size_t size() const { return paths.size(); }
};

namespace detail {

inline std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for Monte Carlo rep `counter`; independent of worker scheduling.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  return splitmix64(seed ^ splitmix64(counter));
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t k) {
  // Lemire's multiply-shift; bias is negligible for the k in play here.
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * k) >> 64);
}

inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

/// C(n, k), saturating to UINT64_MAX on overflow.
inline std::uint64_t binomial_checked(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > static_cast<unsigned __int128>(UINT64_MAX)) return UINT64_MAX;
  }
  return static_cast<std::uint64_t>(acc);
}

}  // namespace detail

/// Integer bucket targets implied by a design, under round-half-up with the
/// control bucket absorbing the residual.
struct BucketTargets {
  std::size_t n_first_treated = 0;
  std::size_t n_newly_treated = 0;
  std::size_t n_never_treated = 0;
  bool unbalanced = false;
};

inline BucketTargets bucket_targets(const Design& d) {
  if (d.n < 2) throw invalid_design_error("design: n must be >= 2");
  if (!(d.p1 > 0.0 && d.p1 <= 1.0) || !(d.p2 > 0.0 && d.p2 <= 1.0)) {
    throw invalid_design_error("design: ramp fractions must lie in (0, 1]");
  }
  BucketTargets t;
  double dn = static_cast<double>(d.n);
  if (d.kind == DesignKind::repeated_max_power) {
    if (d.p1 != d.p2 || d.p1 != 0.5) {
      throw invalid_design_error(
          "repeated-max-power design requires p1 = p2 = 0.5");
    }
    t.n_first_treated = detail::round_half_up(0.5 * dn);
    t.n_never_treated = d.n - t.n_first_treated;
    t.unbalanced = (t.n_first_treated != t.n_never_treated);
  } else {
    if (!(d.p1 < d.p2)) {
      throw invalid_design_error("progressive design requires p1 < p2");
    }
    if (d.p2 != 0.5 && !d.allow_p2_override) {
      throw invalid_design_error(
          "progressive design expects p2 = 0.5 (set allow_p2_override to "
          "deviate)");
    }
    t.n_first_treated = detail::round_half_up(d.p1 * dn);
    std::size_t total =
        d.complement_sizes
            ? t.n_first_treated +
                  detail::round_half_up((1.0 - d.p1) * d.p2 * dn)
            : detail::round_half_up(d.p2 * dn);
    if (total > d.n || total < t.n_first_treated) {
      throw invalid_design_error("design: bucket targets exceed n");
    }
    t.n_newly_treated = total - t.n_first_treated;
    t.n_never_treated = d.n - total;
    if (t.n_first_treated < 1 || t.n_newly_treated < 1 ||
        t.n_never_treated < 1) {
      throw invalid_design_error("design: every bucket must hold >= 1 unit");
    }
  }
  if (t.n_first_treated < 1 || t.n_never_treated < 1) {
    throw invalid_design_error("design: every bucket must hold >= 1 unit");
  }
  return t;
}

/// Largest-remainder apportionment of `total` slots by `shares`.
inline std::vector<std::size_t> apportion(const std::vector<double>& shares,
                                          std::size_t total) {
  double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  std::vector<std::size_t> out(shares.size());
  std::vector<std::pair<double, std::size_t>> rem(shares.size());
  std::size_t used = 0;
  for (std::size_t j = 0; j < shares.size(); ++j) {
    double exact = shares[j] / sum * static_cast<double>(total);
    out[j] = static_cast<std::size_t>(std::floor(exact));
    rem[j] = {exact - std::floor(exact), j};
    used += out[j];
  }
  std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::size_t k = 0; used < total; ++k, ++used) out[rem[k].second] += 1;
  return out;
}

namespace detail {

inline Assignment from_buckets(std::size_t n,
                               const std::vector<std::size_t>& order,
                               const std::vector<std::size_t>& variant_sizes,
                               std::size_t n_newly, bool unbalanced) {
  Assignment a;
  a.paths.assign(n, UnitPath{PathKind::control_control, 0});
  std::size_t pos = 0;
  for (std::size_t j = 0; j < variant_sizes.size(); ++j) {
    for (std::size_t k = 0; k < variant_sizes[j]; ++k, ++pos) {
      a.paths[order[pos]] = {PathKind::treated, static_cast<std::int16_t>(j)};
    }
  }
  a.n_first_treated = pos;
  for (std::size_t k = 0; k < n_newly; ++k, ++pos) {
    a.paths[order[pos]] = {PathKind::control_treated, 0};
  }
  a.n_newly_treated = n_newly;
  a.n_never_treated = n - pos;
  a.unbalanced = unbalanced;
  if (unbalanced) a.flags.push_back("unbalanced");
  return a;
}

}  // namespace detail

/// Completely randomized two-step assignment for a progressive design.
inline Assignment assign_progressive(const Design& d, std::uint64_t seed) {
  if (d.kind != DesignKind::progressive) {
    throw invalid_design_error("assign_progressive requires a progressive design");
  }
  BucketTargets t = bucket_targets(d);
  auto order = detail::shuffled_indices(d.n, seed);
  Assignment a = detail::from_buckets(d.n, order, {t.n_first_treated},
                                      t.n_newly_treated, t.unbalanced);
  if (d.p2 != 0.5) a.flags.push_back("nonstandard_p2");
  return a;
}

/// Even-split assignment held across both iterations.
inline Assignment assign_repeated_mp(const Design& d, std::uint64_t seed) {
  if (d.kind != DesignKind::repeated_max_power) {
    throw invalid_design_error(
        "assign_repeated_mp requires a repeated-max-power design");
  }
  BucketTargets t = bucket_targets(d);
  auto order = detail::shuffled_indices(d.n, seed);
  return detail::from_buckets(d.n, order, {t.n_first_treated}, 0, t.unbalanced);
}

/// First iteration split across variants (largest-remainder sizes), second
/// iteration ramped as in the progressive design.
inline Assignment assign_multivariant(const Design& d, std::uint64_t seed) {
  if (!d.split) {
    throw invalid_design_error("assign_multivariant requires a variant split");
  }
  const VariantSplit& s = *d.split;
  if (std::abs(s.total() - d.p1) > 1e-9) {
    throw share_sum_error("variant shares must sum to p1");
  }
  BucketTargets t = bucket_targets(d);
  std::vector<std::size_t> sizes = apportion(s.shares, t.n_first_treated);
  for (std::size_t j = 0; j < sizes.size(); ++j) {
    if (sizes[j] == 0) {
      throw invalid_design_error("variant group '" + s.labels[j] +
                                 "' resolves to zero units");
    }
  }
  auto order = detail::shuffled_indices(d.n, seed);
  return detail::from_buckets(d.n, order, sizes, t.n_newly_treated,
                              t.unbalanced);
}

/// De-ramp assignment: progressive first iteration, then every treated unit
/// reverts and the experiment stops.
inline Assignment assign_deramp(const Design& d, std::uint64_t seed) {
  BucketTargets t = bucket_targets(d);
  auto order = detail::shuffled_indices(d.n, seed);
  Assignment a;
  a.paths.assign(d.n, UnitPath{PathKind::control_control, 0});
  for (std::size_t k = 0; k < t.n_first_treated; ++k) {
    a.paths[order[k]] = {PathKind::reverted, 0};
  }
  a.n_first_treated = t.n_first_treated;
  a.n_never_treated = d.n - t.n_first_treated;
  a.truncated_after_first = true;
  a.unbalanced = t.unbalanced;
  return a;
}

/// Number of admissible assignments; UINT64_MAX on overflow.
inline std::uint64_t assignment_count(const Design& d) {
  BucketTargets t = bucket_targets(d);
  std::uint64_t c1 = detail::binomial_checked(d.n, t.n_first_treated);
  if (d.kind == DesignKind::repeated_max_power) return c1;
  std::uint64_t c2 =
      detail::binomial_checked(d.n - t.n_first_treated, t.n_newly_treated);
  if (c1 == UINT64_MAX || c2 == UINT64_MAX) return UINT64_MAX;
  unsigned __int128 prod = static_cast<unsigned __int128>(c1) * c2;
  if (prod > static_cast<unsigned __int128>(UINT64_MAX)) return UINT64_MAX;
  return static_cast<std::uint64_t>(prod);
}

/// Every admissible assignment, exactly once.
inline std::vector<Assignment> enumerate_assignments(
    const Design& d, std::uint64_t cap = 1'000'000) {
  BucketTargets t = bucket_targets(d);
  std::uint64_t count = assignment_count(d);
  if (count > cap) {
    throw cap_exceeded_error("enumeration would produce " +
                             (count == UINT64_MAX ? std::string("> 2^64")
                                                  : std::to_string(count)) +
                             " assignments, above the cap of " +
                             std::to_string(cap));
  }

  std::vector<Assignment> out;
  out.reserve(static_cast<std::size_t>(count));

  auto first_combo = [](std::size_t k) {
    std::vector<std::size_t> c(k);
    std::iota(c.begin(), c.end(), std::size_t{0});
    return c;
  };
  auto next_combo = [](std::vector<std::size_t>& c, std::size_t n) {
    std::size_t k = c.size();
    for (std::size_t i = k; i-- > 0;) {
      if (c[i] < n - k + i) {
        ++c[i];
        for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
        return true;
      }
    }
    return false;
  };

  std::vector<std::size_t> treated = first_combo(t.n_first_treated);
  do {
    std::vector<char> taken(d.n, 0);
    for (std::size_t i : treated) taken[i] = 1;
    std::vector<std::size_t> rest;
    rest.reserve(d.n - t.n_first_treated);
    for (std::size_t i = 0; i < d.n; ++i) {
      if (!taken[i]) rest.push_back(i);
    }

    if (d.kind == DesignKind::repeated_max_power) {
      Assignment a;
      a.paths.assign(d.n, UnitPath{PathKind::control_control, 0});
      for (std::size_t i : treated) a.paths[i] = {PathKind::treated, 0};
      a.n_first_treated = t.n_first_treated;
      a.n_never_treated = d.n - t.n_first_treated;
      a.unbalanced = t.unbalanced;
      out.push_back(std::move(a));
    } else {
      std::vector<std::size_t> newly = first_combo(t.n_newly_treated);
      do {
        Assignment a;
        a.paths.assign(d.n, UnitPath{PathKind::control_control, 0});
        for (std::size_t i : treated) a.paths[i] = {PathKind::treated, 0};
        for (std::size_t j : newly) {
          a.paths[rest[j]] = {PathKind::control_treated, 0};
        }
        a.n_first_treated = t.n_first_treated;
        a.n_newly_treated = t.n_newly_treated;
        a.n_never_treated = t.n_never_treated;
        a.unbalanced = t.unbalanced;
        out.push_back(std::move(a));
      } while (next_combo(newly, rest.size()));
    }
  } while (next_combo(treated, d.n));

  return out;
}

}  // namespace voie
