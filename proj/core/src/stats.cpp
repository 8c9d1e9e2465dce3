#include "orthosep/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "orthosep/errors.hpp"

namespace orthosep {
namespace {

// U doubled so ties stay integral.
std::int64_t u2_statistic(std::span<const double> a, std::span<const double> b) {
  std::int64_t u2 = 0;
  for (double x : a) {
    for (double y : b) {
      if (x > y) {
        u2 += 2;
      } else if (x == y) {
        u2 += 1;
      }
    }
  }
  return u2;
}

double binom(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  k = std::min(k, n - k);
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    r *= static_cast<double>(n - k + i) / static_cast<double>(i);
  }
  return r;
}

}  // namespace

double mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ConfigError("mann_whitney_u: empty sample");
  return 0.5 * static_cast<double>(u2_statistic(a, b));
}

double rank_sum_exact(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) throw ConfigError("rank_sum_exact: empty sample");
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const std::size_t total = n + m;
  const std::size_t k = std::min(n, m);
  // U for the smaller sample mirrors: |U_a - nm/2| == |U_b - nm/2|.
  const bool a_is_small = n <= m;

  const std::int64_t mu2 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(m);
  const std::int64_t observed2 = a_is_small ? u2_statistic(a, b) : u2_statistic(b, a);
  const std::int64_t dev = std::llabs(observed2 - mu2);

  // Walk every size-k index subset of the pooled sample.
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  std::vector<char> in_subset(total, 0);
  std::uint64_t extreme = 0, count = 0;
  while (true) {
    std::fill(in_subset.begin(), in_subset.end(), 0);
    for (std::size_t i : idx) in_subset[i] = 1;
    std::int64_t u2 = 0;
    for (std::size_t i = 0; i < total; ++i) {
      if (!in_subset[i]) continue;
      for (std::size_t j = 0; j < total; ++j) {
        if (in_subset[j]) continue;
        if (pooled[i] > pooled[j]) {
          u2 += 2;
        } else if (pooled[i] == pooled[j]) {
          u2 += 1;
        }
      }
    }
    if (std::llabs(u2 - mu2) >= dev) ++extreme;
    ++count;

    // Next combination.
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (idx[pos] != pos + total - k) {
        ++idx[pos];
        for (std::size_t q = pos + 1; q < k; ++q) idx[q] = idx[q - 1] + 1;
        pos = k + 1;
        break;
      }
    }
    if (pos != k + 1) break;
  }
  return static_cast<double>(extreme) / static_cast<double>(count);
}

double rank_sum_normal_approx(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0 || m == 0) throw ConfigError("rank_sum_normal_approx: empty sample");
  const double u = mann_whitney_u(a, b);
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  const double total = nn + mm;
  const double mu = 0.5 * nn * mm;

  // Tie correction over the pooled sample.
  std::map<double, std::size_t> groups;
  for (double x : a) ++groups[x];
  for (double x : b) ++groups[x];
  double tie_sum = 0.0;
  for (const auto& [value, t] : groups) {
    const double td = static_cast<double>(t);
    tie_sum += td * td * td - td;
  }
  const double var =
      nn * mm / 12.0 * (total + 1.0 - tie_sum / (total * (total - 1.0)));
  if (!(var > 0.0)) {
    throw NumericError("rank_sum_normal_approx: degenerate all-tied samples");
  }
  const double z = std::max(0.0, std::abs(u - mu) - 0.5) / std::sqrt(var);
  const double p = std::erfc(z / std::sqrt(2.0));
  return std::min(1.0, p);
}

double rank_sum_test(std::span<const double> a, std::span<const double> b) {
  const std::size_t k = std::min(a.size(), b.size());
  if (k == 0) throw ConfigError("rank_sum_test: empty sample");
  if (k <= 8 && binom(a.size() + b.size(), k) <= 5e6) {
    return rank_sum_exact(a, b);
  }
  return rank_sum_normal_approx(a, b);
}

}  // namespace orthosep
