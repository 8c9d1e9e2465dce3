#pragma once

#include <span>

namespace orthosep {

/// Mann-Whitney U statistic for a against b, counting ties as 1/2.
double mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Two-sided exact p-value by enumerating every assignment of the pooled
/// sample: the fraction of assignments whose U lies at least as far from
/// nm/2 as the observed U. Feasible only for small samples.
double rank_sum_exact(std::span<const double> a, std::span<const double> b);

/// Two-sided normal approximation with tie correction and continuity
/// correction. Throws NumericError when every pooled value is tied.
double rank_sum_normal_approx(std::span<const double> a, std::span<const double> b);

/// Dispatcher: exact enumeration when min(n, m) <= 8 and the split count is
/// small enough to enumerate, the normal approximation otherwise.
double rank_sum_test(std::span<const double> a, std::span<const double> b);

}  // namespace orthosep
