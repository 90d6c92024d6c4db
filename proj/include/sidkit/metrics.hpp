#pragma once
// Evaluation statistics: tie-aware ROC AUC, paired sign tests, and the
// log-log slope fit used to check the popularity distribution.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace sidkit {

// Rank-based Mann-Whitney AUC with average ranks for tied scores. Returns
// nothing when only one class is present; 0.5 would overstate what the data
// can support.
inline std::optional<double> roc_auc(std::span<const double> scores,
                                     std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("roc_auc: size mismatch");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (auto y : labels) n_pos += y ? 1 : 0;
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * (double(i + 1) + double(j));  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]]) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double u = rank_sum_pos - 0.5 * double(n_pos) * double(n_pos + 1);
  return u / (double(n_pos) * double(n_neg));
}

namespace detail {

inline double binomial_tail_at_least(unsigned n, unsigned k) {
  // P(X >= k) for X ~ Binomial(n, 1/2), exact in double for small n.
  if (k > n) return 0.0;
  double coeff = 1.0;  // C(n, 0)
  double sum = 0.0;
  for (unsigned i = 0; i <= n; ++i) {
    if (i >= k) sum += coeff;
    coeff = coeff * double(n - i) / double(i + 1);
  }
  return sum * std::pow(0.5, double(n));
}

}  // namespace detail

// Sign test over paired deltas; zeros are dropped. One-sided alternative:
// the median delta is positive.
inline double sign_test_one_sided(std::span<const double> deltas) {
  unsigned wins = 0, losses = 0;
  for (double d : deltas) {
    if (d > 0.0) ++wins;
    else if (d < 0.0) ++losses;
  }
  const unsigned n = wins + losses;
  if (n == 0) return 1.0;
  return detail::binomial_tail_at_least(n, wins);
}

inline double sign_test_two_sided(std::span<const double> deltas) {
  unsigned wins = 0, losses = 0;
  for (double d : deltas) {
    if (d > 0.0) ++wins;
    else if (d < 0.0) ++losses;
  }
  const unsigned n = wins + losses;
  if (n == 0) return 1.0;
  const double upper = detail::binomial_tail_at_least(n, wins);
  const double lower = detail::binomial_tail_at_least(n, losses);
  return std::min(1.0, 2.0 * std::min(upper, lower));
}

// OLS slope of log(value) against log(rank) over the top max_rank values.
// Input must be sorted descending and positive over the fitted range.
inline double log_log_slope(std::span<const double> sorted_desc, std::size_t max_rank) {
  const std::size_t n = std::min(max_rank, sorted_desc.size());
  if (n < 2) throw std::invalid_argument("log_log_slope: need at least 2 ranks");
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t r = 1; r <= n; ++r) {
    const double v = sorted_desc[r - 1];
    if (!(v > 0.0)) throw std::invalid_argument("log_log_slope: values must be positive");
    const double x = std::log(double(r));
    const double y = std::log(v);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = double(n) * sxx - sx * sx;
  return (double(n) * sxy - sx * sy) / denom;
}

inline double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

inline double sample_stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

}  // namespace sidkit
