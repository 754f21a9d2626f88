#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

namespace prunekit {

namespace detail {

inline void require_paired(const std::vector<double>& x, const std::vector<double>& y,
                           const char* who) {
  if (x.size() != y.size()) throw std::invalid_argument(std::string(who) + ": length mismatch");
  if (x.size() < 3) throw std::invalid_argument(std::string(who) + ": need at least 3 samples");
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite input");
  for (double v : y)
    if (!std::isfinite(v)) throw std::invalid_argument(std::string(who) + ": non-finite input");
}

}  // namespace detail

// Product-moment correlation; nullopt when either argument has zero variance.
inline std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  detail::require_paired(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// 1-based ranks with ties assigned the average rank of their run.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size(), 0.0);
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double shared = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = shared;
    i = j + 1;
  }
  return ranks;
}

// Rank correlation via Pearson on fractional ranks; nullopt when one side is
// entirely tied.
inline std::optional<double> spearman(const std::vector<double>& x,
                                      const std::vector<double>& y) {
  detail::require_paired(x, y, "spearman");
  return pearson(fractional_ranks(x), fractional_ranks(y));
}

}  // namespace prunekit
