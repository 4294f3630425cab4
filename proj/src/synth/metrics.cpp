#include "prefrank/synth/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace prefrank::synth {

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(values.size());
  std::size_t start = 0;
  while (start < order.size()) {
    std::size_t stop = start + 1;
    while (stop < order.size() && values[order[stop]] == values[order[start]]) ++stop;
    const double rank = 0.5 * static_cast<double>(start + stop + 1);  // mean of start+1 .. stop
    for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = rank;
    start = stop;
  }
  return ranks;
}

double Spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("Spearman: length mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  if (a.size() < 2) throw std::invalid_argument("Spearman: need at least two values");
  const auto ra = AverageRanks(a);
  const auto rb = AverageRanks(b);
  const double n = static_cast<double>(a.size());
  const double mean = 0.5 * (n + 1.0);
  double cov = 0.0;
  double va = 0.0;
  double vb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

namespace {

// Counts pairs i < j with keys[i] < keys[j] (strictly), i.e. an item placed
// ahead of one the oracle strictly prefers. Merge sort, O(n log n).
double CountAscendingPairs(std::vector<double>& keys, std::vector<double>& scratch, std::size_t lo,
                           std::size_t hi) {
  if (hi - lo < 2) return 0.0;
  const std::size_t mid = lo + (hi - lo) / 2;
  double count = CountAscendingPairs(keys, scratch, lo, mid) + CountAscendingPairs(keys, scratch, mid, hi);
  // Both halves are sorted descending. For each right element, count left
  // elements strictly smaller than it.
  std::size_t i = lo;
  for (std::size_t j = mid; j < hi; ++j) {
    while (i < mid && keys[i] >= keys[j]) ++i;
    count += static_cast<double>(mid - i);
  }
  std::merge(keys.begin() + static_cast<std::ptrdiff_t>(lo), keys.begin() + static_cast<std::ptrdiff_t>(mid),
             keys.begin() + static_cast<std::ptrdiff_t>(mid), keys.begin() + static_cast<std::ptrdiff_t>(hi),
             scratch.begin() + static_cast<std::ptrdiff_t>(lo), std::greater<>());
  std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo), scratch.begin() + static_cast<std::ptrdiff_t>(hi),
            keys.begin() + static_cast<std::ptrdiff_t>(lo));
  return count;
}

}  // namespace

RiskReport ExpectedRisk(std::span<const double> ratings, const Oracle& oracle) {
  const std::size_t n = oracle.size();
  if (ratings.size() != n) {
    throw std::invalid_argument("ExpectedRisk: " + std::to_string(ratings.size()) + " ratings for " +
                                std::to_string(n) + " items");
  }
  RiskReport report;
  report.permutation.resize(n);
  std::iota(report.permutation.begin(), report.permutation.end(), 0);
  std::sort(report.permutation.begin(), report.permutation.end(), [&](ItemId u, ItemId v) {
    if (ratings[u] != ratings[v]) return ratings[u] > ratings[v];
    return u < v;
  });

  const auto& omega = oracle.attributes();
  report.weights.assign(n * n, 0);
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = 0; v < n; ++v) report.weights[u * n + v] = omega[u] > omega[v] ? 1 : 0;
  }

  std::vector<double> keys(n);
  for (std::size_t pos = 0; pos < n; ++pos) keys[pos] = omega[report.permutation[pos]];
  std::vector<double> scratch(n);
  report.total = CountAscendingPairs(keys, scratch, 0, n);
  return report;
}

}  // namespace prefrank::synth
