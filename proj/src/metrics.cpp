#include "bridgecat/metrics.hpp"

#include "bridgecat/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace bridgecat {

double dmae(const Structure& a, const Structure& b) {
  if (a.size() != b.size() || a.atomic_numbers != b.atomic_numbers) {
    throw std::invalid_argument("dmae requires matching systems");
  }
  if (!(a.lattice == b.lattice)) {
    throw std::invalid_argument("dmae requires a shared lattice");
  }
  const Eigen::MatrixXd da = min_image_distance_matrix(a);
  const Eigen::MatrixXd db = min_image_distance_matrix(b);
  const auto n = static_cast<double>(a.size());
  return (da - db).array().abs().sum() / (n * n);
}

double success_ratio(const std::vector<double>& abs_errors, double epsilon) {
  if (abs_errors.empty()) throw std::invalid_argument("success_ratio on empty list");
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be positive");
  std::size_t hits = 0;
  for (double e : abs_errors) {
    if (e <= epsilon) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(abs_errors.size());
}

double EvalReport::mean_dmae() const {
  if (entries.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& e : entries) sum += e.dmae;
  return sum / static_cast<double>(entries.size());
}

double EvalReport::percentile_dmae(double q) const {
  if (entries.empty()) throw std::logic_error("percentile of empty report");
  if (q < 0.0 || q > 100.0) throw std::invalid_argument("percentile must be in [0, 100]");
  std::vector<double> values;
  values.reserve(entries.size());
  for (const auto& e : entries) values.push_back(e.dmae);
  std::sort(values.begin(), values.end());
  double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  auto hi = static_cast<std::size_t>(std::ceil(pos));
  double frac = pos - std::floor(pos);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

std::vector<std::pair<std::string, int>> EvalReport::counts_by_label() const {
  std::map<std::string, int> counts;
  for (const auto& e : entries) counts[e.label] += 1;
  return {counts.begin(), counts.end()};
}

namespace {

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    double rank = 0.5 * static_cast<double>(i + j) + 1.0; // 1-based mid-rank
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0.0 || vb == 0.0) return 0.0;
  return cov / std::sqrt(va * vb);
}

} // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw std::invalid_argument("roc_auc requires matching nonempty inputs");
  }
  std::size_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(y);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("roc_auc requires both classes");
  }
  std::vector<double> ranks = fractional_ranks(scores);
  double rank_sum_pos = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum_pos += ranks[i];
  }
  double auc = (rank_sum_pos - static_cast<double>(n_pos) *
                                   (static_cast<double>(n_pos) + 1.0) / 2.0) /
               (static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return auc;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw std::invalid_argument("spearman requires two samples of equal size >= 2");
  }
  return pearson(fractional_ranks(a), fractional_ranks(b));
}

} // namespace bridgecat
