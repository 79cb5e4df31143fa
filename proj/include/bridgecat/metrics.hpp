#pragma once

#include "bridgecat/geometry.hpp"

#include <optional>
#include <string>
#include <vector>

namespace bridgecat {

/// Mean absolute difference between the minimum-image distance matrices of
/// two structures, normalized by N^2 (zero diagonal included).
double dmae(const Structure& a, const Structure& b);

/// Fraction of absolute energy errors at or below epsilon.
double success_ratio(const std::vector<double>& abs_errors, double epsilon);

struct EvalEntry {
  std::string id;
  double dmae = 0.0;
  std::string label; // adsorbate species or other grouping key
};

struct EvalReport {
  std::vector<EvalEntry> entries;
  std::optional<double> eta;     // success ratio when energies were supplied
  std::optional<double> epsilon; // threshold used for eta

  double mean_dmae() const;
  double percentile_dmae(double q) const; // q in [0, 100], linear interpolation
  std::vector<std::pair<std::string, int>> counts_by_label() const;
};

/// Area under the ROC curve via the rank statistic; ties share ranks.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Spearman rank correlation between two samples.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

} // namespace bridgecat
