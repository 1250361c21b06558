// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

namespace oracle {

// O(n^2) concordance count.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<bool>& labels) {
  double wins = 0.0;
  double pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

// Smallest sample value v with #{x <= v} >= q*n.
inline double smallest_covering(const std::vector<double>& values, double q) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  for (double v : sorted) {
    const auto below = std::count_if(values.begin(), values.end(), [&](double x) { return x <= v; });
    if (static_cast<double>(below) >= q * static_cast<double>(values.size()) - 1e-9) return v;
  }
  return sorted.back();
}

}  // namespace oracle
