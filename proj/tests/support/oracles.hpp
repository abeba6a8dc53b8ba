#pragma once

// Reference computations written from the metric definitions, used to check
// the library. Deliberately naive.

#include <algorithm>
#include <random>
#include <vector>

#include "cvsops/causal_audit.hpp"
#include "cvsops/domain.hpp"

namespace cvsops::testkit {

// For each positive, the precision over all items scoring at least as high;
// AP is the mean over positives.
inline double brute_force_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
  long positives = 0;
  long double sum = 0.0L;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++positives;
    long admitted = 0, hits = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[j] >= scores[i]) {
        ++admitted;
        hits += labels[j];
      }
    }
    sum += static_cast<long double>(hits) / admitted;
  }
  return static_cast<double>(sum / positives);
}

inline double second_smallest(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[1];
}

// Soft label for confidences on the tenths grid, as an exact fraction
// numerator / 60.
inline int soft_numerator(const std::array<int, 3>& labels, const std::array<int, 3>& tenths) {
  int n = 0;
  for (int i = 0; i < 3; ++i) n += 10 + (2 * labels[i] - 1) * tenths[i];
  return n;
}

inline audit::SyntheticMedia random_media(const std::string& id, int frames, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  audit::SyntheticMedia m{ClipId(id), {}};
  for (int f = 0; f < frames; ++f) m.frames.push_back({g(rng), g(rng), g(rng)});
  return m;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Output of a predictor that averages the frames [lo, hi] it is shown.
inline PerCriterion<double> window_mean(const audit::SyntheticMedia& m, int lo, int hi) {
  PerCriterion<double> out{};
  for (int k = 0; k < kNumCriteria; ++k) {
    double s = 0.0;
    for (int f = lo; f <= hi; ++f) s += m.frames[f][k];
    out[k] = sigmoid(s / (hi - lo + 1));
  }
  return out;
}

}  // namespace cvsops::testkit
