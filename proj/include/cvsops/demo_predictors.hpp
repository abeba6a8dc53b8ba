#pragma once

// Reference streaming predictors over synthetic media, used by the demo
// predictor process and the audit tests. Only `kLookahead` reads frames
// after the current one.

#include <algorithm>
#include <cmath>
#include <string_view>

#include "cvsops/causal_audit.hpp"

namespace cvsops::audit {

enum class DemoMode { kMemoryless, kMovingAverage, kLookahead };

inline DemoMode demo_mode_from(std::string_view name) {
  if (name == "memoryless") return DemoMode::kMemoryless;
  if (name == "moving-average") return DemoMode::kMovingAverage;
  if (name == "lookahead") return DemoMode::kLookahead;
  throw Error(Errc::kInvalidInput, "unknown predictor mode '" + std::string(name) + "'");
}

inline double squash(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline constexpr int kMovingWindow = 5;

// Probabilities for frame `i` given the media the predictor can see.
inline PerCriterion<double> demo_predict(DemoMode mode, const SyntheticMedia& media, int i) {
  const int n = static_cast<int>(media.frames.size());
  if (i < 0 || i >= n) throw Error(Errc::kMissingFrame, "frame " + std::to_string(i));
  int lo = i, hi = i;
  if (mode == DemoMode::kMovingAverage) lo = std::max(0, i - kMovingWindow + 1);
  if (mode == DemoMode::kLookahead) lo = 0, hi = n - 1;
  PerCriterion<double> out{};
  for (int k = 0; k < kNumCriteria; ++k) {
    double sum = 0.0;
    for (int f = lo; f <= hi; ++f) sum += media.frames[f][k];
    out[k] = squash(sum / (hi - lo + 1));
  }
  return out;
}

// In-process predictor reading media from an InMemoryMediaStore.
class DemoPredictor : public StreamingPredictor {
 public:
  DemoPredictor(DemoMode mode, const InMemoryMediaStore& store) : mode_(mode), store_(store) {}

  void begin(const ClipId&, const std::string& uri) override { media_ = &store_.at(uri); }
  PerCriterion<double> on_frame(const FrameDescriptor& f) override {
    return demo_predict(mode_, *media_, f.frame_index);
  }

 private:
  DemoMode mode_;
  const InMemoryMediaStore& store_;
  const SyntheticMedia* media_ = nullptr;
};

}  // namespace cvsops::audit
