#pragma once

// Causality audit for streaming predictors: outputs for frames <= t must not
// change when the clip is truncated after frame t.

#include <cmath>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cvsops/domain.hpp"

namespace cvsops::audit {

// Per-frame descriptor sent to a predictor, one per line.
struct FrameDescriptor {
  ClipId clip_id;
  int frame_index = 0;
  std::string media_uri;
};

inline void to_json(json& j, const FrameDescriptor& d) {
  j = json{{"clip_id", d.clip_id}, {"frame_index", d.frame_index}, {"media_uri", d.media_uri}};
}
inline void from_json(const json& j, FrameDescriptor& d) {
  j.at("clip_id").get_to(d.clip_id);
  j.at("frame_index").get_to(d.frame_index);
  j.at("media_uri").get_to(d.media_uri);
}

// Stand-in for decoded video: a small feature vector per frame.
struct SyntheticMedia {
  ClipId clip_id;
  std::vector<PerCriterion<double>> frames;
};

inline void to_json(json& j, const SyntheticMedia& m) {
  j = json{{"clip_id", m.clip_id}, {"frames", m.frames}};
}
inline void from_json(const json& j, SyntheticMedia& m) {
  j.at("clip_id").get_to(m.clip_id);
  j.at("frames").get_to(m.frames);
}

// Where the harness publishes (possibly truncated) media for a run.
class MediaStore {
 public:
  virtual ~MediaStore() = default;
  virtual std::string publish(const SyntheticMedia& media, const std::string& tag) = 0;
};

class InMemoryMediaStore : public MediaStore {
 public:
  std::string publish(const SyntheticMedia& media, const std::string& tag) override {
    std::string uri = "mem://" + media.clip_id.value + "/" + tag;
    media_[uri] = media;
    return uri;
  }

  const SyntheticMedia& at(const std::string& uri) const {
    auto it = media_.find(uri);
    if (it == media_.end()) throw Error(Errc::kNotFound, "no media at " + uri);
    return it->second;
  }

 private:
  std::map<std::string, SyntheticMedia> media_;
};

// A predictor session covers one clip. begin() is called before the first
// frame; each on_frame() must return that frame's three probabilities.
class StreamingPredictor {
 public:
  virtual ~StreamingPredictor() = default;
  virtual void begin(const ClipId& clip_id, const std::string& media_uri) = 0;
  virtual PerCriterion<double> on_frame(const FrameDescriptor& frame) = 0;
  virtual void end() {}
};

inline std::vector<PerCriterion<double>> run_stream(StreamingPredictor& predictor,
                                                    const ClipId& clip_id,
                                                    const std::string& uri, int frames) {
  std::vector<PerCriterion<double>> out;
  out.reserve(frames);
  predictor.begin(clip_id, uri);
  for (int f = 0; f < frames; ++f) out.push_back(predictor.on_frame({clip_id, f, uri}));
  predictor.end();
  return out;
}

inline const std::vector<int>& default_probes() {
  static const std::vector<int> probes{10, 45, 89};
  return probes;
}

struct Violation {
  ClipId clip_id;
  int probe = 0;
  int frame = 0;
  double delta = 0.0;
};

struct AuditResult {
  std::optional<Violation> violation;
  bool passed() const { return !violation; }
  std::string summary() const {
    if (!violation) return "PASS";
    return "VIOLATION " + violation->clip_id.value + "@" + std::to_string(violation->frame);
  }
};

// Runs the predictor on the full clip and on each prefix [0..t]; predictions
// for frames <= t must agree within `tolerance`. Reports the first mismatch
// of the earliest failing probe.
inline AuditResult causal_audit(StreamingPredictor& predictor, const SyntheticMedia& media,
                                MediaStore& store,
                                const std::vector<int>& probes = default_probes(),
                                double tolerance = 1e-6) {
  const int n = static_cast<int>(media.frames.size());
  const auto full_uri = store.publish(media, "full");
  const auto full = run_stream(predictor, media.clip_id, full_uri, n);
  for (int t : probes) {
    if (t < 0 || t >= n) throw Error(Errc::kInvalidInput, "probe outside clip");
    SyntheticMedia prefix{media.clip_id,
                          {media.frames.begin(), media.frames.begin() + t + 1}};
    const auto uri = store.publish(prefix, "prefix-" + std::to_string(t));
    const auto partial = run_stream(predictor, media.clip_id, uri, t + 1);
    for (int f = 0; f <= t; ++f) {
      for (int k = 0; k < kNumCriteria; ++k) {
        const double d = std::abs(partial[f][k] - full[f][k]);
        if (!(d <= tolerance)) return {Violation{media.clip_id, t, f, d}};
      }
    }
  }
  return {};
}

}  // namespace cvsops::audit
