#pragma once

// Ground-truth fusion of three assessments per clip, agreement classes,
// expert reference predictors, classification reporting and dataset
// statistics.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "cvsops/domain.hpp"

namespace cvsops::fusion {

enum class Agreement { kFull, kPartial };

inline int fuse_mode(const LabelTriple& t) {
  return t.labels[0] + t.labels[1] + t.labels[2] >= 2 ? 1 : 0;
}

// Confidence-aware soft label: mean over annotators of 0.5 + (l - 0.5) * c.
inline double fuse_soft(const LabelTriple& t) {
  double sum = 0.0;
  for (int i = 0; i < kAnnotatorsPerClip; ++i) {
    sum += 0.5 + (t.labels[i] - 0.5) * t.confidences[i];
  }
  return sum / 3.0;
}

// With three binary labels there is no "total disagreement" class.
inline Agreement agreement_class(const LabelTriple& t) {
  return t.labels[0] == t.labels[1] && t.labels[1] == t.labels[2] ? Agreement::kFull
                                                                  : Agreement::kPartial;
}

struct FusedCell {
  int mode = 0;
  double soft = 0.5;
  Agreement agreement = Agreement::kFull;

  friend bool operator==(const FusedCell&, const FusedCell&) = default;
};

struct FusedClip {
  ClipId clip_id;
  std::array<PerCriterion<FusedCell>, kAnnotatedFrames> frames{};
  PerCriterion<int> video_level{};  // mode of the annotators' video-level labels
  double mean_confidence = 0.0;

  friend bool operator==(const FusedClip&, const FusedClip&) = default;
};

inline LabelTriple triple_at(const std::array<const Assessment*, 3>& a, int frame, int k) {
  LabelTriple t;
  for (int i = 0; i < 3; ++i) {
    t.labels[i] = a[i]->frame_labels[frame][k];
    t.confidences[i] = a[i]->confidence;
  }
  return t;
}

inline std::array<const Assessment*, 3> three_of(const std::vector<Assessment>& assessments) {
  if (assessments.size() != kAnnotatorsPerClip) {
    throw Error(Errc::kMissingAssessments,
                "expected 3 assessments, got " + std::to_string(assessments.size()));
  }
  std::set<AnnotatorId> raters;
  for (const auto& a : assessments) {
    if (a.clip_id != assessments.front().clip_id) {
      throw Error(Errc::kInvalidInput, "assessments for different clips");
    }
    raters.insert(a.annotator_id);
  }
  if (raters.size() != kAnnotatorsPerClip) {
    throw Error(Errc::kMissingAssessments, "three distinct annotators required");
  }
  return {&assessments[0], &assessments[1], &assessments[2]};
}

inline FusedClip fuse_clip(const std::vector<Assessment>& assessments) {
  const auto a = three_of(assessments);
  FusedClip out;
  out.clip_id = a[0]->clip_id;
  for (int f = 0; f < kAnnotatedFrames; ++f) {
    for (int k = 0; k < kNumCriteria; ++k) {
      const auto t = triple_at(a, f, k);
      out.frames[f][k] = {fuse_mode(t), fuse_soft(t), agreement_class(t)};
    }
  }
  for (int k = 0; k < kNumCriteria; ++k) {
    int votes = a[0]->video_level[k] + a[1]->video_level[k] + a[2]->video_level[k];
    out.video_level[k] = votes >= 2 ? 1 : 0;
  }
  out.mean_confidence = (a[0]->confidence + a[1]->confidence + a[2]->confidence) / 3.0;
  return out;
}

// Ground truth keyed by clip.
using GroundTruth = std::map<ClipId, FusedClip>;

inline GroundTruth fuse_all(const std::vector<Assessment>& assessments) {
  std::map<ClipId, std::vector<Assessment>> by_clip;
  for (const auto& a : assessments) by_clip[a.clip_id].push_back(a);
  GroundTruth gt;
  for (const auto& [id, group] : by_clip) gt.emplace(id, fuse_clip(group));
  return gt;
}

// ---------------------------------------------------------------------------
// Expert reference predictors

enum class Bound { kUpper, kLower };

using BinaryGrid = std::array<PerCriterion<int>, kAnnotatedFrames>;

// Upper: the rater mode everywhere. Lower: the mode on unanimous frames and
// the minority label where the raters split 2-1.
inline BinaryGrid expert_bound_predict(const std::vector<Assessment>& assessments, Bound bound) {
  const auto a = three_of(assessments);
  BinaryGrid out{};
  for (int f = 0; f < kAnnotatedFrames; ++f) {
    for (int k = 0; k < kNumCriteria; ++k) {
      const auto t = triple_at(a, f, k);
      const int mode = fuse_mode(t);
      out[f][k] = bound == Bound::kUpper || agreement_class(t) == Agreement::kFull ? mode
                                                                                   : 1 - mode;
    }
  }
  return out;
}

inline BinaryGrid mode_grid(const FusedClip& clip) {
  BinaryGrid g{};
  for (int f = 0; f < kAnnotatedFrames; ++f) {
    for (int k = 0; k < kNumCriteria; ++k) g[f][k] = clip.frames[f][k].mode;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Classification report. All values in percent.

struct ClassificationReport {
  PerCriterion<double> accuracy{};
  PerCriterion<double> macro_f1{};
  double overall_macro_f1 = 0.0;
  double subset_accuracy = 0.0;
  std::size_t frames = 0;
};

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

// F1 of one class; nullopt when the class is absent from both predictions and
// labels (excluded from the macro average rather than counted as 0 or 1).
inline std::optional<double> class_f1(long tp, long fp, long fn) {
  if (tp + fp + fn == 0) return std::nullopt;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

inline double macro_f1(const Confusion& c) {
  const auto f1_pos = class_f1(c.tp, c.fp, c.fn);
  const auto f1_neg = class_f1(c.tn, c.fn, c.fp);
  double sum = 0.0;
  int n = 0;
  for (const auto& f : {f1_pos, f1_neg}) {
    if (f) {
      sum += *f;
      ++n;
    }
  }
  return n == 0 ? 1.0 : sum / n;
}

inline double overall_macro_f1(const PerCriterion<double>& per_criterion) {
  return (per_criterion[0] + per_criterion[1] + per_criterion[2]) / 3.0;
}

inline ClassificationReport classification_report(const std::vector<PerCriterion<int>>& predictions,
                                                  const std::vector<PerCriterion<int>>& labels) {
  if (predictions.size() != labels.size()) {
    throw Error(Errc::kShapeMismatch, "prediction and label grids differ in length");
  }
  if (labels.empty()) throw Error(Errc::kShapeMismatch, "empty grid");
  ClassificationReport r;
  r.frames = labels.size();
  PerCriterion<Confusion> cm{};
  long all_correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    bool row_ok = true;
    for (int k = 0; k < kNumCriteria; ++k) {
      const int p = predictions[i][k], y = labels[i][k];
      if (p == 1 && y == 1) ++cm[k].tp;
      else if (p == 1 && y == 0) ++cm[k].fp;
      else if (p == 0 && y == 1) ++cm[k].fn;
      else ++cm[k].tn;
      row_ok = row_ok && p == y;
    }
    all_correct += row_ok ? 1 : 0;
  }
  const double n = static_cast<double>(labels.size());
  for (int k = 0; k < kNumCriteria; ++k) {
    r.accuracy[k] = 100.0 * (cm[k].tp + cm[k].tn) / n;
    r.macro_f1[k] = 100.0 * macro_f1(cm[k]);
  }
  r.overall_macro_f1 = overall_macro_f1(r.macro_f1);
  r.subset_accuracy = 100.0 * all_correct / n;
  return r;
}

// Flattens per-clip grids in clip order.
inline std::vector<PerCriterion<int>> flatten(const std::vector<BinaryGrid>& grids) {
  std::vector<PerCriterion<int>> out;
  for (const auto& g : grids) out.insert(out.end(), g.begin(), g.end());
  return out;
}

// Half-up rounding to 2 decimals for presentation only.
inline double round2(double v) { return std::floor(v * 100.0 + 0.5) / 100.0; }

// ---------------------------------------------------------------------------
// Dataset statistics

struct PoolClip {
  ClipId clip_id;
  std::string split;  // "train" / "test"
  CaseProvenance provenance;
  std::vector<Assessment> assessments;
};

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation
  double min = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

inline MeanSd describe(const std::vector<double>& xs) {
  MeanSd s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - s.mean) * (x - s.mean);
  s.sd = xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
  s.min = *std::min_element(xs.begin(), xs.end());
  s.max = *std::max_element(xs.begin(), xs.end());
  return s;
}

struct AgreementCounts {
  long achieved_full = 0;
  long achieved_partial = 0;
  long not_achieved_full = 0;
  long not_achieved_partial = 0;

  long full() const { return achieved_full + not_achieved_full; }
  long total() const { return full() + achieved_partial + not_achieved_partial; }
  friend bool operator==(const AgreementCounts&, const AgreementCounts&) = default;
};

struct SplitStats {
  std::size_t videos = 0;
  std::size_t countries = 0;
  std::size_t unknown_country = 0;
  MeanSd videos_per_country;
  std::size_t device_vendors = 0;
  std::size_t unknown_device = 0;
  MeanSd videos_per_device;
  MeanSd confidence;
  PerCriterion<long> video_level_achieved{};
  PerCriterion<long> frame_level_achieved{};
  PerCriterion<AgreementCounts> agreement{};
  double ioc_rate = 0.0;
  double icg_rate = 0.0;
  double robotic_rate = 0.0;
  std::size_t laparoscopic = 0;
};

struct DatasetStats {
  SplitStats all;
  std::map<std::string, SplitStats> by_split;
};

inline SplitStats split_stats(const std::vector<const PoolClip*>& clips) {
  SplitStats s;
  s.videos = clips.size();
  if (clips.empty()) return s;
  std::map<std::string, int> per_country, per_device;
  std::vector<double> confidences;
  std::size_t ioc = 0, icg = 0, robotic = 0;
  for (const auto* c : clips) {
    const auto& p = c->provenance;
    if (p.country) ++per_country[*p.country]; else ++s.unknown_country;
    if (p.device_vendor) ++per_device[*p.device_vendor]; else ++s.unknown_device;
    ioc += p.used_ioc;
    icg += p.used_icg;
    if (p.approach == Approach::kRobotic) ++robotic; else ++s.laparoscopic;
    for (const auto& a : c->assessments) confidences.push_back(a.confidence);
    if (c->assessments.size() == kAnnotatorsPerClip) {
      const auto fused = fuse_clip(c->assessments);
      for (int k = 0; k < kNumCriteria; ++k) {
        s.video_level_achieved[k] += fused.video_level[k];
        for (const auto& row : fused.frames) {
          const auto& cell = row[k];
          s.frame_level_achieved[k] += cell.mode;
          auto& ag = s.agreement[k];
          if (cell.mode == 1) {
            (cell.agreement == Agreement::kFull ? ag.achieved_full : ag.achieved_partial)++;
          } else {
            (cell.agreement == Agreement::kFull ? ag.not_achieved_full
                                                : ag.not_achieved_partial)++;
          }
        }
      }
    }
  }
  auto counts = [](const std::map<std::string, int>& m) {
    std::vector<double> v;
    for (const auto& [_, n] : m) v.push_back(n);
    return v;
  };
  s.countries = per_country.size();
  s.videos_per_country = describe(counts(per_country));
  s.device_vendors = per_device.size();
  s.videos_per_device = describe(counts(per_device));
  s.confidence = describe(confidences);
  const double n = static_cast<double>(clips.size());
  s.ioc_rate = ioc / n;
  s.icg_rate = icg / n;
  s.robotic_rate = robotic / n;
  return s;
}

inline DatasetStats dataset_stats(const std::vector<PoolClip>& pool) {
  DatasetStats out;
  std::vector<const PoolClip*> all;
  std::map<std::string, std::vector<const PoolClip*>> by_split;
  for (const auto& c : pool) {
    all.push_back(&c);
    by_split[c.split].push_back(&c);
  }
  out.all = split_stats(all);
  for (const auto& [name, clips] : by_split) out.by_split[name] = split_stats(clips);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const MeanSd& s) {
  j = json{{"mean", s.mean}, {"sd", s.sd}, {"min", s.min}, {"max", s.max}, {"n", s.n}};
}

inline void to_json(json& j, const AgreementCounts& a) {
  j = json{{"achieved_full", a.achieved_full},
           {"achieved_partial", a.achieved_partial},
           {"not_achieved_full", a.not_achieved_full},
           {"not_achieved_partial", a.not_achieved_partial}};
}

inline void to_json(json& j, const SplitStats& s) {
  j = json{{"videos", s.videos},
           {"countries", s.countries},
           {"unknown_country", s.unknown_country},
           {"videos_per_country", s.videos_per_country},
           {"device_vendors", s.device_vendors},
           {"unknown_device", s.unknown_device},
           {"videos_per_device", s.videos_per_device},
           {"confidence", s.confidence},
           {"video_level_achieved", s.video_level_achieved},
           {"frame_level_achieved", s.frame_level_achieved},
           {"agreement", s.agreement},
           {"ioc_rate", s.ioc_rate},
           {"icg_rate", s.icg_rate},
           {"robotic_rate", s.robotic_rate},
           {"laparoscopic", s.laparoscopic}};
}

inline void to_json(json& j, const DatasetStats& d) {
  j = json{{"all", d.all}, {"by_split", d.by_split}};
}

inline void to_json(json& j, const FusedClip& c) {
  json frames = json::array();
  for (const auto& row : c.frames) {
    json r = json::array();
    for (const auto& cell : row) {
      r.push_back(json{cell.mode, cell.soft, cell.agreement == Agreement::kFull ? 1 : 0});
    }
    frames.push_back(r);
  }
  j = json{{"clip_id", c.clip_id},
           {"frames", frames},
           {"video_level", c.video_level},
           {"mean_confidence", c.mean_confidence}};
}
inline void from_json(const json& j, FusedClip& c) {
  j.at("clip_id").get_to(c.clip_id);
  const auto& frames = j.at("frames");
  if (frames.size() != kAnnotatedFrames) throw Error(Errc::kShapeMismatch, "fused clip frames");
  for (int f = 0; f < kAnnotatedFrames; ++f) {
    for (int k = 0; k < kNumCriteria; ++k) {
      const auto& cell = frames[f][k];
      c.frames[f][k] = {cell[0].get<int>(), cell[1].get<double>(),
                        cell[2].get<int>() == 1 ? Agreement::kFull : Agreement::kPartial};
    }
  }
  j.at("video_level").get_to(c.video_level);
  j.at("mean_confidence").get_to(c.mean_confidence);
}

// Fused ground-truth file: one line per (clip_id, frame_index).
inline std::vector<json> ground_truth_lines(const GroundTruth& gt) {
  std::vector<json> out;
  const auto grid = annotated_frame_grid();
  for (const auto& [id, clip] : gt) {
    for (int f = 0; f < kAnnotatedFrames; ++f) {
      json mode = json::object(), soft = json::object(), agreement = json::object();
      for (auto c : kCriteria) {
        const auto& cell = clip.frames[f][index_of(c)];
        const std::string key = c == Criterion::kC1 ? "c1" : c == Criterion::kC2 ? "c2" : "c3";
        mode[key] = cell.mode;
        soft[key] = cell.soft;
        agreement[key] = cell.agreement == Agreement::kFull ? "FULL" : "PARTIAL";
      }
      out.push_back(json{{"clip_id", id},
                         {"frame_index", grid[f]},
                         {"mode", mode},
                         {"soft", soft},
                         {"agreement", agreement},
                         {"video_level", clip.video_level},
                         {"mean_confidence", clip.mean_confidence}});
    }
  }
  return out;
}

inline GroundTruth ground_truth_from_lines(const std::vector<json>& lines) {
  GroundTruth gt;
  std::map<ClipId, std::set<int>> seen;
  for (const auto& l : lines) {
    const auto id = l.at("clip_id").get<ClipId>();
    const int frame_index = l.at("frame_index").get<int>();
    if (frame_index < 0 || frame_index % kFrameStride != 0 || frame_index >= kClipFrames) {
      throw Error(Errc::kMissingFrame, "frame index " + std::to_string(frame_index) +
                                           " is not an annotated frame");
    }
    const int f = frame_index / kFrameStride;
    auto& clip = gt[id];
    clip.clip_id = id;
    const char* keys[] = {"c1", "c2", "c3"};
    for (int k = 0; k < kNumCriteria; ++k) {
      auto& cell = clip.frames[f][k];
      cell.mode = l.at("mode").at(keys[k]).get<int>();
      cell.soft = l.at("soft").at(keys[k]).get<double>();
      cell.agreement = l.contains("agreement") &&
                               l.at("agreement").at(keys[k]).get<std::string>() == "PARTIAL"
                           ? Agreement::kPartial
                           : Agreement::kFull;
    }
    if (l.contains("video_level")) l.at("video_level").get_to(clip.video_level);
    clip.mean_confidence = l.value("mean_confidence", 0.0);
    seen[id].insert(f);
  }
  for (const auto& [id, frames] : seen) {
    if (frames.size() != kAnnotatedFrames) {
      throw Error(Errc::kMissingFrame, "clip " + id.value + " lacks annotated frames");
    }
  }
  return gt;
}

}  // namespace cvsops::fusion
