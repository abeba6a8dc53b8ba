#pragma once

// Eligibility screening, dual-rater adjudication, and 90-second clip
// extraction.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "cvsops/domain.hpp"

namespace cvsops::video_flow {

inline constexpr double kDefaultTimestampTolerance = 2.0;  // seconds

struct EligibilityResult {
  bool eligible = true;
  std::optional<ExclusionReason> reason;

  friend bool operator==(const EligibilityResult&, const EligibilityResult&) = default;
};

// Total function. Reasons are checked in protocol order; a video that is not
// a cholecystectomy is never judged on its clipping window.
inline EligibilityResult check_eligibility(const PreAnnotation& p, double case_duration_s) {
  const auto& f = p.flags;
  if (f.not_cholecystectomy) return {false, ExclusionReason::kNotCholecystectomy};
  if (f.bailout) return {false, ExclusionReason::kBailout};
  if (!f.clipping_observed || p.clipping_timestamp > case_duration_s) {
    return {false, ExclusionReason::kIncompleteNoClipping};
  }
  if (p.clipping_timestamp < kClipSeconds || f.window_obscured) {
    return {false, ExclusionReason::kNoContinuous90s};
  }
  return {true, std::nullopt};
}

// Fills eligible/exclusion_reason from the rater's flags.
inline PreAnnotation with_eligibility(PreAnnotation p, double case_duration_s) {
  auto r = check_eligibility(p, case_duration_s);
  p.eligible = r.eligible;
  p.exclusion_reason = r.reason;
  return p;
}

// Field-level agreement used to close an adjudication chain. Observation
// flags are not compared; they only feed the eligibility verdict.
inline bool concordant(const PreAnnotation& a, const PreAnnotation& b,
                       double timestamp_tolerance = kDefaultTimestampTolerance) {
  return a.eligible == b.eligible && a.exclusion_reason == b.exclusion_reason &&
         std::abs(a.clipping_timestamp - b.clipping_timestamp) <= timestamp_tolerance &&
         a.used_ioc == b.used_ioc && a.used_icg == b.used_icg && a.approach == b.approach;
}

enum class ChainStatus { kNeedsRater, kConcordant };

struct AdjudicationChain {
  CaseId case_id;
  std::vector<PreAnnotation> entries;
  ChainStatus status = ChainStatus::kNeedsRater;
  double timestamp_tolerance = kDefaultTimestampTolerance;

  // Last entry once concordant.
  std::optional<PreAnnotation> final_metadata() const {
    if (status != ChainStatus::kConcordant) return std::nullopt;
    return entries.back();
  }
};

inline AdjudicationChain submit_preannotation(AdjudicationChain chain, PreAnnotation p) {
  if (chain.status == ChainStatus::kConcordant) {
    throw Error(Errc::kChainClosed, "case " + chain.case_id.value + " already concordant");
  }
  for (const auto& e : chain.entries) {
    if (e.rater_id == p.rater_id) {
      throw Error(Errc::kDuplicateRater,
                  p.rater_id.value + " already rated case " + chain.case_id.value);
    }
  }
  chain.entries.push_back(std::move(p));
  const auto n = chain.entries.size();
  if (n >= 2 &&
      concordant(chain.entries[n - 2], chain.entries[n - 1], chain.timestamp_tolerance)) {
    chain.status = ChainStatus::kConcordant;
  }
  return chain;
}

inline AdjudicationChain chain_of(const VideoCase& vc,
                                  double timestamp_tolerance = kDefaultTimestampTolerance) {
  AdjudicationChain chain{vc.case_id, {}, ChainStatus::kNeedsRater, timestamp_tolerance};
  for (const auto& p : vc.preannotation_chain) chain = submit_preannotation(chain, p);
  return chain;
}

inline std::string clip_id_for(const CaseId& case_id) { return case_id.value + "-clip"; }

// The clip covers [T-90, T) of the source, one frame per second.
inline QualifiedClip extract_clip(const VideoCase& vc) {
  if (vc.state != VideoState::kQualified || !vc.final_metadata) {
    throw Error(Errc::kNotQualified, "case " + vc.case_id.value + " is not qualified");
  }
  const double t = vc.final_metadata->clipping_timestamp;
  if (t < kClipSeconds) {
    throw Error(Errc::kWindowUnderflow,
                "clipping at " + std::to_string(t) + "s leaves no 90 s window");
  }
  QualifiedClip clip;
  clip.clip_id = ClipId(clip_id_for(vc.case_id));
  clip.case_id = vc.case_id;
  clip.window_start_s = t - kClipSeconds;
  clip.window_end_s = t;
  clip.annotated_frame_indices = annotated_frame_grid();
  clip.blinded = true;
  clip.media_uri = vc.media_uri.empty() ? std::string{}
                                        : vc.media_uri + "#t=" + std::to_string(t - kClipSeconds) +
                                              "," + std::to_string(t);
  return clip;
}

// ---------------------------------------------------------------------------
// Intake manifest and screening audit (JSON-lines)

struct IntakeRecord {
  CaseId case_id;
  CaseProvenance provenance;
  std::string media_uri;
  double duration_s = 0.0;
  std::string split;
};

inline void to_json(json& j, const IntakeRecord& r) {
  j = json{{"case_id", r.case_id},
           {"provenance", r.provenance},
           {"media_uri", r.media_uri},
           {"duration_s", r.duration_s},
           {"split", r.split}};
}
inline void from_json(const json& j, IntakeRecord& r) {
  j.at("case_id").get_to(r.case_id);
  j.at("provenance").get_to(r.provenance);
  j.at("media_uri").get_to(r.media_uri);
  j.at("duration_s").get_to(r.duration_s);
  r.split = j.value("split", std::string{});
  if (r.duration_s <= 0) throw Error(Errc::kInvalidInput, "duration must be positive");
}

// One line of the screening audit export.
inline json screening_audit_line(const VideoCase& vc) {
  return json{{"case_id", vc.case_id},
              {"state", vc.state},
              {"raters", vc.preannotation_chain.size()},
              {"chain", vc.preannotation_chain},
              {"verdict", optional_json(vc.concordant_verdict)}};
}

}  // namespace cvsops::video_flow

template <>
struct cvsops::EnumNames<cvsops::video_flow::ChainStatus> {
  static constexpr std::array values{
      std::pair{cvsops::video_flow::ChainStatus::kNeedsRater, "NEEDS_RATER"},
      std::pair{cvsops::video_flow::ChainStatus::kConcordant, "CONCORDANT"}};
};
