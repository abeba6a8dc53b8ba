#pragma once

// Shared domain types and the two lifecycle state machines (video, annotator).

#include <algorithm>
#include <array>
#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cvsops/enum_names.hpp"
#include "cvsops/error.hpp"

namespace cvsops {

using json = nlohmann::json;

// Seconds since the Unix epoch. Every module takes time as a parameter;
// nothing reads the wall clock except the CLI entry points.
using Timestamp = std::int64_t;

inline constexpr Timestamp kHour = 3600;
inline constexpr Timestamp kDay = 24 * kHour;

inline constexpr int kNumCriteria = 3;
inline constexpr int kClipSeconds = 90;
inline constexpr int kClipFrames = 90;  // 1 fps
inline constexpr int kFrameStride = 5;
inline constexpr int kAnnotatedFrames = kClipFrames / kFrameStride;  // 18
inline constexpr int kAnnotatorsPerClip = 3;
inline constexpr double kExamPassThreshold = 0.75;

// ---------------------------------------------------------------------------
// Identifiers

template <class Tag>
struct Id {
  std::string value;

  Id() = default;
  explicit Id(std::string v) : value(std::move(v)) {}

  bool empty() const { return value.empty(); }
  friend auto operator<=>(const Id&, const Id&) = default;
  friend bool operator==(const Id&, const Id&) = default;
};

template <class Tag>
void to_json(json& j, const Id<Tag>& id) { j = id.value; }
template <class Tag>
void from_json(const json& j, Id<Tag>& id) { id.value = j.get<std::string>(); }

using CaseId = Id<struct CaseIdTag>;
using ClipId = Id<struct ClipIdTag>;
using AnnotatorId = Id<struct AnnotatorIdTag>;
using TeamId = Id<struct TeamIdTag>;

// Screening raters come from the organizing team, not the annotator pool.
using RaterId = Id<struct RaterIdTag>;

// ---------------------------------------------------------------------------
// Enumerations

enum class Criterion { kC1, kC2, kC3 };
inline constexpr std::array<Criterion, 3> kCriteria{Criterion::kC1, Criterion::kC2,
                                                    Criterion::kC3};
constexpr int index_of(Criterion c) { return static_cast<int>(c); }

enum class Approach { kLaparoscopic, kRobotic };

enum class ExclusionReason {
  kNotCholecystectomy,
  kNoContinuous90s,
  kBailout,
  kIncompleteNoClipping,
};

enum class VideoState {
  kReceived,
  kScreening,
  kExcluded,
  kReprocessing,
  kQualified,
  kClipped,
  kInAnnotation,
  kFullyAnnotated,
  kFused,
};

enum class AnnotatorState {
  kContacted,
  kEligible,
  kIneligible,
  kTraining,
  kPassed,  // exam passed, waiting for organizer activation
  kFailed,
  kQualified,
  kActive,
  kPaused,
  kDropped,
};

template <>
struct EnumNames<Criterion> {
  static constexpr std::array values{std::pair{Criterion::kC1, "C1"},
                                     std::pair{Criterion::kC2, "C2"},
                                     std::pair{Criterion::kC3, "C3"}};
};
template <>
struct EnumNames<Approach> {
  static constexpr std::array values{std::pair{Approach::kLaparoscopic, "LAPAROSCOPIC"},
                                     std::pair{Approach::kRobotic, "ROBOTIC"}};
};
template <>
struct EnumNames<ExclusionReason> {
  static constexpr std::array values{
      std::pair{ExclusionReason::kNotCholecystectomy, "NOT_CHOLECYSTECTOMY"},
      std::pair{ExclusionReason::kNoContinuous90s, "NO_CONTINUOUS_90S"},
      std::pair{ExclusionReason::kBailout, "BAILOUT"},
      std::pair{ExclusionReason::kIncompleteNoClipping, "INCOMPLETE_NO_CLIPPING"}};
};
template <>
struct EnumNames<VideoState> {
  static constexpr std::array values{
      std::pair{VideoState::kReceived, "RECEIVED"},
      std::pair{VideoState::kScreening, "SCREENING"},
      std::pair{VideoState::kExcluded, "EXCLUDED"},
      std::pair{VideoState::kReprocessing, "REPROCESSING"},
      std::pair{VideoState::kQualified, "QUALIFIED"},
      std::pair{VideoState::kClipped, "CLIPPED"},
      std::pair{VideoState::kInAnnotation, "IN_ANNOTATION"},
      std::pair{VideoState::kFullyAnnotated, "FULLY_ANNOTATED"},
      std::pair{VideoState::kFused, "FUSED"}};
};
template <>
struct EnumNames<AnnotatorState> {
  static constexpr std::array values{
      std::pair{AnnotatorState::kContacted, "CONTACTED"},
      std::pair{AnnotatorState::kEligible, "ELIGIBLE"},
      std::pair{AnnotatorState::kIneligible, "INELIGIBLE"},
      std::pair{AnnotatorState::kTraining, "TRAINING"},
      std::pair{AnnotatorState::kPassed, "PASSED"},
      std::pair{AnnotatorState::kFailed, "FAILED"},
      std::pair{AnnotatorState::kQualified, "QUALIFIED"},
      std::pair{AnnotatorState::kActive, "ACTIVE"},
      std::pair{AnnotatorState::kPaused, "PAUSED"},
      std::pair{AnnotatorState::kDropped, "DROPPED"}};
};

// Per-criterion fixed-size container; every per-criterion collection is
// indexed by all three criteria.
template <class T>
using PerCriterion = std::array<T, kNumCriteria>;

// ---------------------------------------------------------------------------
// Video side

struct CaseProvenance {
  std::optional<std::string> country;        // nullopt = Unknown
  std::optional<std::string> device_vendor;  // nullopt = Unknown
  Approach approach = Approach::kLaparoscopic;
  bool used_ioc = false;
  bool used_icg = false;
  std::string source_institution;

  friend bool operator==(const CaseProvenance&, const CaseProvenance&) = default;
};

// What the screening rater observed; eligibility is derived from these.
struct ScreeningFlags {
  bool not_cholecystectomy = false;
  bool bailout = false;
  bool window_obscured = false;
  bool clipping_observed = true;
  bool needs_blur = false;  // identifiable content outside the body

  friend bool operator==(const ScreeningFlags&, const ScreeningFlags&) = default;
};

struct PreAnnotation {
  RaterId rater_id;
  bool eligible = true;
  std::optional<ExclusionReason> exclusion_reason;
  double clipping_timestamp = 0.0;  // seconds from video start
  bool used_ioc = false;
  bool used_icg = false;
  Approach approach = Approach::kLaparoscopic;
  ScreeningFlags flags;

  friend bool operator==(const PreAnnotation&, const PreAnnotation&) = default;
};

struct QualifiedClip {
  ClipId clip_id;
  CaseId case_id;
  int duration_s = kClipSeconds;
  int frame_rate = 1;
  double window_start_s = 0.0;
  double window_end_s = 0.0;
  std::vector<int> annotated_frame_indices;
  bool blinded = true;
  std::string media_uri;

  friend bool operator==(const QualifiedClip&, const QualifiedClip&) = default;
};

// {0, 5, ..., 85}
inline std::vector<int> annotated_frame_grid() {
  std::vector<int> out;
  out.reserve(kAnnotatedFrames);
  for (int i = 0; i < kAnnotatedFrames; ++i) out.push_back(i * kFrameStride);
  return out;
}

struct VideoCase {
  CaseId case_id;
  CaseProvenance provenance;
  std::string media_uri;
  double duration_s = 0.0;
  std::string split;  // dataset partition, e.g. "train" / "test"
  VideoState state = VideoState::kReceived;
  std::vector<PreAnnotation> preannotation_chain;
  std::optional<PreAnnotation> concordant_verdict;
  std::optional<PreAnnotation> final_metadata;  // present iff state >= Qualified
  std::optional<ExclusionReason> exclusion_reason;
  bool needs_blur = false;
  std::optional<QualifiedClip> clip;

  friend bool operator==(const VideoCase&, const VideoCase&) = default;
};

namespace video_events {
struct ScreeningStarted {
  friend bool operator==(const ScreeningStarted&, const ScreeningStarted&) = default;
};
struct PreannotationSubmitted {
  PreAnnotation preannotation;
  friend bool operator==(const PreannotationSubmitted&, const PreannotationSubmitted&) = default;
};
struct ConcordanceReached {
  PreAnnotation verdict;
  bool needs_blur = false;
  friend bool operator==(const ConcordanceReached&, const ConcordanceReached&) = default;
};
struct ReprocessingDone {
  friend bool operator==(const ReprocessingDone&, const ReprocessingDone&) = default;
};
struct ClipExtracted {
  QualifiedClip clip;
  friend bool operator==(const ClipExtracted&, const ClipExtracted&) = default;
};
struct AnnotationStarted {
  friend bool operator==(const AnnotationStarted&, const AnnotationStarted&) = default;
};
struct AnnotationCompleted {
  friend bool operator==(const AnnotationCompleted&, const AnnotationCompleted&) = default;
};
struct FusionCompleted {
  friend bool operator==(const FusionCompleted&, const FusionCompleted&) = default;
};
}  // namespace video_events

using VideoEvent =
    std::variant<video_events::ScreeningStarted, video_events::PreannotationSubmitted,
                 video_events::ConcordanceReached, video_events::ReprocessingDone,
                 video_events::ClipExtracted, video_events::AnnotationStarted,
                 video_events::AnnotationCompleted, video_events::FusionCompleted>;

inline constexpr std::array<std::string_view, std::variant_size_v<VideoEvent>>
    kVideoEventNames{"SCREENING_STARTED", "PREANNOTATION_SUBMITTED",
                     "CONCORDANCE_REACHED", "REPROCESSING_DONE",
                     "CLIP_EXTRACTED",    "ANNOTATION_STARTED",
                     "ANNOTATION_COMPLETED", "FUSION_COMPLETED"};

inline std::string_view event_name(const VideoEvent& e) { return kVideoEventNames[e.index()]; }

// Source state required by each video event. PreannotationSubmitted is the
// only self-loop (adjudication rounds stay in Screening).
constexpr VideoState required_state(std::size_t video_event_index) {
  constexpr std::array<VideoState, std::variant_size_v<VideoEvent>> from{
      VideoState::kReceived,      VideoState::kScreening, VideoState::kScreening,
      VideoState::kReprocessing,  VideoState::kQualified, VideoState::kClipped,
      VideoState::kInAnnotation,  VideoState::kFullyAnnotated};
  return from[video_event_index];
}

inline bool is_legal(VideoState state, const VideoEvent& event) {
  return required_state(event.index()) == state;
}

[[noreturn]] inline void throw_illegal(std::string_view state, std::string_view event) {
  throw Error(Errc::kIllegalTransition,
              "event " + std::string(event) + " not allowed in state " + std::string(state));
}

inline VideoCase video_transition(VideoCase vc, const VideoEvent& event) {
  namespace ve = video_events;
  if (!is_legal(vc.state, event)) throw_illegal(enum_name(vc.state), event_name(event));

  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ve::ScreeningStarted>) {
          vc.state = VideoState::kScreening;
        } else if constexpr (std::is_same_v<E, ve::PreannotationSubmitted>) {
          for (const auto& p : vc.preannotation_chain) {
            if (p.rater_id == e.preannotation.rater_id) {
              throw Error(Errc::kDuplicateRater, e.preannotation.rater_id.value);
            }
          }
          vc.preannotation_chain.push_back(e.preannotation);
        } else if constexpr (std::is_same_v<E, ve::ConcordanceReached>) {
          vc.concordant_verdict = e.verdict;
          if (!e.verdict.eligible) {
            vc.state = VideoState::kExcluded;
            vc.exclusion_reason = e.verdict.exclusion_reason;
          } else if (e.needs_blur) {
            vc.state = VideoState::kReprocessing;
            vc.needs_blur = true;
          } else {
            vc.state = VideoState::kQualified;
            vc.final_metadata = e.verdict;
          }
        } else if constexpr (std::is_same_v<E, ve::ReprocessingDone>) {
          vc.state = VideoState::kQualified;
          vc.needs_blur = false;
          vc.final_metadata = vc.concordant_verdict;
        } else if constexpr (std::is_same_v<E, ve::ClipExtracted>) {
          if (e.clip.case_id != vc.case_id) {
            throw Error(Errc::kInvalidInput, "clip belongs to another case");
          }
          vc.state = VideoState::kClipped;
          vc.clip = e.clip;
        } else if constexpr (std::is_same_v<E, ve::AnnotationStarted>) {
          vc.state = VideoState::kInAnnotation;
        } else if constexpr (std::is_same_v<E, ve::AnnotationCompleted>) {
          vc.state = VideoState::kFullyAnnotated;
        } else if constexpr (std::is_same_v<E, ve::FusionCompleted>) {
          vc.state = VideoState::kFused;
        }
      },
      event);
  return vc;
}

// ---------------------------------------------------------------------------
// Annotator side

struct AnnotatorProfile {
  bool clinical_background = true;
  std::string contact;

  friend bool operator==(const AnnotatorProfile&, const AnnotatorProfile&) = default;
};

struct Annotator {
  AnnotatorId annotator_id;
  AnnotatorState state = AnnotatorState::kContacted;
  AnnotatorProfile profile;
  std::optional<double> exam_score;
  std::set<ClipId> assigned_clips;
  int completed_count = 0;
  std::optional<AnnotatorState> dropped_from;

  friend bool operator==(const Annotator&, const Annotator&) = default;
};

namespace annotator_events {
struct EligibilityPassed {
  friend bool operator==(const EligibilityPassed&, const EligibilityPassed&) = default;
};
struct EligibilityFailed {
  friend bool operator==(const EligibilityFailed&, const EligibilityFailed&) = default;
};
struct TrainingStarted {
  friend bool operator==(const TrainingStarted&, const TrainingStarted&) = default;
};
struct ExamTaken {
  double score = 0.0;
  friend bool operator==(const ExamTaken&, const ExamTaken&) = default;
};
struct QualificationConfirmed {
  friend bool operator==(const QualificationConfirmed&, const QualificationConfirmed&) = default;
};
struct Activated {
  friend bool operator==(const Activated&, const Activated&) = default;
};
struct Paused {
  friend bool operator==(const Paused&, const Paused&) = default;
};
struct Resumed {
  friend bool operator==(const Resumed&, const Resumed&) = default;
};
struct DroppedOut {
  friend bool operator==(const DroppedOut&, const DroppedOut&) = default;
};
}  // namespace annotator_events

using AnnotatorEvent =
    std::variant<annotator_events::EligibilityPassed, annotator_events::EligibilityFailed,
                 annotator_events::TrainingStarted, annotator_events::ExamTaken,
                 annotator_events::QualificationConfirmed, annotator_events::Activated,
                 annotator_events::Paused, annotator_events::Resumed,
                 annotator_events::DroppedOut>;

inline constexpr std::array<std::string_view, std::variant_size_v<AnnotatorEvent>>
    kAnnotatorEventNames{"ELIGIBILITY_PASSED", "ELIGIBILITY_FAILED", "TRAINING_STARTED",
                         "EXAM_TAKEN",         "QUALIFICATION_CONFIRMED", "ACTIVATED",
                         "PAUSED",             "RESUMED",                "DROPPED_OUT"};

inline std::string_view event_name(const AnnotatorEvent& e) {
  return kAnnotatorEventNames[e.index()];
}

constexpr bool is_terminal(AnnotatorState s) {
  return s == AnnotatorState::kIneligible || s == AnnotatorState::kFailed ||
         s == AnnotatorState::kDropped;
}

// Funnel depth of a state: Contacted 0, Eligible 1, Training 2, exam taken 3,
// passed 4, qualified 5. Terminal states report the depth they stopped at.
constexpr int funnel_depth(AnnotatorState s) {
  switch (s) {
    case AnnotatorState::kContacted:
    case AnnotatorState::kIneligible: return 0;
    case AnnotatorState::kEligible: return 1;
    case AnnotatorState::kTraining: return 2;
    case AnnotatorState::kFailed: return 3;
    case AnnotatorState::kPassed: return 4;
    case AnnotatorState::kQualified:
    case AnnotatorState::kActive:
    case AnnotatorState::kPaused: return 5;
    case AnnotatorState::kDropped: return -1;
  }
  return -1;
}

inline bool is_legal(AnnotatorState s, const AnnotatorEvent& event) {
  namespace ae = annotator_events;
  return std::visit(
      [s](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ae::EligibilityPassed> ||
                      std::is_same_v<E, ae::EligibilityFailed>) {
          return s == AnnotatorState::kContacted;
        } else if constexpr (std::is_same_v<E, ae::TrainingStarted>) {
          return s == AnnotatorState::kEligible;
        } else if constexpr (std::is_same_v<E, ae::ExamTaken>) {
          return s == AnnotatorState::kTraining;
        } else if constexpr (std::is_same_v<E, ae::QualificationConfirmed>) {
          return s == AnnotatorState::kPassed;
        } else if constexpr (std::is_same_v<E, ae::Activated>) {
          return s == AnnotatorState::kQualified;
        } else if constexpr (std::is_same_v<E, ae::Paused>) {
          return s == AnnotatorState::kActive;
        } else if constexpr (std::is_same_v<E, ae::Resumed>) {
          return s == AnnotatorState::kPaused;
        } else {
          return !is_terminal(s);
        }
      },
      event);
}

inline Annotator annotator_transition(Annotator a, const AnnotatorEvent& event) {
  namespace ae = annotator_events;
  if (!is_legal(a.state, event)) throw_illegal(enum_name(a.state), event_name(event));

  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ae::EligibilityPassed>) {
          a.state = AnnotatorState::kEligible;
        } else if constexpr (std::is_same_v<E, ae::EligibilityFailed>) {
          a.state = AnnotatorState::kIneligible;
        } else if constexpr (std::is_same_v<E, ae::TrainingStarted>) {
          a.state = AnnotatorState::kTraining;
        } else if constexpr (std::is_same_v<E, ae::ExamTaken>) {
          if (!(e.score >= 0.0 && e.score <= 1.0)) {
            throw Error(Errc::kInvalidInput, "exam score outside [0,1]");
          }
          a.exam_score = e.score;
          a.state = e.score >= kExamPassThreshold ? AnnotatorState::kPassed
                                                  : AnnotatorState::kFailed;
        } else if constexpr (std::is_same_v<E, ae::QualificationConfirmed>) {
          a.state = AnnotatorState::kQualified;
        } else if constexpr (std::is_same_v<E, ae::Activated> ||
                             std::is_same_v<E, ae::Resumed>) {
          a.state = AnnotatorState::kActive;
        } else if constexpr (std::is_same_v<E, ae::Paused>) {
          a.state = AnnotatorState::kPaused;
        } else if constexpr (std::is_same_v<E, ae::DroppedOut>) {
          a.dropped_from = a.state;
          a.state = AnnotatorState::kDropped;
        }
      },
      event);
  return a;
}

// Deepest funnel stage the annotator reached (uses dropped_from for Dropped).
inline int reached_depth(const Annotator& a) {
  if (a.state == AnnotatorState::kDropped) {
    return a.dropped_from ? funnel_depth(*a.dropped_from) : 0;
  }
  return funnel_depth(a.state);
}

inline bool holds_qualification(AnnotatorState s) {
  return s == AnnotatorState::kQualified || s == AnnotatorState::kActive ||
         s == AnnotatorState::kPaused;
}

// ---------------------------------------------------------------------------
// Assessments

using FrameLabels = std::array<PerCriterion<int>, kAnnotatedFrames>;

struct Assessment {
  ClipId clip_id;
  AnnotatorId annotator_id;
  FrameLabels frame_labels{};
  double confidence = 0.0;
  PerCriterion<int> video_level{};

  friend bool operator==(const Assessment&, const Assessment&) = default;
};

inline void validate(const Assessment& a) {
  if (!(a.confidence >= 0.0 && a.confidence <= 1.0)) {
    throw Error(Errc::kInvalidInput, "confidence outside [0,1] for clip " + a.clip_id.value);
  }
  for (const auto& row : a.frame_labels) {
    for (int v : row) {
      if (v != 0 && v != 1) throw Error(Errc::kInvalidInput, "frame label must be 0 or 1");
    }
  }
  for (int k = 0; k < kNumCriteria; ++k) {
    int v = a.video_level[k];
    if (v != 0 && v != 1) throw Error(Errc::kInvalidInput, "video label must be 0 or 1");
    if (v == 1) {
      bool any = std::any_of(a.frame_labels.begin(), a.frame_labels.end(),
                             [k](const auto& row) { return row[k] == 1; });
      if (!any) {
        throw Error(Errc::kInvalidInput,
                    "criterion achieved at video level but at no annotated frame");
      }
    }
  }
}

struct LabelTriple {
  std::array<int, kAnnotatorsPerClip> labels{};
  std::array<double, kAnnotatorsPerClip> confidences{};

  friend bool operator==(const LabelTriple&, const LabelTriple&) = default;
};

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const CaseProvenance& p) {
  j = json{{"country", p.country ? json(*p.country) : json(nullptr)},
           {"device_vendor", p.device_vendor ? json(*p.device_vendor) : json(nullptr)},
           {"approach", p.approach},
           {"used_ioc", p.used_ioc},
           {"used_icg", p.used_icg},
           {"source_institution", p.source_institution}};
}
inline void from_json(const json& j, CaseProvenance& p) {
  const auto& c = j.at("country");
  p.country = c.is_null() ? std::nullopt : std::optional(c.get<std::string>());
  const auto& d = j.at("device_vendor");
  p.device_vendor = d.is_null() ? std::nullopt : std::optional(d.get<std::string>());
  j.at("approach").get_to(p.approach);
  j.at("used_ioc").get_to(p.used_ioc);
  j.at("used_icg").get_to(p.used_icg);
  p.source_institution = j.value("source_institution", std::string{});
}

inline void to_json(json& j, const ScreeningFlags& f) {
  j = json{{"not_cholecystectomy", f.not_cholecystectomy},
           {"bailout", f.bailout},
           {"window_obscured", f.window_obscured},
           {"clipping_observed", f.clipping_observed},
           {"needs_blur", f.needs_blur}};
}
inline void from_json(const json& j, ScreeningFlags& f) {
  f.not_cholecystectomy = j.value("not_cholecystectomy", false);
  f.bailout = j.value("bailout", false);
  f.window_obscured = j.value("window_obscured", false);
  f.clipping_observed = j.value("clipping_observed", true);
  f.needs_blur = j.value("needs_blur", false);
}

inline void to_json(json& j, const PreAnnotation& p) {
  j = json{{"rater_id", p.rater_id},
           {"eligible", p.eligible},
           {"exclusion_reason",
            p.exclusion_reason ? json(*p.exclusion_reason) : json(nullptr)},
           {"clipping_timestamp", p.clipping_timestamp},
           {"used_ioc", p.used_ioc},
           {"used_icg", p.used_icg},
           {"approach", p.approach},
           {"flags", p.flags}};
}
inline void from_json(const json& j, PreAnnotation& p) {
  j.at("rater_id").get_to(p.rater_id);
  j.at("eligible").get_to(p.eligible);
  const auto& r = j.at("exclusion_reason");
  p.exclusion_reason = r.is_null() ? std::nullopt : std::optional(r.get<ExclusionReason>());
  j.at("clipping_timestamp").get_to(p.clipping_timestamp);
  j.at("used_ioc").get_to(p.used_ioc);
  j.at("used_icg").get_to(p.used_icg);
  j.at("approach").get_to(p.approach);
  if (j.contains("flags")) j.at("flags").get_to(p.flags);
  if (p.eligible == p.exclusion_reason.has_value()) {
    throw Error(Errc::kInvalidInput, "eligible must be false iff exclusion_reason is set");
  }
}

inline void to_json(json& j, const QualifiedClip& c) {
  j = json{{"clip_id", c.clip_id},
           {"case_id", c.case_id},
           {"duration_s", c.duration_s},
           {"frame_rate", c.frame_rate},
           {"window_start_s", c.window_start_s},
           {"window_end_s", c.window_end_s},
           {"annotated_frame_indices", c.annotated_frame_indices},
           {"blinded", c.blinded},
           {"media_uri", c.media_uri}};
}
inline void from_json(const json& j, QualifiedClip& c) {
  j.at("clip_id").get_to(c.clip_id);
  j.at("case_id").get_to(c.case_id);
  j.at("duration_s").get_to(c.duration_s);
  j.at("frame_rate").get_to(c.frame_rate);
  j.at("window_start_s").get_to(c.window_start_s);
  j.at("window_end_s").get_to(c.window_end_s);
  j.at("annotated_frame_indices").get_to(c.annotated_frame_indices);
  j.at("blinded").get_to(c.blinded);
  c.media_uri = j.value("media_uri", std::string{});
}

template <class T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}
template <class T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

inline void to_json(json& j, const VideoCase& v) {
  j = json{{"case_id", v.case_id},
           {"provenance", v.provenance},
           {"media_uri", v.media_uri},
           {"duration_s", v.duration_s},
           {"split", v.split},
           {"state", v.state},
           {"preannotation_chain", v.preannotation_chain},
           {"concordant_verdict", optional_json(v.concordant_verdict)},
           {"final_metadata", optional_json(v.final_metadata)},
           {"exclusion_reason", optional_json(v.exclusion_reason)},
           {"needs_blur", v.needs_blur},
           {"clip", optional_json(v.clip)}};
}
inline void from_json(const json& j, VideoCase& v) {
  j.at("case_id").get_to(v.case_id);
  j.at("provenance").get_to(v.provenance);
  v.media_uri = j.value("media_uri", std::string{});
  v.duration_s = j.value("duration_s", 0.0);
  v.split = j.value("split", std::string{});
  v.state = j.contains("state") ? j.at("state").get<VideoState>() : VideoState::kReceived;
  v.preannotation_chain =
      j.value("preannotation_chain", std::vector<PreAnnotation>{});
  v.concordant_verdict = optional_from<PreAnnotation>(j, "concordant_verdict");
  v.final_metadata = optional_from<PreAnnotation>(j, "final_metadata");
  v.exclusion_reason = optional_from<ExclusionReason>(j, "exclusion_reason");
  v.needs_blur = j.value("needs_blur", false);
  v.clip = optional_from<QualifiedClip>(j, "clip");
}

inline void to_json(json& j, const AnnotatorProfile& p) {
  j = json{{"clinical_background", p.clinical_background}, {"contact", p.contact}};
}
inline void from_json(const json& j, AnnotatorProfile& p) {
  p.clinical_background = j.value("clinical_background", true);
  p.contact = j.value("contact", std::string{});
}

inline void to_json(json& j, const Annotator& a) {
  j = json{{"annotator_id", a.annotator_id},
           {"state", a.state},
           {"profile", a.profile},
           {"exam_score", optional_json(a.exam_score)},
           {"assigned_clips", a.assigned_clips},
           {"completed_count", a.completed_count},
           {"dropped_from", optional_json(a.dropped_from)}};
}
inline void from_json(const json& j, Annotator& a) {
  j.at("annotator_id").get_to(a.annotator_id);
  a.state = j.contains("state") ? j.at("state").get<AnnotatorState>()
                                : AnnotatorState::kContacted;
  if (j.contains("profile")) j.at("profile").get_to(a.profile);
  a.exam_score = optional_from<double>(j, "exam_score");
  a.assigned_clips = j.value("assigned_clips", std::set<ClipId>{});
  a.completed_count = j.value("completed_count", 0);
  a.dropped_from = optional_from<AnnotatorState>(j, "dropped_from");
}

inline void to_json(json& j, const Assessment& a) {
  j = json{{"clip_id", a.clip_id},
           {"annotator_id", a.annotator_id},
           {"frame_labels", a.frame_labels},
           {"confidence", a.confidence},
           {"video_level", a.video_level}};
}
inline void from_json(const json& j, Assessment& a) {
  j.at("clip_id").get_to(a.clip_id);
  j.at("annotator_id").get_to(a.annotator_id);
  const auto& rows = j.at("frame_labels");
  if (!rows.is_array() || rows.size() != kAnnotatedFrames) {
    throw Error(Errc::kShapeMismatch, "frame_labels must have 18 rows");
  }
  for (int f = 0; f < kAnnotatedFrames; ++f) {
    if (!rows[f].is_array() || rows[f].size() != kNumCriteria) {
      throw Error(Errc::kShapeMismatch, "frame_labels rows must have 3 entries");
    }
    for (int k = 0; k < kNumCriteria; ++k) a.frame_labels[f][k] = rows[f][k].get<int>();
  }
  j.at("confidence").get_to(a.confidence);
  const auto& vl = j.at("video_level");
  if (!vl.is_array() || vl.size() != kNumCriteria) {
    throw Error(Errc::kShapeMismatch, "video_level must have 3 entries");
  }
  for (int k = 0; k < kNumCriteria; ++k) a.video_level[k] = vl[k].get<int>();
  validate(a);
}

inline void to_json(json& j, const LabelTriple& t) {
  j = json{{"labels", t.labels}, {"confidences", t.confidences}};
}
inline void from_json(const json& j, LabelTriple& t) {
  j.at("labels").get_to(t.labels);
  j.at("confidences").get_to(t.confidences);
}

// Event payload codecs: {"type": NAME, ...fields}.
inline json event_to_json(const VideoEvent& event) {
  namespace ve = video_events;
  json j{{"type", std::string(event_name(event))}};
  std::visit(
      [&](const auto& e) {
        using E = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<E, ve::PreannotationSubmitted>) {
          j["preannotation"] = e.preannotation;
        } else if constexpr (std::is_same_v<E, ve::ConcordanceReached>) {
          j["verdict"] = e.verdict;
          j["needs_blur"] = e.needs_blur;
        } else if constexpr (std::is_same_v<E, ve::ClipExtracted>) {
          j["clip"] = e.clip;
        }
      },
      event);
  return j;
}

inline VideoEvent video_event_from_json(const json& j) {
  namespace ve = video_events;
  const auto type = j.at("type").get<std::string>();
  if (type == "SCREENING_STARTED") return ve::ScreeningStarted{};
  if (type == "PREANNOTATION_SUBMITTED") {
    return ve::PreannotationSubmitted{j.at("preannotation").get<PreAnnotation>()};
  }
  if (type == "CONCORDANCE_REACHED") {
    return ve::ConcordanceReached{j.at("verdict").get<PreAnnotation>(),
                                  j.value("needs_blur", false)};
  }
  if (type == "REPROCESSING_DONE") return ve::ReprocessingDone{};
  if (type == "CLIP_EXTRACTED") return ve::ClipExtracted{j.at("clip").get<QualifiedClip>()};
  if (type == "ANNOTATION_STARTED") return ve::AnnotationStarted{};
  if (type == "ANNOTATION_COMPLETED") return ve::AnnotationCompleted{};
  if (type == "FUSION_COMPLETED") return ve::FusionCompleted{};
  throw Error(Errc::kInvalidInput, "unknown video event " + type);
}

inline json event_to_json(const AnnotatorEvent& event) {
  json j{{"type", std::string(event_name(event))}};
  if (const auto* exam = std::get_if<annotator_events::ExamTaken>(&event)) {
    j["score"] = exam->score;
  }
  return j;
}

inline AnnotatorEvent annotator_event_from_json(const json& j) {
  namespace ae = annotator_events;
  const auto type = j.at("type").get<std::string>();
  if (type == "ELIGIBILITY_PASSED") return ae::EligibilityPassed{};
  if (type == "ELIGIBILITY_FAILED") return ae::EligibilityFailed{};
  if (type == "TRAINING_STARTED") return ae::TrainingStarted{};
  if (type == "EXAM_TAKEN") return ae::ExamTaken{j.at("score").get<double>()};
  if (type == "QUALIFICATION_CONFIRMED") return ae::QualificationConfirmed{};
  if (type == "ACTIVATED") return ae::Activated{};
  if (type == "PAUSED") return ae::Paused{};
  if (type == "RESUMED") return ae::Resumed{};
  if (type == "DROPPED_OUT") return ae::DroppedOut{};
  throw Error(Errc::kInvalidInput, "unknown annotator event " + type);
}

}  // namespace cvsops
