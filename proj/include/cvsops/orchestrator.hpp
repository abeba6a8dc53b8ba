#pragma once

// Event-sourced campaign state. The state is a pure fold over an append-only
// event log; side effects are queued as Effect records inside the state and
// executed separately (see engine.hpp).

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "cvsops/domain.hpp"
#include "cvsops/evaluation.hpp"
#include "cvsops/fusion.hpp"
#include "cvsops/scheduler.hpp"
#include "cvsops/video_flow.hpp"

namespace cvsops::orchestrator {

enum class EntityKind { kVideo, kAnnotator, kCoverage, kSubmission, kEffect };
enum class EffectKind { kReminder, kTickDue, kNotifyOrganizer, kFusionJob };
enum class EffectStatus { kPending, kDone, kFailed };

}  // namespace cvsops::orchestrator

template <>
struct cvsops::EnumNames<cvsops::orchestrator::EntityKind> {
  using K = cvsops::orchestrator::EntityKind;
  static constexpr std::array values{std::pair{K::kVideo, "VIDEO"},
                                     std::pair{K::kAnnotator, "ANNOTATOR"},
                                     std::pair{K::kCoverage, "COVERAGE"},
                                     std::pair{K::kSubmission, "SUBMISSION"},
                                     std::pair{K::kEffect, "EFFECT"}};
};
template <>
struct cvsops::EnumNames<cvsops::orchestrator::EffectKind> {
  using K = cvsops::orchestrator::EffectKind;
  static constexpr std::array values{std::pair{K::kReminder, "REMINDER"},
                                     std::pair{K::kTickDue, "TICK_DUE"},
                                     std::pair{K::kNotifyOrganizer, "NOTIFY_ORGANIZER"},
                                     std::pair{K::kFusionJob, "FUSION_JOB"}};
};
template <>
struct cvsops::EnumNames<cvsops::orchestrator::EffectStatus> {
  using K = cvsops::orchestrator::EffectStatus;
  static constexpr std::array values{std::pair{K::kPending, "PENDING"},
                                     std::pair{K::kDone, "DONE"},
                                     std::pair{K::kFailed, "FAILED"}};
};

namespace cvsops::orchestrator {

// The single coverage stream; all scheduling events share it.
inline const std::string kCoverageStream = "coverage";

struct RetryPolicy {
  Timestamp base = kHour;
  int factor = 2;
  int max_attempts = 3;
};

struct EngineConfig {
  scheduler::SchedulerConfig scheduler;
  RetryPolicy retry;
  double timestamp_tolerance = video_flow::kDefaultTimestampTolerance;
  std::uint64_t seed = 0;
  std::string organizer_contact = "organizers";
};

// ---------------------------------------------------------------------------
// Events

namespace payloads {
struct VideoRegistered {
  video_flow::IntakeRecord record;
};
struct VideoStep {
  VideoEvent event;
};
struct AnnotatorRegistered {
  AnnotatorProfile profile;
};
struct AnnotatorStep {
  AnnotatorEvent event;
};
struct TickIssued {
  scheduler::AssignmentBatch batch;
};
struct AssessmentAccepted {
  Assessment assessment;
};
struct AssignmentsRevoked {
  std::vector<scheduler::Assignment> assignments;
};
struct SubmissionReceived {
  evaluation::Submission submission;
};
struct EffectAttempted {
  bool ok = true;
  std::string error;
};
}  // namespace payloads

using Payload =
    std::variant<payloads::VideoRegistered, payloads::VideoStep, payloads::AnnotatorRegistered,
                 payloads::AnnotatorStep, payloads::TickIssued, payloads::AssessmentAccepted,
                 payloads::AssignmentsRevoked, payloads::SubmissionReceived,
                 payloads::EffectAttempted>;

inline constexpr std::array<std::string_view, std::variant_size_v<Payload>> kPayloadNames{
    "VIDEO_REGISTERED",  "VIDEO_EVENT",         "ANNOTATOR_REGISTERED",
    "ANNOTATOR_EVENT",   "TICK_ISSUED",         "ASSESSMENT_ACCEPTED",
    "ASSIGNMENTS_REVOKED", "SUBMISSION_RECEIVED", "EFFECT_ATTEMPTED"};

constexpr EntityKind owning_kind(std::size_t payload_index) {
  constexpr std::array<EntityKind, std::variant_size_v<Payload>> kinds{
      EntityKind::kVideo,    EntityKind::kVideo,    EntityKind::kAnnotator,
      EntityKind::kAnnotator, EntityKind::kCoverage, EntityKind::kCoverage,
      EntityKind::kCoverage, EntityKind::kSubmission, EntityKind::kEffect};
  return kinds[payload_index];
}

struct Event {
  std::int64_t event_id = 0;  // 1, 2, ... per entity
  EntityKind kind = EntityKind::kVideo;
  std::string entity_id;
  Payload payload;
  Timestamp occurred_at = 0;
};

inline std::string stream_key(EntityKind kind, const std::string& id) {
  return std::string(enum_name(kind)) + "/" + id;
}

// ---------------------------------------------------------------------------
// Effects

struct Effect {
  std::string effect_id;  // also the idempotency key handed to adapters
  EffectKind kind = EffectKind::kReminder;
  std::string target;     // annotator id, clip id, or empty for ticks
  std::int64_t tick_id = -1;
  Timestamp due_at = 0;
  int attempts = 0;
  EffectStatus status = EffectStatus::kPending;
  std::string last_error;

  friend bool operator==(const Effect&, const Effect&) = default;
};

inline std::string reminder_id(const AnnotatorId& a, std::int64_t tick) {
  return "reminder:" + a.value + ":" + std::to_string(tick);
}
inline std::string tick_effect_id(std::int64_t tick) { return "tick:" + std::to_string(tick); }
inline std::string notify_id(const AnnotatorId& a) { return "notify:" + a.value; }
inline std::string fusion_id(const ClipId& c) { return "fuse:" + c.value; }

// ---------------------------------------------------------------------------
// State

struct EngineState {
  std::map<CaseId, VideoCase> videos;
  std::map<ClipId, CaseId> clip_to_case;
  std::map<AnnotatorId, Annotator> annotators;
  scheduler::CoverageState coverage;
  std::map<ClipId, std::vector<Assessment>> assessments;
  fusion::GroundTruth fused;
  std::map<TeamId, evaluation::Submission> submissions;
  std::map<std::string, Effect> effects;
  std::map<std::string, std::int64_t> sequence;  // last event_id per stream
  std::int64_t applied = 0;                      // events folded so far

  friend bool operator==(const EngineState&, const EngineState&) = default;
};

struct ApplyResult {
  EngineState state;
  std::vector<std::string> emitted;  // ids of effects queued by this event
};

namespace detail {

inline void queue(EngineState& s, std::vector<std::string>& emitted, Effect e) {
  // Effect ids are deterministic, so a re-queued id is the same effect.
  if (s.effects.count(e.effect_id)) return;
  emitted.push_back(e.effect_id);
  s.effects.emplace(e.effect_id, std::move(e));
}

template <class Map, class Key>
auto& find_or(Map& m, const Key& key, Errc code, const std::string& what) {
  auto it = m.find(key);
  if (it == m.end()) throw Error(code, what);
  return it->second;
}

// Engine-driven progression after a submitted video event: concordant chains
// close, qualified cases are clipped.
inline VideoCase advance_video(VideoCase vc, const EngineConfig& cfg) {
  if (vc.state == VideoState::kScreening && vc.preannotation_chain.size() >= 2) {
    const auto chain = video_flow::chain_of(vc, cfg.timestamp_tolerance);
    if (chain.status == video_flow::ChainStatus::kConcordant) {
      const auto n = chain.entries.size();
      const bool blur = chain.entries[n - 1].flags.needs_blur || chain.entries[n - 2].flags.needs_blur;
      vc = video_transition(std::move(vc),
                            video_events::ConcordanceReached{*chain.final_metadata(), blur});
    }
  }
  if (vc.state == VideoState::kQualified) {
    auto clip = video_flow::extract_clip(vc);
    vc = video_transition(std::move(vc), video_events::ClipExtracted{std::move(clip)});
  }
  return vc;
}

inline void on_video_registered(EngineState& s, const Event& ev,
                                const payloads::VideoRegistered& p) {
  const auto& r = p.record;
  if (r.case_id.value != ev.entity_id) {
    throw Error(Errc::kInvalidInput, "record case_id does not match event entity");
  }
  if (s.videos.count(r.case_id)) {
    throw Error(Errc::kInvalidInput, "case " + r.case_id.value + " already registered");
  }
  VideoCase vc;
  vc.case_id = r.case_id;
  vc.provenance = r.provenance;
  vc.media_uri = r.media_uri;
  vc.duration_s = r.duration_s;
  vc.split = r.split;
  s.videos.emplace(r.case_id, std::move(vc));
}

inline void on_video_step(EngineState& s, const Event& ev, const payloads::VideoStep& p,
                          const EngineConfig& cfg) {
  namespace ve = video_events;
  if (std::holds_alternative<ve::ConcordanceReached>(p.event) ||
      std::holds_alternative<ve::AnnotationStarted>(p.event) ||
      std::holds_alternative<ve::AnnotationCompleted>(p.event) ||
      std::holds_alternative<ve::FusionCompleted>(p.event) ||
      std::holds_alternative<ve::ClipExtracted>(p.event)) {
    throw Error(Errc::kInvalidInput,
                std::string(event_name(p.event)) + " is derived by the engine");
  }
  const CaseId id(ev.entity_id);
  auto& current = find_or(s.videos, id, Errc::kNotFound, "no case " + ev.entity_id);
  auto vc = advance_video(video_transition(current, p.event), cfg);
  if (vc.clip && !current.clip) {
    s.coverage.add_clip(vc.clip->clip_id);
    s.clip_to_case[vc.clip->clip_id] = id;
  }
  current = std::move(vc);
}

inline void on_annotator_registered(EngineState& s, const Event& ev,
                                    const payloads::AnnotatorRegistered& p) {
  const AnnotatorId id(ev.entity_id);
  if (s.annotators.count(id)) {
    throw Error(Errc::kInvalidInput, "annotator " + id.value + " already registered");
  }
  Annotator a;
  a.annotator_id = id;
  a.profile = p.profile;
  s.annotators.emplace(id, std::move(a));
}

inline void on_annotator_step(EngineState& s, const Event& ev, const payloads::AnnotatorStep& p,
                              std::vector<std::string>& emitted) {
  const AnnotatorId id(ev.entity_id);
  auto& current = find_or(s.annotators, id, Errc::kNotFound, "no annotator " + ev.entity_id);
  auto next = annotator_transition(current, p.event);
  current = std::move(next);
  if (std::holds_alternative<annotator_events::ExamTaken>(p.event) &&
      current.state == AnnotatorState::kPassed) {
    queue(s, emitted, {notify_id(id), EffectKind::kNotifyOrganizer, id.value, -1,
                       ev.occurred_at, 0, EffectStatus::kPending, {}});
  }
}

inline void on_tick(EngineState& s, const Event& ev, const payloads::TickIssued& p,
                    const EngineConfig& cfg, std::vector<std::string>& emitted) {
  const auto& batch = p.batch;
  std::map<AnnotatorId, Timestamp> due;
  for (const auto& a : batch.assignments) {
    auto it = s.annotators.find(a.annotator_id);
    if (it == s.annotators.end() || it->second.state != AnnotatorState::kActive) {
      throw Error(Errc::kNotQualified, a.annotator_id.value + " is not an active annotator");
    }
    due[a.annotator_id] = std::max(due[a.annotator_id], a.due_at);
  }
  scheduler::apply_batch(s.coverage, batch, cfg.scheduler);

  for (const auto& a : batch.assignments) {
    s.annotators.at(a.annotator_id).assigned_clips.insert(a.clip_id);
    auto& vc = s.videos.at(s.clip_to_case.at(a.clip_id));
    if (vc.state == VideoState::kClipped) {
      vc = video_transition(std::move(vc), video_events::AnnotationStarted{});
    }
  }
  for (const auto& [a, at] : due) {
    queue(s, emitted, {reminder_id(a, batch.tick_id), EffectKind::kReminder, a.value,
                       batch.tick_id, at, 0, EffectStatus::kPending, {}});
  }
  if (!s.coverage.fully_covered(cfg.scheduler.annotators_per_clip)) {
    queue(s, emitted, {tick_effect_id(batch.tick_id + 1), EffectKind::kTickDue, {},
                       batch.tick_id + 1, batch.issued_at + cfg.scheduler.cadence, 0,
                       EffectStatus::kPending, {}});
  }
  (void)ev;
}

inline void on_revoked(EngineState& s, const payloads::AssignmentsRevoked& p) {
  for (const auto& a : p.assignments) {
    auto it = s.coverage.clips.find(a.clip_id);
    if (it == s.coverage.clips.end() || !it->second.pending.count(a.annotator_id)) {
      throw Error(Errc::kUnknownAssignment,
                  "no open assignment " + a.annotator_id.value + "/" + a.clip_id.value);
    }
  }
  for (const auto& a : p.assignments) {
    s.coverage.clips.at(a.clip_id).pending.erase(a.annotator_id);
    if (auto it = s.annotators.find(a.annotator_id); it != s.annotators.end()) {
      it->second.assigned_clips.erase(a.clip_id);
    }
  }
}

inline void on_assessment(EngineState& s, const Event& ev, const payloads::AssessmentAccepted& p,
                          const EngineConfig& cfg, std::vector<std::string>& emitted) {
  const auto& a = p.assessment;
  validate(a);
  const auto result = scheduler::accept_assessment(
      s.coverage, scheduler::Assignment{a.annotator_id, a.clip_id, 0}, a, cfg.scheduler);
  s.assessments[a.clip_id].push_back(a);
  if (auto it = s.annotators.find(a.annotator_id); it != s.annotators.end()) {
    ++it->second.completed_count;
  }
  if (result.clip_fully_annotated) {
    auto& vc = s.videos.at(s.clip_to_case.at(a.clip_id));
    vc = video_transition(std::move(vc), video_events::AnnotationCompleted{});
    queue(s, emitted, {fusion_id(a.clip_id), EffectKind::kFusionJob, a.clip_id.value, -1,
                       ev.occurred_at, 0, EffectStatus::kPending, {}});
  }
}

inline void on_submission(EngineState& s, const Event& ev, const payloads::SubmissionReceived& p) {
  if (p.submission.team_id.value != ev.entity_id) {
    throw Error(Errc::kInvalidInput, "submission team does not match event entity");
  }
  evaluation::validate(p.submission);
  s.submissions[p.submission.team_id] = p.submission;
}

inline void on_effect(EngineState& s, const Event& ev, const payloads::EffectAttempted& p,
                      const EngineConfig& cfg) {
  auto& e = find_or(s.effects, ev.entity_id, Errc::kNotFound, "no effect " + ev.entity_id);
  if (e.status != EffectStatus::kPending) {
    throw Error(Errc::kInvalidInput, "effect " + e.effect_id + " is not pending");
  }
  Effect next = e;
  ++next.attempts;
  if (p.ok) {
    next.status = EffectStatus::kDone;
    next.last_error.clear();
    if (next.kind == EffectKind::kFusionJob) {
      const ClipId clip(next.target);
      auto fused = fusion::fuse_clip(s.assessments.at(clip));
      auto& vc = s.videos.at(s.clip_to_case.at(clip));
      vc = video_transition(std::move(vc), video_events::FusionCompleted{});
      s.fused[clip] = std::move(fused);
    }
  } else {
    next.last_error = p.error;
    if (next.attempts >= cfg.retry.max_attempts) {
      next.status = EffectStatus::kFailed;
    } else {
      Timestamp delay = cfg.retry.base;
      for (int i = 1; i < next.attempts; ++i) delay *= cfg.retry.factor;
      next.due_at = ev.occurred_at + delay;
    }
  }
  e = std::move(next);
}

}  // namespace detail

// Folds one event into `s`. Either the whole event applies or `s` is left
// as it was; every handler checks before it writes.
inline std::vector<std::string> apply_in_place(EngineState& s, const Event& ev,
                                               const EngineConfig& cfg = {}) {
  if (owning_kind(ev.payload.index()) != ev.kind) {
    throw Error(Errc::kInvalidInput, std::string(kPayloadNames[ev.payload.index()]) +
                                         " does not belong to a " +
                                         std::string(enum_name(ev.kind)) + " stream");
  }
  const auto key = stream_key(ev.kind, ev.entity_id);
  const auto it = s.sequence.find(key);
  const std::int64_t expected = (it == s.sequence.end() ? 0 : it->second) + 1;
  if (ev.event_id != expected) {
    throw Error(Errc::kSequenceGap, key + " expected event " + std::to_string(expected) +
                                        ", got " + std::to_string(ev.event_id));
  }

  std::vector<std::string> emitted;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, payloads::VideoRegistered>) {
          detail::on_video_registered(s, ev, p);
        } else if constexpr (std::is_same_v<P, payloads::VideoStep>) {
          detail::on_video_step(s, ev, p, cfg);
        } else if constexpr (std::is_same_v<P, payloads::AnnotatorRegistered>) {
          detail::on_annotator_registered(s, ev, p);
        } else if constexpr (std::is_same_v<P, payloads::AnnotatorStep>) {
          detail::on_annotator_step(s, ev, p, emitted);
        } else if constexpr (std::is_same_v<P, payloads::TickIssued>) {
          detail::on_tick(s, ev, p, cfg, emitted);
        } else if constexpr (std::is_same_v<P, payloads::AssessmentAccepted>) {
          detail::on_assessment(s, ev, p, cfg, emitted);
        } else if constexpr (std::is_same_v<P, payloads::AssignmentsRevoked>) {
          detail::on_revoked(s, p);
        } else if constexpr (std::is_same_v<P, payloads::SubmissionReceived>) {
          detail::on_submission(s, ev, p);
        } else if constexpr (std::is_same_v<P, payloads::EffectAttempted>) {
          detail::on_effect(s, ev, p, cfg);
        }
      },
      ev.payload);
  s.sequence[key] = ev.event_id;
  ++s.applied;
  return emitted;
}

inline ApplyResult apply_event(EngineState state, const Event& ev, const EngineConfig& cfg = {}) {
  auto emitted = apply_in_place(state, ev, cfg);
  return {std::move(state), std::move(emitted)};
}

inline EngineState replay(const std::vector<Event>& log, const EngineConfig& cfg = {},
                          EngineState from = {}) {
  for (std::size_t i = static_cast<std::size_t>(from.applied); i < log.size(); ++i) {
    apply_in_place(from, log[i], cfg);
  }
  return from;
}

inline std::int64_t next_event_id(const EngineState& s, EntityKind kind, const std::string& id) {
  auto it = s.sequence.find(stream_key(kind, id));
  return (it == s.sequence.end() ? 0 : it->second) + 1;
}

// ---------------------------------------------------------------------------
// Read models

inline std::vector<AnnotatorId> active_annotators(const EngineState& s) {
  std::vector<AnnotatorId> out;
  for (const auto& [id, a] : s.annotators) {
    if (a.state == AnnotatorState::kActive) out.push_back(id);
  }
  return out;
}

inline std::set<AnnotatorId> dropped_annotators(const EngineState& s) {
  std::set<AnnotatorId> out;
  for (const auto& [id, a] : s.annotators) {
    if (a.state == AnnotatorState::kDropped) out.insert(id);
  }
  return out;
}

inline std::vector<Annotator> annotator_pool(const EngineState& s) {
  std::vector<Annotator> out;
  for (const auto& [_, a] : s.annotators) out.push_back(a);
  return out;
}

// Open assignments of one annotator, as the blinded payload they may see.
inline std::vector<std::pair<scheduler::PendingAssignment, scheduler::AnnotatorView>>
assignments_for(const EngineState& s, const AnnotatorId& annotator) {
  std::vector<std::pair<scheduler::PendingAssignment, scheduler::AnnotatorView>> out;
  for (const auto& [clip_id, cov] : s.coverage.clips) {
    auto p = cov.pending.find(annotator);
    if (p == cov.pending.end()) continue;
    const auto& vc = s.videos.at(s.clip_to_case.at(clip_id));
    out.emplace_back(p->second, scheduler::blind_payload(*vc.clip));
  }
  return out;
}

// Test-split clips that have fused ground truth, for evaluation.
inline std::vector<evaluation::TestClip> test_pool(const EngineState& s,
                                                   const std::string& split = "test") {
  std::vector<evaluation::TestClip> out;
  for (const auto& [clip_id, gt] : s.fused) {
    const auto& vc = s.videos.at(s.clip_to_case.at(clip_id));
    if (vc.split == split) out.push_back({clip_id, vc.provenance, gt.mean_confidence});
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const Effect& e) {
  j = json{{"effect_id", e.effect_id}, {"kind", e.kind},         {"target", e.target},
           {"tick_id", e.tick_id},     {"due_at", e.due_at},     {"attempts", e.attempts},
           {"status", e.status},       {"last_error", e.last_error}};
}
inline void from_json(const json& j, Effect& e) {
  j.at("effect_id").get_to(e.effect_id);
  j.at("kind").get_to(e.kind);
  j.at("target").get_to(e.target);
  j.at("tick_id").get_to(e.tick_id);
  j.at("due_at").get_to(e.due_at);
  j.at("attempts").get_to(e.attempts);
  j.at("status").get_to(e.status);
  e.last_error = j.value("last_error", std::string{});
}

inline json payload_to_json(const Payload& payload) {
  return std::visit(
      [](const auto& p) -> json {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, payloads::VideoRegistered>) {
          return p.record;
        } else if constexpr (std::is_same_v<P, payloads::VideoStep>) {
          return event_to_json(p.event);
        } else if constexpr (std::is_same_v<P, payloads::AnnotatorRegistered>) {
          return p.profile;
        } else if constexpr (std::is_same_v<P, payloads::AnnotatorStep>) {
          return event_to_json(p.event);
        } else if constexpr (std::is_same_v<P, payloads::TickIssued>) {
          return p.batch;
        } else if constexpr (std::is_same_v<P, payloads::AssessmentAccepted>) {
          return p.assessment;
        } else if constexpr (std::is_same_v<P, payloads::AssignmentsRevoked>) {
          return json{{"assignments", p.assignments}};
        } else if constexpr (std::is_same_v<P, payloads::SubmissionReceived>) {
          return p.submission;
        } else {
          return json{{"ok", p.ok}, {"error", p.error}};
        }
      },
      payload);
}

inline Payload payload_from_json(std::string_view type, const json& j) {
  if (type == "VIDEO_REGISTERED") return payloads::VideoRegistered{j.get<video_flow::IntakeRecord>()};
  if (type == "VIDEO_EVENT") return payloads::VideoStep{video_event_from_json(j)};
  if (type == "ANNOTATOR_REGISTERED") return payloads::AnnotatorRegistered{j.get<AnnotatorProfile>()};
  if (type == "ANNOTATOR_EVENT") return payloads::AnnotatorStep{annotator_event_from_json(j)};
  if (type == "TICK_ISSUED") return payloads::TickIssued{j.get<scheduler::AssignmentBatch>()};
  if (type == "ASSESSMENT_ACCEPTED") return payloads::AssessmentAccepted{j.get<Assessment>()};
  if (type == "ASSIGNMENTS_REVOKED") {
    return payloads::AssignmentsRevoked{
        j.at("assignments").get<std::vector<scheduler::Assignment>>()};
  }
  if (type == "SUBMISSION_RECEIVED") {
    return payloads::SubmissionReceived{j.get<evaluation::Submission>()};
  }
  if (type == "EFFECT_ATTEMPTED") {
    return payloads::EffectAttempted{j.at("ok").get<bool>(), j.value("error", std::string{})};
  }
  throw Error(Errc::kInvalidInput, "unknown event type " + std::string(type));
}

inline void to_json(json& j, const Event& e) {
  j = json{{"event_id", e.event_id},
           {"entity", {{"kind", e.kind}, {"id", e.entity_id}}},
           {"type", kPayloadNames[e.payload.index()]},
           {"payload", payload_to_json(e.payload)},
           {"occurred_at", e.occurred_at}};
}
inline void from_json(const json& j, Event& e) {
  j.at("event_id").get_to(e.event_id);
  j.at("entity").at("kind").get_to(e.kind);
  j.at("entity").at("id").get_to(e.entity_id);
  e.payload = payload_from_json(j.at("type").get<std::string>(), j.at("payload"));
  j.at("occurred_at").get_to(e.occurred_at);
}

inline void to_json(json& j, const EngineState& s) {
  json fused = json::array();
  for (const auto& [_, c] : s.fused) fused.push_back(c);
  json subs = json::array();
  for (const auto& [_, sub] : s.submissions) subs.push_back(sub);
  json effects = json::array();
  for (const auto& [_, e] : s.effects) effects.push_back(e);
  j = json{{"videos", s.videos},           {"clip_to_case", s.clip_to_case},
           {"annotators", s.annotators},   {"coverage", s.coverage},
           {"assessments", s.assessments}, {"fused", fused},
           {"submissions", subs},          {"effects", effects},
           {"sequence", s.sequence},       {"applied", s.applied}};
}
inline void from_json(const json& j, EngineState& s) {
  j.at("videos").get_to(s.videos);
  j.at("clip_to_case").get_to(s.clip_to_case);
  j.at("annotators").get_to(s.annotators);
  j.at("coverage").get_to(s.coverage);
  j.at("assessments").get_to(s.assessments);
  s.fused.clear();
  for (const auto& c : j.at("fused")) {
    auto clip = c.get<fusion::FusedClip>();
    s.fused.emplace(clip.clip_id, std::move(clip));
  }
  s.submissions.clear();
  for (const auto& sub : j.at("submissions")) {
    auto v = sub.get<evaluation::Submission>();
    s.submissions.emplace(v.team_id, std::move(v));
  }
  s.effects.clear();
  for (const auto& e : j.at("effects")) {
    auto v = e.get<Effect>();
    s.effects.emplace(v.effect_id, std::move(v));
  }
  j.at("sequence").get_to(s.sequence);
  j.at("applied").get_to(s.applied);
}

}  // namespace cvsops::orchestrator
