#pragma once

// Random legal campaigns driven through the engine. Every accepted action
// lands in the store's log; rejected probes leave no trace.

#include <random>
#include <string>
#include <vector>

#include "cvsops/engine.hpp"

namespace cvsops::testkit {

namespace pl = orchestrator::payloads;
using orchestrator::EntityKind;

inline orchestrator::EngineConfig small_engine_config(std::uint64_t seed = 1) {
  orchestrator::EngineConfig cfg;
  cfg.scheduler.bucket_size = 4;
  cfg.scheduler.cadence = 7 * kDay;
  cfg.seed = seed;
  return cfg;
}

inline Assessment random_assessment(const ClipId& clip, const AnnotatorId& who, std::mt19937_64& rng) {
  Assessment a;
  a.clip_id = clip;
  a.annotator_id = who;
  a.confidence = std::uniform_int_distribution<int>(0, 10)(rng) / 10.0;
  for (auto& row : a.frame_labels) {
    for (auto& v : row) v = static_cast<int>(rng() % 2);
  }
  for (int k = 0; k < kNumCriteria; ++k) {
    bool any = false;
    for (const auto& row : a.frame_labels) any = any || row[k] == 1;
    a.video_level[k] = any ? static_cast<int>(rng() % 2) : 0;
  }
  return a;
}

inline PreAnnotation random_verdict(int rater, double duration, std::mt19937_64& rng,
                                    const PreAnnotation* previous) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PreAnnotation p;
  p.rater_id = RaterId("r" + std::to_string(rater));
  if (previous && u(rng) < 0.6) {
    p.clipping_timestamp = previous->clipping_timestamp + (u(rng) < 0.5 ? 1.0 : 0.0);
    p.flags = previous->flags;
    p.used_ioc = previous->used_ioc;
    p.used_icg = previous->used_icg;
    p.approach = previous->approach;
  } else {
    p.clipping_timestamp = std::round(60.0 + u(rng) * (duration - 60.0));
    p.flags.not_cholecystectomy = u(rng) < 0.05;
    p.flags.bailout = u(rng) < 0.03;
    p.flags.needs_blur = u(rng) < 0.1;
    p.used_ioc = u(rng) < 0.1;
    p.used_icg = u(rng) < 0.1;
    p.approach = u(rng) < 0.1 ? Approach::kRobotic : Approach::kLaparoscopic;
  }
  return video_flow::with_eligibility(p, duration);
}

class RandomCampaign {
 public:
  explicit RandomCampaign(std::uint64_t seed,
                          orchestrator::EngineConfig cfg = small_engine_config())
      : rng_(seed), clock_(1'700'000'000), engine_(cfg, store_, notifier_, errors_, clock_) {}

  const std::vector<orchestrator::Event>& log() const { return store_.log; }
  const orchestrator::EngineState& state() const { return engine_.state(); }
  orchestrator::Engine& engine() { return engine_; }
  orchestrator::RecordingNotifier& notifier() { return notifier_; }
  orchestrator::ManualClock& clock() { return clock_; }
  int rejected() const { return rejected_; }

  void run_until(std::size_t events) {
    while (store_.log.size() < events) step();
  }

  void step() {
    const int action = std::discrete_distribution<int>(
        {6, 10, 2, 3, 8, 2, 20, 3, 1, 2})(rng_);
    try {
      switch (action) {
        case 0: register_video(); break;
        case 1: screen(); break;
        case 2: reprocess(); break;
        case 3: register_annotator(); break;
        case 4: onboard(); break;
        case 5: tick(); break;
        case 6: assess(); break;
        case 7: effects(); break;
        case 8: submit_team(); break;
        case 9: illegal_probe(); break;
      }
    } catch (const Error&) {
      ++rejected_;
    }
  }

 private:
  template <class T>
  const T* pick(const std::vector<T>& v) {
    if (v.empty()) return nullptr;
    return &v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng_)];
  }

  void register_video() {
    if (videos_ >= 1500) return screen();
    video_flow::IntakeRecord r;
    r.case_id = CaseId("v" + std::to_string(videos_++));
    r.duration_s = 600 + static_cast<double>(rng_() % 3000);
    r.media_uri = "placeholder://" + r.case_id.value;
    r.split = rng_() % 3 == 0 ? "test" : "train";
    r.provenance.country = "country-" + std::to_string(rng_() % 5);
    if (rng_() % 4) r.provenance.device_vendor = "vendor-" + std::to_string(rng_() % 3);
    r.provenance.used_ioc = rng_() % 8 == 0;
    r.provenance.approach = rng_() % 9 == 0 ? Approach::kRobotic : Approach::kLaparoscopic;
    engine_.submit(EntityKind::kVideo, r.case_id.value, pl::VideoRegistered{r});
  }

  void screen() {
    std::vector<CaseId> open;
    for (const auto& [id, v] : state().videos) {
      if (v.state == VideoState::kReceived || v.state == VideoState::kScreening) open.push_back(id);
    }
    const auto* id = pick(open);
    if (!id) return;
    const auto& vc = state().videos.at(*id);
    if (vc.state == VideoState::kReceived) {
      engine_.submit(EntityKind::kVideo, id->value, pl::VideoStep{video_events::ScreeningStarted{}});
      return;
    }
    const auto* prev = vc.preannotation_chain.empty() ? nullptr : &vc.preannotation_chain.back();
    const auto p = random_verdict(static_cast<int>(vc.preannotation_chain.size()) + 1, vc.duration_s,
                                  rng_, prev);
    engine_.submit(EntityKind::kVideo, id->value,
                   pl::VideoStep{video_events::PreannotationSubmitted{p}});
  }

  void reprocess() {
    std::vector<CaseId> waiting;
    for (const auto& [id, v] : state().videos) {
      if (v.state == VideoState::kReprocessing) waiting.push_back(id);
    }
    if (const auto* id = pick(waiting)) {
      engine_.submit(EntityKind::kVideo, id->value, pl::VideoStep{video_events::ReprocessingDone{}});
    }
  }

  void register_annotator() {
    if (annotators_ >= 40) return onboard();
    const auto id = "a" + std::to_string(annotators_++);
    engine_.submit(EntityKind::kAnnotator, id, pl::AnnotatorRegistered{{true, id + "@example.org"}});
  }

  void onboard() {
    namespace ae = annotator_events;
    std::vector<AnnotatorId> ids;
    for (const auto& [id, a] : state().annotators) {
      if (!is_terminal(a.state)) ids.push_back(id);
    }
    const auto* id = pick(ids);
    if (!id) return;
    const auto s = state().annotators.at(*id).state;
    std::vector<AnnotatorEvent> legal;
    const double score = std::uniform_int_distribution<int>(50, 100)(rng_) / 100.0;
    for (const AnnotatorEvent& e :
         {AnnotatorEvent{ae::EligibilityPassed{}}, AnnotatorEvent{ae::EligibilityFailed{}},
          AnnotatorEvent{ae::TrainingStarted{}}, AnnotatorEvent{ae::ExamTaken{score}},
          AnnotatorEvent{ae::QualificationConfirmed{}}, AnnotatorEvent{ae::Activated{}},
          AnnotatorEvent{ae::Paused{}}, AnnotatorEvent{ae::Resumed{}}}) {
      if (is_legal(s, e)) legal.push_back(e);
    }
    if (rng_() % 30 == 0) legal = {ae::DroppedOut{}};
    // Favor progress so that a pool of active annotators builds up.
    if (legal.size() > 1 && std::holds_alternative<ae::EligibilityFailed>(legal[1]) && rng_() % 5) {
      legal.pop_back();
    }
    if (const auto* e = pick(legal)) {
      engine_.submit(EntityKind::kAnnotator, id->value, pl::AnnotatorStep{*e});
    }
  }

  void tick() {
    if (orchestrator::active_annotators(state()).empty() || state().coverage.clips.empty()) return;
    engine_.issue_tick();
  }

  void assess() {
    std::vector<std::pair<AnnotatorId, ClipId>> open;
    for (const auto& [clip, cov] : state().coverage.clips) {
      for (const auto& [a, _] : cov.pending) open.emplace_back(a, clip);
    }
    const auto* o = pick(open);
    if (!o) return tick();
    engine_.submit(EntityKind::kCoverage, orchestrator::kCoverageStream,
                   pl::AssessmentAccepted{random_assessment(o->second, o->first, rng_)});
  }

  void effects() {
    clock_.advance(std::uniform_int_distribution<Timestamp>(kHour, 10 * kDay)(rng_));
    notifier_.failures_left = static_cast<int>(rng_() % 3);
    engine_.run_due_effects();
  }

  void submit_team() {
    evaluation::Submission sub;
    sub.team_id = TeamId("team" + std::to_string(rng_() % 4));
    sub.name = sub.team_id.value;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int n = 0;
    for (const auto& [clip, _] : state().coverage.clips) {
      if (++n > 3) break;
      evaluation::ClipPrediction p{};
      for (auto& f : p) f = {u(rng_), u(rng_), u(rng_)};
      sub.clips.emplace(clip, p);
    }
    engine_.submit(EntityKind::kSubmission, sub.team_id.value, pl::SubmissionReceived{sub});
  }

  // Events the engine must refuse; they exercise the atomic-reject path.
  void illegal_probe() {
    namespace ve = video_events;
    switch (rng_() % 4) {
      case 0:
        engine_.submit(EntityKind::kVideo, "v0", pl::VideoStep{ve::FusionCompleted{}});
        break;
      case 1:
        engine_.submit(EntityKind::kAnnotator, "a0", pl::AnnotatorStep{annotator_events::Resumed{}});
        break;
      case 2: {
        auto a = random_assessment(ClipId("v0-clip"), AnnotatorId("nobody"), rng_);
        engine_.submit(EntityKind::kCoverage, orchestrator::kCoverageStream, pl::AssessmentAccepted{a});
        break;
      }
      default:
        engine_.submit(EntityKind::kVideo, "missing", pl::VideoStep{ve::ScreeningStarted{}});
    }
  }

  std::mt19937_64 rng_;
  orchestrator::MemoryEventStore store_;
  orchestrator::RecordingNotifier notifier_;
  orchestrator::MemoryErrorLog errors_;
  orchestrator::ManualClock clock_;
  orchestrator::Engine engine_;
  int videos_ = 0;
  int annotators_ = 0;
  int rejected_ = 0;
};

}  // namespace cvsops::testkit
