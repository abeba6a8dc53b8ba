#include <gtest/gtest.h>

#include <random>

#include "cvsops/annotator_flow.hpp"
#include "cvsops/video_flow.hpp"
#include "errc.hpp"

using namespace cvsops;
using testkit::error_code;
namespace ve = video_events;
namespace ae = annotator_events;

namespace {

PreAnnotation verdict(const std::string& rater, double t = 1200.0) {
  PreAnnotation p;
  p.rater_id = RaterId(rater);
  p.clipping_timestamp = t;
  return video_flow::with_eligibility(p, 3000.0);
}

VideoCase screening_case() {
  VideoCase vc;
  vc.case_id = CaseId("c1");
  vc.duration_s = 3000.0;
  return video_transition(vc, ve::ScreeningStarted{});
}

}  // namespace

TEST(Eligibility, ReasonsInOrder) {
  PreAnnotation p;
  p.clipping_timestamp = 1000;
  EXPECT_TRUE(video_flow::check_eligibility(p, 2000).eligible);

  p.flags.bailout = true;
  p.flags.not_cholecystectomy = true;
  EXPECT_EQ(video_flow::check_eligibility(p, 2000).reason, ExclusionReason::kNotCholecystectomy);
  p.flags.not_cholecystectomy = false;
  EXPECT_EQ(video_flow::check_eligibility(p, 2000).reason, ExclusionReason::kBailout);
  p.flags.bailout = false;

  p.flags.clipping_observed = false;
  EXPECT_EQ(video_flow::check_eligibility(p, 2000).reason, ExclusionReason::kIncompleteNoClipping);
  p.flags.clipping_observed = true;
  EXPECT_EQ(video_flow::check_eligibility(p, 900).reason, ExclusionReason::kIncompleteNoClipping);

  p.clipping_timestamp = 89;
  EXPECT_EQ(video_flow::check_eligibility(p, 2000).reason, ExclusionReason::kNoContinuous90s);
  p.clipping_timestamp = 90;
  EXPECT_TRUE(video_flow::check_eligibility(p, 2000).eligible);
  p.flags.window_obscured = true;
  EXPECT_EQ(video_flow::check_eligibility(p, 2000).reason, ExclusionReason::kNoContinuous90s);
}

TEST(Adjudication, TwoAgreeingRatersClose) {
  video_flow::AdjudicationChain chain{CaseId("c1"), {}};
  chain = video_flow::submit_preannotation(chain, verdict("r1"));
  EXPECT_EQ(chain.status, video_flow::ChainStatus::kNeedsRater);
  chain = video_flow::submit_preannotation(chain, verdict("r2", 1201.5));
  EXPECT_EQ(chain.status, video_flow::ChainStatus::kConcordant);
  EXPECT_EQ(chain.final_metadata()->rater_id.value, "r2");
}

TEST(Adjudication, ThirdRaterBreaksTie) {
  video_flow::AdjudicationChain chain{CaseId("c1"), {}};
  chain = video_flow::submit_preannotation(chain, verdict("r1", 1000));
  chain = video_flow::submit_preannotation(chain, verdict("r2", 1300));
  EXPECT_EQ(chain.status, video_flow::ChainStatus::kNeedsRater);
  chain = video_flow::submit_preannotation(chain, verdict("r3", 1300));
  EXPECT_EQ(chain.status, video_flow::ChainStatus::kConcordant);
  EXPECT_EQ(chain.entries.size(), 3u);
}

TEST(Adjudication, OnlyConsecutivePairsCount) {
  video_flow::AdjudicationChain chain{CaseId("c1"), {}};
  chain = video_flow::submit_preannotation(chain, verdict("r1", 1000));
  chain = video_flow::submit_preannotation(chain, verdict("r2", 1300));
  chain = video_flow::submit_preannotation(chain, verdict("r3", 1000));
  EXPECT_EQ(chain.status, video_flow::ChainStatus::kNeedsRater);
}

TEST(Adjudication, TimestampToleranceIsInclusive) {
  EXPECT_TRUE(video_flow::concordant(verdict("a", 100), verdict("b", 102)));
  EXPECT_FALSE(video_flow::concordant(verdict("a", 100), verdict("b", 102.5)));
  auto b = verdict("b", 100);
  b.used_icg = true;
  EXPECT_FALSE(video_flow::concordant(verdict("a", 100), b));
}

TEST(Adjudication, Errors) {
  video_flow::AdjudicationChain chain{CaseId("c1"), {}};
  chain = video_flow::submit_preannotation(chain, verdict("r1"));
  EXPECT_EQ(error_code([&] { video_flow::submit_preannotation(chain, verdict("r1")); }),
            Errc::kDuplicateRater);
  chain = video_flow::submit_preannotation(chain, verdict("r2"));
  EXPECT_EQ(error_code([&] { video_flow::submit_preannotation(chain, verdict("r3")); }),
            Errc::kChainClosed);
}

TEST(VideoLifecycle, HappyPath) {
  auto vc = screening_case();
  vc = video_transition(vc, ve::PreannotationSubmitted{verdict("r1")});
  vc = video_transition(vc, ve::ConcordanceReached{verdict("r2"), false});
  EXPECT_EQ(vc.state, VideoState::kQualified);
  ASSERT_TRUE(vc.final_metadata);
  const auto clip = video_flow::extract_clip(vc);
  EXPECT_DOUBLE_EQ(clip.window_start_s, 1110.0);
  EXPECT_DOUBLE_EQ(clip.window_end_s, 1200.0);
  EXPECT_EQ(clip.annotated_frame_indices.size(), 18u);
  EXPECT_EQ(clip.annotated_frame_indices.back(), 85);
  vc = video_transition(vc, ve::ClipExtracted{clip});
  vc = video_transition(vc, ve::AnnotationStarted{});
  vc = video_transition(vc, ve::AnnotationCompleted{});
  vc = video_transition(vc, ve::FusionCompleted{});
  EXPECT_EQ(vc.state, VideoState::kFused);
}

TEST(VideoLifecycle, ExclusionAndReprocessing) {
  auto excluded = screening_case();
  auto no = verdict("r1");
  no.flags.bailout = true;
  no = video_flow::with_eligibility(no, 3000);
  excluded = video_transition(excluded, ve::ConcordanceReached{no, false});
  EXPECT_EQ(excluded.state, VideoState::kExcluded);
  EXPECT_EQ(excluded.exclusion_reason, ExclusionReason::kBailout);
  EXPECT_FALSE(excluded.final_metadata);

  auto blur = video_transition(screening_case(), ve::ConcordanceReached{verdict("r1"), true});
  EXPECT_EQ(blur.state, VideoState::kReprocessing);
  EXPECT_FALSE(blur.final_metadata);
  blur = video_transition(blur, ve::ReprocessingDone{});
  EXPECT_EQ(blur.state, VideoState::kQualified);
  EXPECT_TRUE(blur.final_metadata);
}

TEST(VideoLifecycle, IllegalEventsRejected) {
  VideoCase vc;
  vc.case_id = CaseId("c");
  EXPECT_EQ(error_code([&] { video_transition(vc, ve::FusionCompleted{}); }),
            Errc::kIllegalTransition);
  EXPECT_EQ(error_code([&] { video_flow::extract_clip(vc); }), Errc::kNotQualified);

  // Screening never qualifies such a case; a hand-built one still fails safely.
  auto early = screening_case();
  early.state = VideoState::kQualified;
  early.final_metadata = verdict("r1", 60);
  EXPECT_EQ(error_code([&] { video_flow::extract_clip(early); }), Errc::kWindowUnderflow);
}

TEST(AnnotatorLifecycle, ExamThreshold) {
  Annotator a;
  a = annotator_transition(a, ae::EligibilityPassed{});
  a = annotator_transition(a, ae::TrainingStarted{});
  auto passed = annotator_transition(a, ae::ExamTaken{0.80});
  EXPECT_EQ(passed.state, AnnotatorState::kPassed);
  EXPECT_EQ(annotator_transition(a, ae::ExamTaken{0.75}).state, AnnotatorState::kPassed);
  EXPECT_EQ(annotator_transition(a, ae::ExamTaken{0.7499}).state, AnnotatorState::kFailed);
  EXPECT_EQ(error_code([&] { annotator_transition(a, ae::ExamTaken{1.2}); }), Errc::kInvalidInput);

  passed = annotator_transition(passed, ae::QualificationConfirmed{});
  passed = annotator_transition(passed, ae::Activated{});
  passed = annotator_transition(passed, ae::Paused{});
  passed = annotator_transition(passed, ae::Resumed{});
  EXPECT_EQ(passed.state, AnnotatorState::kActive);
  passed = annotator_transition(passed, ae::DroppedOut{});
  EXPECT_EQ(passed.dropped_from, AnnotatorState::kActive);
  EXPECT_EQ(reached_depth(passed), 5);
  EXPECT_EQ(error_code([&] { annotator_transition(passed, ae::Resumed{}); }),
            Errc::kIllegalTransition);
}

TEST(AnnotatorLifecycle, NoShortcutToActive) {
  Annotator a;
  for (const AnnotatorEvent& e : {AnnotatorEvent{ae::Activated{}}, AnnotatorEvent{ae::ExamTaken{1.0}},
                                  AnnotatorEvent{ae::QualificationConfirmed{}}}) {
    EXPECT_FALSE(is_legal(a.state, e));
  }
}

TEST(Exam, GradedPerCell) {
  annotator_flow::CompetencyExam exam{"e", {}};
  annotator_flow::ExamAnswers answers;
  for (int i = 0; i < 4; ++i) {
    exam.items.push_back({"q" + std::to_string(i), {1, 0, 1}});
    answers["q" + std::to_string(i)] = {1, 0, 1};
  }
  answers["q0"] = {0, 1, 0};  // 9 of 12 cells right
  auto r = annotator_flow::grade_exam(answers, exam);
  EXPECT_EQ(r.matching_cells, 9);
  EXPECT_DOUBLE_EQ(r.score, 0.75);
  EXPECT_EQ(r.verdict, annotator_flow::Verdict::kPass);

  answers["q1"] = {0, 0, 1};
  EXPECT_EQ(annotator_flow::grade_exam(answers, exam).verdict, annotator_flow::Verdict::kFail);
  answers.erase("q3");
  EXPECT_EQ(error_code([&] { annotator_flow::grade_exam(answers, exam); }),
            Errc::kIncompleteAnswers);
}

TEST(Funnel, CumulativeCounts) {
  auto walk = [](std::initializer_list<AnnotatorEvent> events) {
    Annotator a;
    for (const auto& e : events) a = annotator_transition(a, e);
    return a;
  };
  std::vector<Annotator> pool{
      walk({}),
      walk({ae::EligibilityFailed{}}),
      walk({ae::DroppedOut{}}),
      walk({ae::EligibilityPassed{}, ae::DroppedOut{}}),
      walk({ae::EligibilityPassed{}, ae::TrainingStarted{}, ae::ExamTaken{0.5}}),
      walk({ae::EligibilityPassed{}, ae::TrainingStarted{}, ae::ExamTaken{0.9}}),
      walk({ae::EligibilityPassed{}, ae::TrainingStarted{}, ae::ExamTaken{0.9},
            ae::QualificationConfirmed{}, ae::Activated{}, ae::DroppedOut{}}),
  };
  const auto r = annotator_flow::funnel_report(pool);
  EXPECT_EQ(r.contacted, 7);
  EXPECT_EQ(r.eligible, 4);
  EXPECT_EQ(r.exam_taken, 3);
  EXPECT_EQ(r.passed, 2);
  EXPECT_EQ(r.qualified, 1);
  EXPECT_EQ(r.excluded, 1);
  EXPECT_EQ(r.failed, 1);
  EXPECT_EQ(r.awaiting_activation, 1);
  EXPECT_EQ(r.dropped, 3);
}

TEST(EventJson, RoundTrip) {
  const VideoEvent v = ve::PreannotationSubmitted{verdict("r9", 777)};
  EXPECT_EQ(video_event_from_json(event_to_json(v)), v);
  const AnnotatorEvent a = ae::ExamTaken{0.8};
  EXPECT_EQ(annotator_event_from_json(event_to_json(a)), a);
  EXPECT_ANY_THROW(video_event_from_json(json{{"type", "NOPE"}}));
}
