#include <gtest/gtest.h>

#include "cvsops/scheduler.hpp"
#include "errc.hpp"
#include "scheduler_campaign.hpp"

using namespace cvsops;
using namespace cvsops::scheduler;
using testkit::error_code;

namespace {

CoverageState clips(int n) {
  CoverageState c;
  for (int i = 0; i < n; ++i) c.add_clip(ClipId("clip" + std::to_string(i)));
  return c;
}

std::vector<AnnotatorId> people(int n) {
  std::vector<AnnotatorId> out;
  for (int i = 0; i < n; ++i) out.emplace_back("a" + std::to_string(i));
  return out;
}

Assessment blank(const ClipId& c, const AnnotatorId& a) {
  Assessment x;
  x.clip_id = c;
  x.annotator_id = a;
  return x;
}

}  // namespace

TEST(PlanTick, FillsBucketsLeastCoveredFirst) {
  auto cov = clips(100);
  const auto batch = plan_tick(cov, people(3), 1000, 7);
  EXPECT_EQ(batch.assignments.size(), 60u);
  std::map<AnnotatorId, int> per;
  for (const auto& a : batch.assignments) {
    ++per[a.annotator_id];
    EXPECT_EQ(a.due_at, 1000 + 14 * kDay);
  }
  for (const auto& [_, n] : per) EXPECT_EQ(n, 20);
  apply_batch(cov, batch);
  // Least covered first: 60 distinct clips get one annotator each.
  EXPECT_EQ(coverage_histogram(cov)[0], 100);
  int touched = 0;
  for (const auto& [_, c] : cov.clips) touched += !c.pending.empty();
  EXPECT_EQ(touched, 60);
}

TEST(PlanTick, DeterministicPerSeed) {
  const auto cov = clips(50);
  EXPECT_EQ(plan_tick(cov, people(4), 0, 11), plan_tick(cov, people(4), 0, 11));
  EXPECT_NE(plan_tick(cov, people(4), 0, 11), plan_tick(cov, people(4), 0, 12));
  auto shuffled = people(4);
  std::reverse(shuffled.begin(), shuffled.end());
  EXPECT_EQ(plan_tick(cov, shuffled, 0, 11), plan_tick(cov, people(4), 0, 11));
}

TEST(PlanTick, TopsUpOutstandingWork) {
  auto cov = clips(100);
  run_tick(cov, people(1), 0, 1);
  EXPECT_TRUE(plan_tick(cov, people(1), kDay, 1).assignments.empty());
  const auto& [first, c] = *std::find_if(cov.clips.begin(), cov.clips.end(),
                                         [](const auto& kv) { return !kv.second.pending.empty(); });
  accept_assessment(cov, {AnnotatorId("a0"), first, 0}, blank(first, AnnotatorId("a0")));
  EXPECT_EQ(plan_tick(cov, people(1), kDay, 1).assignments.size(), 1u);
}

TEST(PlanTick, NeverRepeatsOrOverfills) {
  auto cov = clips(4);
  for (int t = 0; t < 10; ++t) run_tick(cov, people(5), t * kDay, 3);
  for (const auto& [_, c] : cov.clips) {
    EXPECT_EQ(c.assigned_count(), 3);
    EXPECT_EQ(c.ever_assigned.size(), 3u);
  }
}

TEST(ApplyBatch, RejectsStaleOrInvalidBatches) {
  auto cov = clips(3);
  const auto batch = plan_tick(cov, people(2), 0, 1);
  const auto before = cov;
  apply_batch(cov, batch);
  EXPECT_EQ(error_code([&] { apply_batch(cov, batch); }), Errc::kSequenceGap);

  AssignmentBatch twice{cov.next_tick, 0, batch.assignments};
  const auto snapshot = cov;
  EXPECT_EQ(error_code([&] { apply_batch(cov, twice); }), Errc::kInvalidInput);
  EXPECT_EQ(cov, snapshot);

  AssignmentBatch unknown{cov.next_tick, 0, {{AnnotatorId("a9"), ClipId("nope"), 0}}};
  EXPECT_EQ(error_code([&] { apply_batch(cov, unknown); }), Errc::kMissingClip);
  (void)before;
}

TEST(Accept, CompletesAfterThree) {
  auto cov = clips(1);
  run_tick(cov, people(3), 0, 1);
  const ClipId id("clip0");
  AcceptResult last;
  for (const auto& a : people(3)) last = accept_assessment(cov, {a, id, 0}, blank(id, a));
  EXPECT_TRUE(last.clip_fully_annotated);
  EXPECT_TRUE(cov.fully_covered());
  EXPECT_EQ(error_code([&] {
              accept_assessment(cov, {AnnotatorId("a0"), id, 0}, blank(id, AnnotatorId("a0")));
            }),
            Errc::kDuplicateAssessment);
  EXPECT_EQ(error_code([&] {
              accept_assessment(cov, {AnnotatorId("zz"), id, 0}, blank(id, AnnotatorId("zz")));
            }),
            Errc::kUnknownAssignment);
}

TEST(Revoke, OnlyAfterOneCadence) {
  auto cov = clips(10);
  run_tick(cov, people(3), 0, 1);
  const std::set<AnnotatorId> gone{AnnotatorId("a1")};
  EXPECT_TRUE(revoke_dropped(cov, gone, 13 * kDay).empty());
  const auto revoked = revoke_dropped(cov, gone, 14 * kDay);
  EXPECT_EQ(revoked.size(), 10u);
  for (const auto& [_, c] : cov.clips) {
    EXPECT_FALSE(c.pending.count(AnnotatorId("a1")));
    EXPECT_TRUE(c.ever_assigned.count(AnnotatorId("a1")));
  }
  // The revoked slots go to someone else, never back to a1.
  const auto next = plan_tick(cov, {AnnotatorId("a1"), AnnotatorId("a3")}, 14 * kDay, 1);
  for (const auto& a : next.assignments) EXPECT_EQ(a.annotator_id.value, "a3");
}

TEST(Overdue, GroupedByBatch) {
  auto cov = clips(30);
  run_tick(cov, people(1), 0, 1);
  run_tick(cov, people(2), kDay, 1);
  const auto due = overdue(cov, 15 * kDay);
  ASSERT_EQ(due.size(), 2u);
  EXPECT_EQ(due[0].annotator_id.value, "a0");
  EXPECT_EQ(due[0].clips.size(), 20u);
  EXPECT_EQ(due[1].annotator_id.value, "a1");
  EXPECT_TRUE(overdue(cov, 13 * kDay).empty());
}

TEST(BlindPayload, CarriesNoProvenance) {
  QualifiedClip clip;
  clip.clip_id = ClipId("x");
  clip.case_id = CaseId("case-secret");
  clip.media_uri = "m";
  clip.annotated_frame_indices = annotated_frame_grid();
  const json j = blind_payload(clip);
  EXPECT_EQ(j.size(), 3u);
  EXPECT_FALSE(j.dump().find("case-secret") != std::string::npos);
}

TEST(BatchLines, RoundTrip) {
  auto cov = clips(5);
  const auto b = plan_tick(cov, people(2), 99, 4);
  EXPECT_EQ(batch_from_lines(batch_to_lines(b)), b);
}

TEST(Campaign, SmallRandomSuite) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 40; ++i) {
    const auto spec = testkit::random_spec(rng);
    const auto out = testkit::run_scheduler_campaign(spec);
    EXPECT_TRUE(out.violations.empty()) << out.violations.front();
    if (spec.dropout == 0.0 && spec.completion == 1.0) {
      EXPECT_TRUE(out.covered);
      EXPECT_LE(out.ticks, testkit::coverage_tick_bound(spec.clips, spec.annotators));
    }
  }
}

TEST(Campaign, TickBoundIsTight) {
  // 1000 clips, 20 annotators: 3000 slots at 400 per tick.
  testkit::CampaignSpec spec{1000, 20, 0.0, 1.0, 5};
  const auto out = testkit::run_scheduler_campaign(spec);
  EXPECT_TRUE(out.covered);
  EXPECT_EQ(out.ticks, 8);
  EXPECT_EQ(tick_bound(1000, 20), 8);
}
