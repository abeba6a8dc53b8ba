#include <gtest/gtest.h>

#include <cmath>

#include "binomial.hpp"
#include "cvsops/simulator.hpp"
#include "errc.hpp"

using namespace cvsops;
using namespace cvsops::simulator;
using testkit::error_code;

namespace {

SimConfig small_config(int videos = 120, int annotators = 6) {
  auto c = paper_defaults();
  c.n_videos = videos;
  c.n_annotators = annotators;
  return c;
}

}  // namespace

TEST(Numerics, ClampedNormalCalibration) {
  const auto latent = calibrate_clamped_normal(0.64, 0.28);
  const auto back = clamped_normal_moments(latent.mean, latent.sd);
  EXPECT_NEAR(back.mean, 0.64, 1e-6);
  EXPECT_NEAR(back.sd, 0.28, 1e-6);
}

TEST(Numerics, QuotaCountsSumAndFloor) {
  const auto q = quota_counts({0.7, 0.2, 0.1, 1e-6}, 100);
  EXPECT_EQ(std::accumulate(q.begin(), q.end(), 0), 100);
  EXPECT_EQ(q[3], 1);
  EXPECT_GE(q[0], q[1]);
}

TEST(Numerics, AgreementAlgebra) {
  for (double m : {0.0, 0.05, 0.2, 0.5}) {
    double brute = 0.0;  // P(at least two of three flip)
    for (int mask = 0; mask < 8; ++mask) {
      const int flips = __builtin_popcount(mask);
      if (flips >= 2) brute += std::pow(m, flips) * std::pow(1 - m, 3 - flips);
    }
    EXPECT_NEAR(majority_flip(m), brute, 1e-12);
  }
  for (double full : {0.5, 0.74, 0.8, 1.0}) {
    const double e = cell_flip_for(full);
    EXPECT_NEAR(std::pow(1 - e, 3) + std::pow(e, 3), full, 1e-12);
  }
  EXPECT_EQ(error_code([] { cell_flip_for(0.2); }), Errc::kInvalidConfig);
}

TEST(Config, ValidationRejectsBadValues) {
  auto c = paper_defaults();
  EXPECT_NO_THROW(validate(c));
  c.discordance_rate = 1.5;
  EXPECT_EQ(error_code([&] { validate(c); }), Errc::kInvalidConfig);
  c = paper_defaults();
  c.splits.erase("test");
  EXPECT_EQ(error_code([&] { validate(c); }), Errc::kInvalidConfig);
  c = paper_defaults();
  c.splits["train"].device_weights[0] += 0.1;
  EXPECT_EQ(error_code([&] { validate(c); }), Errc::kInvalidConfig);
}

TEST(Config, JsonRoundTripAndOverrides) {
  const auto c = paper_defaults();
  const json j = c;
  const auto back = j.get<SimConfig>();
  EXPECT_EQ(json(back), j);
  const auto partial = json{{"seed", 5}, {"n_videos", 50}}.get<SimConfig>();
  EXPECT_EQ(partial.seed, 5u);
  EXPECT_EQ(partial.n_videos, 50);
  EXPECT_EQ(partial.splits.at("train").countries, 23);
  EXPECT_ANY_THROW((json{{"test_fraction", 2.0}}.get<SimConfig>()));
}

TEST(Pool, DeterministicPerSeed) {
  const auto a = generate_pool(small_config());
  const auto b = generate_pool(small_config());
  EXPECT_EQ(a.assessments, b.assessments);
  auto other = small_config();
  other.seed += 1;
  EXPECT_NE(generate_pool(other).assessments, a.assessments);
}

TEST(Pool, ShapeAndQuotas) {
  const auto pool = generate_pool(small_config(200));
  EXPECT_EQ(pool.videos.size(), 200u);
  EXPECT_EQ(pool.assessments.size(), 600u);
  EXPECT_EQ(pool.annotators.size(), 6u);
  const auto stats = fusion::dataset_stats(pool_clips(pool));
  EXPECT_EQ(stats.by_split.at("test").videos, 60u);
  EXPECT_EQ(stats.by_split.at("train").videos, 140u);
  EXPECT_EQ(stats.by_split.at("train").unknown_device,
            static_cast<std::size_t>(std::lround(156.0 / 700.0 * 140)));
  for (const auto& a : pool.assessments) EXPECT_NO_THROW(validate(a));
  for (const auto& v : pool.videos) {
    EXPECT_GE(v.preannotations.size(), 2u);
    EXPECT_LE(v.preannotations.size(), 3u);
  }
}

TEST(Pool, VideoLevelRatesNearTargets) {
  const auto pool = generate_pool(small_config(1000, 20));
  const auto stats = fusion::dataset_stats(pool_clips(pool));
  const double targets[] = {0.413, 0.600, 0.395};
  for (int k = 0; k < 3; ++k) {
    const auto [lo, hi] = testkit::binomial_interval(1000, targets[k]);
    EXPECT_GE(stats.all.video_level_achieved[k], lo);
    EXPECT_LE(stats.all.video_level_achieved[k], hi);
  }
  EXPECT_NEAR(stats.by_split.at("train").confidence.mean, 0.64, 0.02);
  // 300 test clips: four standard errors of the assessment mean.
  const auto& test = stats.by_split.at("test");
  EXPECT_NEAR(test.confidence.mean, 0.58, 4 * 0.27 / std::sqrt(3.0 * test.videos));
}

TEST(Funnel, ExpectedCountsFollowTheModel) {
  const FunnelModel m;
  const double eligible = m.contacted * (1 - m.p_ineligible) * m.p_continue_contacted;
  EXPECT_NEAR(eligible, 71, 1e-9);
  EXPECT_NEAR(eligible * m.p_exam_given_eligible, 67, 1e-9);
  EXPECT_NEAR(eligible * m.p_exam_given_eligible * m.p_pass, 27, 1e-9);
  EXPECT_NEAR(eligible * m.p_exam_given_eligible * m.p_pass * m.p_activate_given_pass, 20, 1e-9);
}

TEST(Funnel, ExamVerdictsComeFromGrading) {
  const auto pool = simulate_funnel(FunnelModel{}, 77);
  ASSERT_EQ(pool.size(), 106u);
  for (const auto& a : pool) {
    if (!a.exam_score) continue;
    EXPECT_EQ(*a.exam_score >= 0.75, reached_depth(a) >= 4) << a.annotator_id.value;
  }
  const auto r = annotator_flow::funnel_report(pool);
  EXPECT_GE(r.eligible, r.exam_taken);
  EXPECT_GE(r.exam_taken, r.passed);
  EXPECT_GE(r.passed, r.qualified);
}

TEST(Campaign, FullCoverageWithoutDropout) {
  const auto cfg = small_config(100, 5);
  const auto pool = generate_pool(cfg);
  const auto tr = run_campaign(pool, cfg, {});
  EXPECT_EQ(tr.ticks_to_full_coverage, scheduler::tick_bound(100, 5));
  EXPECT_EQ(tr.fused, 100);
  EXPECT_EQ(tr.assessments, 300);
  EXPECT_EQ(orchestrator::replay(tr.log), tr.final_state);
  for (const auto& [_, v] : tr.final_state.videos) EXPECT_EQ(v.state, VideoState::kFused);
}

TEST(Campaign, SlowAnnotatorsGetReminders) {
  const auto cfg = small_config(60, 4);
  CampaignPolicy policy;
  policy.completion_rate = 0.5;
  const auto tr = run_campaign(generate_pool(cfg), cfg, policy);
  int reminders = 0;
  for (const auto& t : tr.ticks) reminders += t.reminders;
  EXPECT_GT(reminders, 0);
  EXPECT_GT(tr.ticks_to_full_coverage, scheduler::tick_bound(60, 4));
}

TEST(Campaign, DeadlockReportsStarvingClips) {
  const auto cfg = small_config(100, 3);
  CampaignPolicy policy;
  policy.completion_rate = 0.2;
  policy.dropout_rate = 0.5;
  try {
    run_campaign(generate_pool(cfg), cfg, policy);
    FAIL() << "expected a deadlock";
  } catch (const DeadlockDetected& e) {
    EXPECT_EQ(e.code(), Errc::kDeadlockDetected);
    EXPECT_FALSE(e.starving.empty());
  }
}

TEST(Submissions, ExpertSoftScoresNearPerfect) {
  const auto cfg = small_config(100, 5);
  const auto pool = generate_pool(cfg);
  const auto gt = fusion::fuse_all(pool.assessments);
  const auto sub = synthetic_submission("t", gt, 0.0, 1);
  std::vector<ClipId> ids;
  for (const auto& [id, _] : gt) ids.push_back(id);
  EXPECT_DOUBLE_EQ(evaluation::brier_score(sub, gt, ids).mean, 0.0);
  EXPECT_GT(evaluation::map_score(sub, gt, ids).mean, 0.95);
}
