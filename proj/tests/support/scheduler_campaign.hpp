#pragma once

// Randomized scheduler campaigns driven directly through the pure scheduler
// functions, with every invariant checked after each tick.

#include <random>
#include <set>
#include <string>
#include <vector>

#include "cvsops/scheduler.hpp"

namespace cvsops::testkit {

struct CampaignSpec {
  int clips = 100;
  int annotators = 5;
  double dropout = 0.0;     // per annotator per tick
  double completion = 1.0;  // share of open work done between ticks
  std::uint64_t seed = 1;
};

struct CampaignOutcome {
  std::vector<std::string> violations;
  int ticks = 0;
  bool covered = false;
};

inline CampaignSpec random_spec(std::mt19937_64& rng) {
  CampaignSpec s;
  s.clips = std::uniform_int_distribution<int>(1, 600)(rng);
  s.annotators = std::uniform_int_distribution<int>(3, 25)(rng);
  const double dropouts[] = {0.0, 0.0, 0.02, 0.1, 0.3};
  s.dropout = dropouts[rng() % 5];
  s.completion = s.dropout == 0.0 && rng() % 2 ? 1.0 : std::uniform_real_distribution<double>(0.3, 1.0)(rng);
  s.seed = rng();
  return s;
}

inline CampaignOutcome run_scheduler_campaign(const CampaignSpec& spec, int max_ticks = 2000) {
  using namespace scheduler;
  const SchedulerConfig cfg;
  CampaignOutcome out;
  auto fail = [&](const std::string& what) {
    if (out.violations.size() < 10) out.violations.push_back(what);
  };

  CoverageState cov;
  for (int c = 0; c < spec.clips; ++c) cov.add_clip(ClipId("clip" + std::to_string(c)));
  std::vector<AnnotatorId> active;
  for (int a = 0; a < spec.annotators; ++a) active.emplace_back("a" + std::to_string(a));
  std::set<AnnotatorId> dropped;
  std::set<std::pair<AnnotatorId, ClipId>> seen;
  std::mt19937_64 rng(spec.seed ^ 0x5eedULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Timestamp now = 0;

  for (int t = 0; t < max_ticks; ++t) {
    revoke_dropped(cov, dropped, now, cfg);
    const auto batch = plan_tick(cov, active, now, spec.seed, cfg);
    if (!(plan_tick(cov, active, now, spec.seed, cfg) == batch)) fail("non-deterministic plan");

    std::map<AnnotatorId, int> per_annotator;
    for (const auto& a : batch.assignments) {
      if (++per_annotator[a.annotator_id] > cfg.bucket_size) fail("bucket exceeded");
      if (!seen.emplace(a.annotator_id, a.clip_id).second) {
        fail("repeat " + a.annotator_id.value + "/" + a.clip_id.value);
      }
      if (dropped.count(a.annotator_id)) fail("dropped annotator assigned");
    }
    apply_batch(cov, batch, cfg);
    for (const auto& [id, c] : cov.clips) {
      if (c.assigned_count() > cfg.annotators_per_clip) fail("over-assigned " + id.value);
    }
    for (const auto& [a, n] : cov.pending_per_annotator()) {
      if (n > cfg.bucket_size) fail("more than a bucket outstanding for " + a.value);
    }
    ++out.ticks;

    for (auto& [id, c] : cov.clips) {
      std::vector<AnnotatorId> open;
      for (const auto& [a, _] : c.pending) {
        if (!dropped.count(a) && u(rng) < spec.completion) open.push_back(a);
      }
      for (const auto& a : open) {
        Assessment as;
        as.clip_id = id;
        as.annotator_id = a;
        accept_assessment(cov, {a, id, 0}, as, cfg);
      }
    }
    if (cov.fully_covered(cfg.annotators_per_clip)) {
      out.covered = true;
      break;
    }
    for (auto it = active.begin(); it != active.end();) {
      if (u(rng) < spec.dropout) {
        dropped.insert(*it);
        it = active.erase(it);
      } else {
        ++it;
      }
    }
    if (batch.assignments.empty() && cov.pending_per_annotator().empty()) {
      break;  // starved: nobody left who can finish the remaining clips
    }
    now += cfg.cadence;
  }
  return out;
}

// Smallest tick count that can place 3 * clips assignments at bucket_size
// per annotator per tick.
inline int coverage_tick_bound(int clips, int annotators, int bucket = 20) {
  const int slots = 3 * clips;
  const int per_tick = bucket * annotators;
  return (slots + per_tick - 1) / per_tick;
}

}  // namespace cvsops::testkit
