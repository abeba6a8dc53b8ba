#pragma once

// Paced, blinded assignment of qualified clips to active annotators with
// exactly-three coverage per clip.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "cvsops/domain.hpp"

namespace cvsops::scheduler {

struct SchedulerConfig {
  int bucket_size = 20;
  Timestamp cadence = 14 * kDay;
  int annotators_per_clip = kAnnotatorsPerClip;
};

struct Assignment {
  AnnotatorId annotator_id;
  ClipId clip_id;
  Timestamp due_at = 0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

struct AssignmentBatch {
  std::int64_t tick_id = 0;
  Timestamp issued_at = 0;
  std::vector<Assignment> assignments;

  friend bool operator==(const AssignmentBatch&, const AssignmentBatch&) = default;
};

struct PendingAssignment {
  std::int64_t tick_id = 0;
  Timestamp issued_at = 0;
  Timestamp due_at = 0;

  friend bool operator==(const PendingAssignment&, const PendingAssignment&) = default;
};

struct ClipCoverage {
  std::map<AnnotatorId, PendingAssignment> pending;
  std::set<AnnotatorId> completed;
  std::set<AnnotatorId> ever_assigned;  // survives revocation

  int assigned_count() const { return static_cast<int>(pending.size() + completed.size()); }
  int completed_count() const { return static_cast<int>(completed.size()); }

  friend bool operator==(const ClipCoverage&, const ClipCoverage&) = default;
};

struct CoverageState {
  std::map<ClipId, ClipCoverage> clips;
  std::int64_t next_tick = 0;

  void add_clip(const ClipId& id) { clips.try_emplace(id); }

  bool fully_covered(int per_clip = kAnnotatorsPerClip) const {
    return std::all_of(clips.begin(), clips.end(), [per_clip](const auto& kv) {
      return kv.second.completed_count() >= per_clip;
    });
  }

  std::map<AnnotatorId, int> pending_per_annotator() const {
    std::map<AnnotatorId, int> out;
    for (const auto& [_, cov] : clips) {
      for (const auto& [a, __] : cov.pending) ++out[a];
    }
    return out;
  }

  friend bool operator==(const CoverageState&, const CoverageState&) = default;
};

// Ticks needed for full coverage of `clips` by `annotators` who complete
// every bucket.
constexpr std::int64_t tick_bound(std::int64_t clips, std::int64_t annotators,
                                  int bucket_size = 20, int per_clip = kAnnotatorsPerClip) {
  const std::int64_t slots = per_clip * clips;
  const std::int64_t per_tick = bucket_size * annotators;
  return per_tick == 0 ? 0 : (slots + per_tick - 1) / per_tick;
}

inline std::uint64_t tick_seed(std::uint64_t seed, std::int64_t tick_id) {
  // splitmix64 of (seed, tick)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(tick_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Least-covered-first with a seeded shuffle within each coverage level. Slots
// are filled one assignee at a time in that order; each is placed by an
// augmenting-path search that never takes an assignee from an earlier slot.
// Each annotator is topped up to `bucket_size` outstanding clips. Pure: the
// result depends only on (coverage, active set, now, seed).
inline AssignmentBatch plan_tick(const CoverageState& coverage,
                                 std::vector<AnnotatorId> active, Timestamp now,
                                 std::uint64_t seed, const SchedulerConfig& cfg = {}) {
  AssignmentBatch batch{coverage.next_tick, now, {}};
  std::sort(active.begin(), active.end());
  active.erase(std::unique(active.begin(), active.end()), active.end());
  if (active.empty() || coverage.clips.empty()) return batch;

  std::mt19937_64 rng(tick_seed(seed, coverage.next_tick));

  std::vector<const ClipId*> ids;
  std::vector<const ClipCoverage*> cov;
  for (const auto& [id, c] : coverage.clips) {
    if (c.assigned_count() < cfg.annotators_per_clip) {
      ids.push_back(&id);
      cov.push_back(&c);
    }
  }
  const int n = static_cast<int>(ids.size());
  std::vector<int> tie_rank(n);
  std::iota(tie_rank.begin(), tie_rank.end(), 0);
  std::shuffle(tie_rank.begin(), tie_rank.end(), rng);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return std::pair(cov[x]->assigned_count(), tie_rank[x]) <
           std::pair(cov[y]->assigned_count(), tie_rank[y]);
  });

  std::shuffle(active.begin(), active.end(), rng);
  const int na = static_cast<int>(active.size());
  const auto pending = coverage.pending_per_annotator();
  std::vector<int> budget(na);
  int spare = 0;
  for (int a = 0; a < na; ++a) {
    auto it = pending.find(active[a]);
    budget[a] = std::max(0, cfg.bucket_size - (it == pending.end() ? 0 : it->second));
    spare += budget[a];
  }

  // eligible[a][c]: a has never held c. taken[a][c]: assigned in this plan.
  std::vector<std::vector<char>> eligible(na, std::vector<char>(n));
  std::vector<std::vector<char>> taken(na, std::vector<char>(n));
  for (int a = 0; a < na; ++a) {
    for (int c = 0; c < n; ++c) eligible[a][c] = !cov[c]->ever_assigned.count(active[a]);
  }
  std::vector<std::vector<int>> holders(n);

  // Multi-source BFS from annotators with budget left; alternates
  // annotator -> unheld clip -> annotator holding that clip.
  std::vector<int> clip_from(n), annot_from(na);
  std::vector<char> dead(n);  // unreachable clips stay unreachable
  auto augment = [&](int target) {
    std::fill(clip_from.begin(), clip_from.end(), -1);
    std::fill(annot_from.begin(), annot_from.end(), -2);
    std::vector<int> queue;
    for (int a = 0; a < na; ++a) {
      if (budget[a] > 0) {
        annot_from[a] = -1;
        queue.push_back(a);
      }
    }
    for (std::size_t q = 0; q < queue.size() && clip_from[target] < 0; ++q) {
      const int a = queue[q];
      for (int c = 0; c < n; ++c) {
        if (clip_from[c] >= 0 || dead[c] || !eligible[a][c] || taken[a][c]) continue;
        clip_from[c] = a;
        if (c == target) break;
        for (int b : holders[c]) {
          if (annot_from[b] == -2) {
            annot_from[b] = c;
            queue.push_back(b);
          }
        }
      }
    }
    if (clip_from[target] < 0) {
      for (int c = 0; c < n; ++c) {
        if (clip_from[c] < 0) dead[c] = 1;
      }
      return false;
    }
    for (int c = target;;) {
      const int a = clip_from[c];
      taken[a][c] = 1;
      holders[c].push_back(a);
      const int prev = annot_from[a];
      if (prev < 0) {
        --budget[a];
        break;
      }
      taken[a][prev] = 0;
      auto& h = holders[prev];
      h.erase(std::find(h.begin(), h.end(), a));
      c = prev;
    }
    --spare;
    return true;
  };

  // One unit per missing assignee, ordered by the coverage it would lift.
  std::vector<std::pair<int, int>> units;  // (level, position in order)
  for (int i = 0; i < n; ++i) {
    for (int k = cov[order[i]]->assigned_count(); k < cfg.annotators_per_clip; ++k) {
      units.emplace_back(k, i);
    }
  }
  std::sort(units.begin(), units.end());
  for (const auto& [_, i] : units) {
    if (spare == 0) break;
    if (!dead[order[i]]) augment(order[i]);
  }

  for (int a = 0; a < na; ++a) {
    for (int slot : order) {
      if (taken[a][slot]) batch.assignments.push_back({active[a], *ids[slot], now + cfg.cadence});
    }
  }
  return batch;
}

// Records a planned batch. Rejects batches that would break coverage
// invariants (e.g. a stale plan applied twice); nothing changes on error.
inline void apply_batch(CoverageState& coverage, const AssignmentBatch& batch,
                        const SchedulerConfig& cfg = {}) {
  if (batch.tick_id != coverage.next_tick) {
    throw Error(Errc::kSequenceGap, "batch tick " + std::to_string(batch.tick_id) +
                                        " but next tick is " + std::to_string(coverage.next_tick));
  }
  std::map<AnnotatorId, int> per_annotator;
  std::map<ClipId, int> added;
  std::set<std::pair<AnnotatorId, ClipId>> seen;
  for (const auto& asg : batch.assignments) {
    auto it = coverage.clips.find(asg.clip_id);
    if (it == coverage.clips.end()) throw Error(Errc::kMissingClip, asg.clip_id.value);
    const auto& c = it->second;
    if (c.ever_assigned.count(asg.annotator_id) ||
        !seen.emplace(asg.annotator_id, asg.clip_id).second) {
      throw Error(Errc::kInvalidInput,
                  asg.annotator_id.value + " already saw " + asg.clip_id.value);
    }
    if (c.assigned_count() + ++added[asg.clip_id] > cfg.annotators_per_clip) {
      throw Error(Errc::kInvalidInput, asg.clip_id.value + " already has 3 assignments");
    }
    if (++per_annotator[asg.annotator_id] > cfg.bucket_size) {
      throw Error(Errc::kInvalidInput, "bucket exceeded for " + asg.annotator_id.value);
    }
  }
  for (const auto& asg : batch.assignments) {
    auto& c = coverage.clips.at(asg.clip_id);
    c.pending[asg.annotator_id] = {batch.tick_id, batch.issued_at, asg.due_at};
    c.ever_assigned.insert(asg.annotator_id);
  }
  ++coverage.next_tick;
}

inline AssignmentBatch run_tick(CoverageState& coverage, const std::vector<AnnotatorId>& active,
                                Timestamp now, std::uint64_t seed,
                                const SchedulerConfig& cfg = {}) {
  auto batch = plan_tick(coverage, active, now, seed, cfg);
  apply_batch(coverage, batch, cfg);
  return batch;
}

struct AcceptResult {
  bool clip_fully_annotated = false;
  int completed_count = 0;
};

inline AcceptResult accept_assessment(CoverageState& coverage, const Assignment& assignment,
                                      const Assessment& assessment,
                                      const SchedulerConfig& cfg = {}) {
  if (assessment.clip_id != assignment.clip_id ||
      assessment.annotator_id != assignment.annotator_id) {
    throw Error(Errc::kUnknownAssignment, "assessment does not match its assignment");
  }
  auto it = coverage.clips.find(assignment.clip_id);
  if (it == coverage.clips.end()) {
    throw Error(Errc::kUnknownAssignment, "no clip " + assignment.clip_id.value);
  }
  auto& c = it->second;
  if (c.completed.count(assignment.annotator_id)) {
    throw Error(Errc::kDuplicateAssessment,
                assignment.annotator_id.value + " on " + assignment.clip_id.value);
  }
  auto p = c.pending.find(assignment.annotator_id);
  if (p == c.pending.end()) {
    throw Error(Errc::kUnknownAssignment,
                assignment.annotator_id.value + " has no open assignment for " +
                    assignment.clip_id.value);
  }
  c.pending.erase(p);
  c.completed.insert(assignment.annotator_id);
  return {c.completed_count() == cfg.annotators_per_clip, c.completed_count()};
}

// Returns outstanding assignments of `dropped` annotators that have been open
// for at least one cadence period to the pool.
inline std::vector<Assignment> revoke_dropped(CoverageState& coverage,
                                              const std::set<AnnotatorId>& dropped,
                                              Timestamp now, const SchedulerConfig& cfg = {}) {
  std::vector<Assignment> revoked;
  for (auto& [clip_id, c] : coverage.clips) {
    for (auto it = c.pending.begin(); it != c.pending.end();) {
      if (dropped.count(it->first) && now - it->second.issued_at >= cfg.cadence) {
        revoked.push_back({it->first, clip_id, it->second.due_at});
        it = c.pending.erase(it);
      } else {
        ++it;
      }
    }
  }
  return revoked;
}

struct OverdueBatch {
  AnnotatorId annotator_id;
  std::int64_t tick_id = 0;
  std::vector<ClipId> clips;
};

// Grouped per (annotator, batch) so reminders are not sent per clip.
inline std::vector<OverdueBatch> overdue(const CoverageState& coverage, Timestamp now) {
  std::map<std::pair<AnnotatorId, std::int64_t>, std::vector<ClipId>> grouped;
  for (const auto& [clip_id, c] : coverage.clips) {
    for (const auto& [a, p] : c.pending) {
      if (p.due_at <= now) grouped[{a, p.tick_id}].push_back(clip_id);
    }
  }
  std::vector<OverdueBatch> out;
  for (auto& [key, clips] : grouped) out.push_back({key.first, key.second, std::move(clips)});
  return out;
}

// What an annotator is shown for a clip. Provenance and peer labels never
// enter this type.
struct AnnotatorView {
  ClipId clip_id;
  std::string media_uri;
  std::vector<int> frame_indices;

  friend bool operator==(const AnnotatorView&, const AnnotatorView&) = default;
};

inline AnnotatorView blind_payload(const QualifiedClip& clip) {
  return {clip.clip_id, clip.media_uri, clip.annotated_frame_indices};
}

inline void to_json(json& j, const AnnotatorView& v) {
  j = json{{"clip_id", v.clip_id}, {"media_uri", v.media_uri}, {"frame_indices", v.frame_indices}};
}

// Histogram of clips by completed count (0..3).
inline std::array<int, kAnnotatorsPerClip + 1> coverage_histogram(const CoverageState& c) {
  std::array<int, kAnnotatorsPerClip + 1> h{};
  for (const auto& [_, cov] : c.clips) ++h[std::min(cov.completed_count(), kAnnotatorsPerClip)];
  return h;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const Assignment& a) {
  j = json{{"annotator_id", a.annotator_id}, {"clip_id", a.clip_id}, {"due_at", a.due_at}};
}
inline void from_json(const json& j, Assignment& a) {
  j.at("annotator_id").get_to(a.annotator_id);
  j.at("clip_id").get_to(a.clip_id);
  a.due_at = j.value("due_at", Timestamp{0});
}
inline void to_json(json& j, const AssignmentBatch& b) {
  j = json{{"tick_id", b.tick_id}, {"issued_at", b.issued_at}, {"assignments", b.assignments}};
}
inline void from_json(const json& j, AssignmentBatch& b) {
  j.at("tick_id").get_to(b.tick_id);
  j.at("issued_at").get_to(b.issued_at);
  j.at("assignments").get_to(b.assignments);
}

// One JSON-lines record per assignment.
inline std::vector<json> batch_to_lines(const AssignmentBatch& b) {
  std::vector<json> out;
  for (const auto& a : b.assignments) {
    out.push_back(json{{"tick_id", b.tick_id},
                       {"issued_at", b.issued_at},
                       {"annotator_id", a.annotator_id},
                       {"clip_id", a.clip_id},
                       {"due_at", a.due_at}});
  }
  return out;
}

inline AssignmentBatch batch_from_lines(const std::vector<json>& lines) {
  AssignmentBatch b;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    if (i == 0) {
      b.tick_id = l.at("tick_id").get<std::int64_t>();
      b.issued_at = l.at("issued_at").get<Timestamp>();
    } else if (l.at("tick_id").get<std::int64_t>() != b.tick_id) {
      throw Error(Errc::kInvalidInput, "batch file mixes ticks");
    }
    b.assignments.push_back(l.get<Assignment>());
  }
  return b;
}

inline void to_json(json& j, const PendingAssignment& p) {
  j = json{{"tick_id", p.tick_id}, {"issued_at", p.issued_at}, {"due_at", p.due_at}};
}
inline void from_json(const json& j, PendingAssignment& p) {
  j.at("tick_id").get_to(p.tick_id);
  j.at("issued_at").get_to(p.issued_at);
  j.at("due_at").get_to(p.due_at);
}
inline void to_json(json& j, const ClipCoverage& c) {
  j = json{{"pending", c.pending}, {"completed", c.completed}, {"ever_assigned", c.ever_assigned}};
}
inline void from_json(const json& j, ClipCoverage& c) {
  j.at("pending").get_to(c.pending);
  j.at("completed").get_to(c.completed);
  j.at("ever_assigned").get_to(c.ever_assigned);
}
inline void to_json(json& j, const CoverageState& c) {
  j = json{{"clips", c.clips}, {"next_tick", c.next_tick}};
}
inline void from_json(const json& j, CoverageState& c) {
  j.at("clips").get_to(c.clips);
  j.at("next_tick").get_to(c.next_tick);
}

}  // namespace cvsops::scheduler
