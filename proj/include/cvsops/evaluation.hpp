#pragma once

// Subchallenge metrics (mAP, Brier, domain robustness), variant splits, rank
// derivation and aggregation, rank correlation and leaderboard export.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "cvsops/domain.hpp"
#include "cvsops/fusion.hpp"

namespace cvsops::evaluation {

using FramePrediction = PerCriterion<double>;
using ClipPrediction = std::array<FramePrediction, kClipFrames>;

struct Submission {
  TeamId team_id;
  std::string name;
  std::string contact;
  bool is_baseline = false;
  std::map<ClipId, ClipPrediction> clips;

  friend bool operator==(const Submission&, const Submission&) = default;
};

inline void validate(const Submission& s) {
  for (const auto& [id, frames] : s.clips) {
    for (const auto& f : frames) {
      for (double p : f) {
        if (!(p >= 0.0 && p <= 1.0)) {
          throw Error(Errc::kInvalidInput,
                      "probability outside [0,1] in " + s.team_id.value + "/" + id.value);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Average precision

// Step-wise precision-recall integral over score-descending ranks. Tied scores
// form one group: precision is taken after the whole group is admitted.
inline double average_precision(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(Errc::kLengthMismatch, "scores and labels differ in length");
  }
  const long positives = std::count(labels.begin(), labels.end(), 1);
  if (positives == 0) throw Error(Errc::kNoPositives, "average precision undefined");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double ap = 0.0;
  long tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    long group_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_tp += labels[order[j]] == 1 ? 1 : 0;
      ++j;
    }
    tp += group_tp;
    seen = j;
    if (group_tp > 0) {
      ap += (static_cast<double>(group_tp) / positives) * (static_cast<double>(tp) / seen);
    }
    i = j;
  }
  return ap;
}

// Per-criterion score set. A criterion with no positive frames in the
// evaluated population has no AP; it is left empty and listed in `skipped`.
struct CriterionScores {
  PerCriterion<std::optional<double>> per_criterion{};
  double mean = 0.0;
  std::vector<Criterion> skipped;
};

inline double mean_of_defined(const PerCriterion<std::optional<double>>& v) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / n;
}

inline const ClipPrediction& predictions_for(const Submission& sub, const ClipId& id) {
  auto it = sub.clips.find(id);
  if (it == sub.clips.end()) {
    throw Error(Errc::kMissingClip, sub.team_id.value + " has no predictions for " + id.value);
  }
  return it->second;
}

inline const fusion::FusedClip& truth_for(const fusion::GroundTruth& gt, const ClipId& id) {
  auto it = gt.find(id);
  if (it == gt.end()) throw Error(Errc::kMissingClip, "no ground truth for " + id.value);
  return it->second;
}

// mAP over the pooled annotated-frame population of `clip_set`, mode labels.
// Values are fractions in [0,1].
inline CriterionScores map_score(const Submission& sub, const fusion::GroundTruth& gt,
                                 const std::vector<ClipId>& clip_set) {
  PerCriterion<std::vector<double>> scores;
  PerCriterion<std::vector<int>> labels;
  const auto grid = annotated_frame_grid();
  for (const auto& id : clip_set) {
    const auto& pred = predictions_for(sub, id);
    const auto& truth = truth_for(gt, id);
    for (int f = 0; f < kAnnotatedFrames; ++f) {
      for (int k = 0; k < kNumCriteria; ++k) {
        scores[k].push_back(pred[grid[f]][k]);
        labels[k].push_back(truth.frames[f][k].mode);
      }
    }
  }
  CriterionScores out;
  for (int k = 0; k < kNumCriteria; ++k) {
    if (std::count(labels[k].begin(), labels[k].end(), 1) == 0) {
      out.skipped.push_back(kCriteria[k]);
      continue;
    }
    out.per_criterion[k] = average_precision(scores[k], labels[k]);
  }
  out.mean = mean_of_defined(out.per_criterion);
  return out;
}

// Brier score against confidence-aware soft labels: per criterion the mean of
// (p - y)^2 over frames, then the mean over criteria.
inline CriterionScores brier_score(const Submission& sub, const fusion::GroundTruth& gt,
                                   const std::vector<ClipId>& clip_set) {
  if (clip_set.empty()) throw Error(Errc::kEmptySplit, "no clips to score");
  PerCriterion<double> sum{};
  const auto grid = annotated_frame_grid();
  for (const auto& id : clip_set) {
    const auto& pred = predictions_for(sub, id);
    const auto& truth = truth_for(gt, id);
    for (int f = 0; f < kAnnotatedFrames; ++f) {
      for (int k = 0; k < kNumCriteria; ++k) {
        const double d = pred[grid[f]][k] - truth.frames[f][k].soft;
        sum[k] += d * d;
      }
    }
  }
  const double n = static_cast<double>(clip_set.size()) * kAnnotatedFrames;
  CriterionScores out;
  for (int k = 0; k < kNumCriteria; ++k) out.per_criterion[k] = sum[k] / n;
  out.mean = mean_of_defined(out.per_criterion);
  return out;
}

// ---------------------------------------------------------------------------
// Domain robustness

// Drops the floor(0.1 n) worst variant scores and returns the minimum of the
// rest (for n = 10: the second smallest).
inline double domain_robustness_score(std::vector<double> variant_scores) {
  if (variant_scores.empty()) throw Error(Errc::kEmptyVariants, "no variant scores");
  const std::size_t drop = variant_scores.size() / 10;
  std::nth_element(variant_scores.begin(), variant_scores.begin() + drop, variant_scores.end());
  return variant_scores[drop];
}

enum class SplitKind {
  kIoc,
  kIcg,
  kRobotic,
  kLaparoscopic,
  kDeviceVendor,
  kCountry,
  kConfidenceBelow,
  kConfidenceAtLeast,
};

}  // namespace cvsops::evaluation

template <>
struct cvsops::EnumNames<cvsops::evaluation::SplitKind> {
  using K = cvsops::evaluation::SplitKind;
  static constexpr std::array values{std::pair{K::kIoc, "IOC"},
                                     std::pair{K::kIcg, "ICG"},
                                     std::pair{K::kRobotic, "ROBOTIC"},
                                     std::pair{K::kLaparoscopic, "LAPAROSCOPIC"},
                                     std::pair{K::kDeviceVendor, "DEVICE_VENDOR"},
                                     std::pair{K::kCountry, "COUNTRY"},
                                     std::pair{K::kConfidenceBelow, "CONFIDENCE_BELOW"},
                                     std::pair{K::kConfidenceAtLeast, "CONFIDENCE_AT_LEAST"}};
};

namespace cvsops::evaluation {

// Metadata visible to split predicates.
struct TestClip {
  ClipId clip_id;
  CaseProvenance provenance;
  double mean_confidence = 0.0;
};

struct VariantSplitDef {
  std::string split_id;
  SplitKind kind = SplitKind::kIoc;
  std::vector<std::string> values;  // vendor or country group
  double threshold = 0.5;           // confidence band

  bool matches(const TestClip& c) const {
    const auto& p = c.provenance;
    auto in_group = [this](const std::optional<std::string>& v) {
      return v && std::find(values.begin(), values.end(), *v) != values.end();
    };
    switch (kind) {
      case SplitKind::kIoc: return p.used_ioc;
      case SplitKind::kIcg: return p.used_icg;
      case SplitKind::kRobotic: return p.approach == Approach::kRobotic;
      case SplitKind::kLaparoscopic: return p.approach == Approach::kLaparoscopic;
      case SplitKind::kDeviceVendor: return in_group(p.device_vendor);
      case SplitKind::kCountry: return in_group(p.country);
      case SplitKind::kConfidenceBelow: return c.mean_confidence < threshold;
      case SplitKind::kConfidenceAtLeast: return c.mean_confidence >= threshold;
    }
    return false;
  }
};

inline void to_json(json& j, const VariantSplitDef& d) {
  j = json{{"split_id", d.split_id}, {"kind", d.kind}, {"values", d.values},
           {"threshold", d.threshold}};
}
inline void from_json(const json& j, VariantSplitDef& d) {
  j.at("split_id").get_to(d.split_id);
  j.at("kind").get_to(d.kind);
  d.values = j.value("values", std::vector<std::string>{});
  d.threshold = j.value("threshold", 0.5);
}

// The ten shipped splits: IOC, ICG, robotic, laparoscopic, two vendor groups,
// two country groups, and the two confidence bands around 0.5.
inline std::vector<VariantSplitDef> default_variant_splits(
    const std::vector<std::string>& vendor_group_a, const std::vector<std::string>& vendor_group_b,
    const std::vector<std::string>& country_group_a,
    const std::vector<std::string>& country_group_b) {
  return {{"ioc", SplitKind::kIoc, {}, 0.5},
          {"icg", SplitKind::kIcg, {}, 0.5},
          {"robotic", SplitKind::kRobotic, {}, 0.5},
          {"laparoscopic", SplitKind::kLaparoscopic, {}, 0.5},
          {"vendor_a", SplitKind::kDeviceVendor, vendor_group_a, 0.5},
          {"vendor_b", SplitKind::kDeviceVendor, vendor_group_b, 0.5},
          {"country_a", SplitKind::kCountry, country_group_a, 0.5},
          {"country_b", SplitKind::kCountry, country_group_b, 0.5},
          {"low_confidence", SplitKind::kConfidenceBelow, {}, 0.5},
          {"high_confidence", SplitKind::kConfidenceAtLeast, {}, 0.5}};
}

// Vendor and country groups taken from the pool itself: values sorted by
// frequency (then name) and dealt alternately into two groups.
inline std::vector<VariantSplitDef> default_variant_splits_for(const std::vector<TestClip>& pool) {
  auto deal = [&](auto field) {
    std::map<std::string, int> freq;
    for (const auto& c : pool) {
      if (const auto& v = field(c.provenance)) ++freq[*v];
    }
    std::vector<std::pair<std::string, int>> sorted(freq.begin(), freq.end());
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::pair<std::vector<std::string>, std::vector<std::string>> groups;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      (i % 2 == 0 ? groups.first : groups.second).push_back(sorted[i].first);
    }
    return groups;
  };
  auto vendors = deal([](const CaseProvenance& p) -> const auto& { return p.device_vendor; });
  auto countries = deal([](const CaseProvenance& p) -> const auto& { return p.country; });
  return default_variant_splits(vendors.first, vendors.second, countries.first, countries.second);
}

struct VariantSplit {
  std::string split_id;
  std::vector<ClipId> clips;
};

inline std::vector<VariantSplit> build_variant_splits(const std::vector<TestClip>& pool,
                                                      const std::vector<VariantSplitDef>& defs) {
  std::vector<VariantSplit> out;
  for (const auto& d : defs) {
    VariantSplit s{d.split_id, {}};
    for (const auto& c : pool) {
      if (d.matches(c)) s.clips.push_back(c.clip_id);
    }
    if (s.clips.empty()) throw Error(Errc::kEmptySplit, d.split_id);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reports

struct VariantScore {
  std::string split_id;
  CriterionScores map;
};

struct SubchallengeC {
  PerCriterion<std::optional<double>> drs_per_criterion{};
  double drs = 0.0;  // robust-min over criterion-averaged variant mAPs
  std::vector<VariantScore> variants;
};

struct MetricsReport {
  TeamId team_id;
  bool is_baseline = false;
  CriterionScores sub_a;  // mAP
  CriterionScores sub_b;  // Brier
  SubchallengeC sub_c;
  std::optional<std::string> causal_audit;  // "PASS" or "VIOLATION clip@frame"
};

inline SubchallengeC robustness(const Submission& sub, const fusion::GroundTruth& gt,
                                const std::vector<VariantSplit>& splits) {
  if (splits.empty()) throw Error(Errc::kEmptyVariants, "no variant splits");
  SubchallengeC c;
  std::vector<double> averaged;
  PerCriterion<std::vector<double>> per;
  for (const auto& s : splits) {
    auto m = map_score(sub, gt, s.clips);
    if (!std::isnan(m.mean)) averaged.push_back(m.mean);
    for (int k = 0; k < kNumCriteria; ++k) {
      if (m.per_criterion[k]) per[k].push_back(*m.per_criterion[k]);
    }
    c.variants.push_back({s.split_id, std::move(m)});
  }
  c.drs = averaged.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : domain_robustness_score(averaged);
  for (int k = 0; k < kNumCriteria; ++k) {
    if (!per[k].empty()) c.drs_per_criterion[k] = domain_robustness_score(per[k]);
  }
  return c;
}

inline std::vector<ClipId> clip_ids(const std::vector<TestClip>& pool) {
  std::vector<ClipId> ids;
  for (const auto& c : pool) ids.push_back(c.clip_id);
  return ids;
}

inline MetricsReport evaluate_submission(const Submission& sub, const fusion::GroundTruth& gt,
                                         const std::vector<TestClip>& pool,
                                         const std::vector<VariantSplit>& splits) {
  validate(sub);
  const auto all = clip_ids(pool);
  MetricsReport r;
  r.team_id = sub.team_id;
  r.is_baseline = sub.is_baseline;
  r.sub_a = map_score(sub, gt, all);
  r.sub_b = brier_score(sub, gt, all);
  r.sub_c = robustness(sub, gt, splits);
  return r;
}

// ---------------------------------------------------------------------------
// Ranking

enum class Direction { kHigherIsBetter, kLowerIsBetter };

struct TeamScore {
  TeamId team_id;
  double score = 0.0;
};

// Dense ranks aligned with the input; exact ties share the better rank.
inline std::vector<int> rank_table(const std::vector<TeamScore>& scores, Direction direction) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  auto better = [&](std::size_t a, std::size_t b) {
    return direction == Direction::kHigherIsBetter ? scores[a].score > scores[b].score
                                                   : scores[a].score < scores[b].score;
  };
  std::stable_sort(order.begin(), order.end(), better);
  std::vector<int> ranks(scores.size());
  int rank = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || scores[order[i]].score != scores[order[i - 1]].score) ++rank;
    ranks[order[i]] = rank;
  }
  return ranks;
}

struct RankTriple {
  TeamId team_id;
  int a = 0;
  int b = 0;
  int c = 0;
  int sum() const { return a + b + c; }
};

// Rank-sum, ties broken by the better Subchallenge A rank, dense-ranked.
inline std::vector<int> aggregate_overall(const std::vector<RankTriple>& ranks) {
  std::vector<std::size_t> order(ranks.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) { return std::pair{ranks[i].sum(), ranks[i].a}; };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return key(x) < key(y); });
  std::vector<int> overall(ranks.size());
  int rank = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || key(order[i]) != key(order[i - 1])) ++rank;
    overall[order[i]] = rank;
  }
  return overall;
}

inline std::vector<int> aggregate_overall(const std::vector<int>& rank_a,
                                          const std::vector<int>& rank_b,
                                          const std::vector<int>& rank_c) {
  if (rank_a.size() != rank_b.size() || rank_a.size() != rank_c.size()) {
    throw Error(Errc::kMisalignedTeams, "rank columns differ in length");
  }
  std::vector<RankTriple> triples;
  for (std::size_t i = 0; i < rank_a.size(); ++i) {
    triples.push_back({TeamId(std::to_string(i)), rank_a[i], rank_b[i], rank_c[i]});
  }
  return aggregate_overall(triples);
}

// Spearman rank correlation for tie-free rank vectors.
inline double spearman(const std::vector<int>& x, const std::vector<int>& y) {
  if (x.size() != y.size()) throw Error(Errc::kLengthMismatch, "rank vectors differ in length");
  const double n = static_cast<double>(x.size());
  if (x.size() < 2) throw Error(Errc::kInvalidInput, "spearman needs at least two teams");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

struct ScatterPoint {
  TeamId team_id;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation across variant splits
};

inline ScatterPoint mean_and_spread(const TeamId& team, const std::vector<double>& values) {
  ScatterPoint p{team, 0.0, 0.0};
  if (values.empty()) return p;
  for (double v : values) p.mean += v;
  p.mean /= values.size();
  double ss = 0.0;
  for (double v : values) ss += (v - p.mean) * (v - p.mean);
  p.std = std::sqrt(ss / values.size());
  return p;
}

inline std::vector<ScatterPoint> robustness_scatter(const std::vector<MetricsReport>& reports) {
  std::vector<ScatterPoint> out;
  for (const auto& r : reports) {
    std::vector<double> values;
    for (const auto& v : r.sub_c.variants) {
      if (!std::isnan(v.map.mean)) values.push_back(v.map.mean);
    }
    out.push_back(mean_and_spread(r.team_id, values));
  }
  return out;
}

inline std::string scatter_table(const std::vector<ScatterPoint>& points) {
  std::ostringstream out;
  out << "team\tmean_map\tstd_map\n";
  for (const auto& p : points) out << p.team_id.value << '\t' << p.mean << '\t' << p.std << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Leaderboard

struct LeaderboardRow {
  TeamId team_id;
  bool is_baseline = false;
  double map = 0.0;
  double brier = 0.0;
  double drs = 0.0;
  std::optional<int> rank_a, rank_b, rank_c, overall;
};

// Baseline rows are carried for display but take no rank.
inline std::vector<LeaderboardRow> leaderboard(const std::vector<MetricsReport>& reports) {
  std::vector<LeaderboardRow> ranked, baselines;
  std::vector<TeamScore> a, b, c;
  for (const auto& r : reports) {
    LeaderboardRow row{r.team_id, r.is_baseline, r.sub_a.mean, r.sub_b.mean, r.sub_c.drs,
                       {}, {}, {}, {}};
    if (r.is_baseline) {
      baselines.push_back(row);
      continue;
    }
    ranked.push_back(row);
    a.push_back({r.team_id, r.sub_a.mean});
    b.push_back({r.team_id, r.sub_b.mean});
    c.push_back({r.team_id, r.sub_c.drs});
  }
  const auto ra = rank_table(a, Direction::kHigherIsBetter);
  const auto rb = rank_table(b, Direction::kLowerIsBetter);
  const auto rc = rank_table(c, Direction::kHigherIsBetter);
  const auto overall = aggregate_overall(ra, rb, rc);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    ranked[i].rank_a = ra[i];
    ranked[i].rank_b = rb[i];
    ranked[i].rank_c = rc[i];
    ranked[i].overall = overall[i];
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return std::tie(*x.overall, *x.rank_a) < std::tie(*y.overall, *y.rank_a);
  });
  ranked.insert(ranked.end(), baselines.begin(), baselines.end());
  return ranked;
}

inline json rank_json(const std::optional<int>& r) { return r ? json(*r) : json(nullptr); }

inline json leaderboard_json(const std::vector<LeaderboardRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back(json{{"team_id", r.team_id},
                       {"is_baseline", r.is_baseline},
                       {"map", r.map},
                       {"brier", r.brier},
                       {"drs", r.drs},
                       {"rank_a", rank_json(r.rank_a)},
                       {"rank_b", rank_json(r.rank_b)},
                       {"rank_c", rank_json(r.rank_c)},
                       {"overall_rank", rank_json(r.overall)}});
  }
  return out;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline std::string leaderboard_csv(const std::vector<LeaderboardRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "team_id,is_baseline,map,brier,drs,rank_a,rank_b,rank_c,overall_rank\n";
  auto rank = [](const std::optional<int>& r) { return r ? std::to_string(*r) : std::string(); };
  for (const auto& r : rows) {
    out << csv_field(r.team_id.value) << ',' << (r.is_baseline ? "true" : "false") << ','
        << r.map << ',' << r.brier << ',' << r.drs << ',' << rank(r.rank_a) << ','
        << rank(r.rank_b) << ',' << rank(r.rank_c) << ',' << rank(r.overall) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// JSON

inline json scores_json(const CriterionScores& s) {
  json per = json::object();
  const char* keys[] = {"c1", "c2", "c3"};
  for (int k = 0; k < kNumCriteria; ++k) {
    per[keys[k]] = s.per_criterion[k] ? json(*s.per_criterion[k]) : json(nullptr);
  }
  json skipped = json::array();
  for (auto c : s.skipped) skipped.push_back(c);
  return json{{"per_criterion", per},
              {"mean", std::isnan(s.mean) ? json(nullptr) : json(s.mean)},
              {"skipped", skipped}};
}

inline CriterionScores scores_from_json(const json& j) {
  CriterionScores s;
  const char* keys[] = {"c1", "c2", "c3"};
  for (int k = 0; k < kNumCriteria; ++k) {
    const auto& v = j.at("per_criterion").at(keys[k]);
    if (!v.is_null()) s.per_criterion[k] = v.get<double>();
  }
  s.mean = j.at("mean").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                  : j.at("mean").get<double>();
  for (const auto& c : j.value("skipped", json::array())) s.skipped.push_back(c.get<Criterion>());
  return s;
}

inline void to_json(json& j, const MetricsReport& r) {
  json variants = json::array();
  for (const auto& v : r.sub_c.variants) {
    variants.push_back(json{{"split_id", v.split_id}, {"map", scores_json(v.map)}});
  }
  json drs_per = json::object();
  const char* keys[] = {"c1", "c2", "c3"};
  for (int k = 0; k < kNumCriteria; ++k) {
    drs_per[keys[k]] = r.sub_c.drs_per_criterion[k] ? json(*r.sub_c.drs_per_criterion[k])
                                                    : json(nullptr);
  }
  j = json{{"team_id", r.team_id},
           {"is_baseline", r.is_baseline},
           {"sub_a", scores_json(r.sub_a)},
           {"sub_b", scores_json(r.sub_b)},
           {"sub_c",
            {{"drs", std::isnan(r.sub_c.drs) ? json(nullptr) : json(r.sub_c.drs)},
             {"drs_per_criterion", drs_per},
             {"variants", variants}}},
           {"causal_audit", r.causal_audit ? json(*r.causal_audit) : json(nullptr)}};
}

inline void from_json(const json& j, MetricsReport& r) {
  j.at("team_id").get_to(r.team_id);
  r.is_baseline = j.value("is_baseline", false);
  r.sub_a = scores_from_json(j.at("sub_a"));
  r.sub_b = scores_from_json(j.at("sub_b"));
  const auto& c = j.at("sub_c");
  r.sub_c.drs = c.at("drs").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                      : c.at("drs").get<double>();
  const char* keys[] = {"c1", "c2", "c3"};
  for (int k = 0; k < kNumCriteria; ++k) {
    const auto& v = c.at("drs_per_criterion").at(keys[k]);
    if (!v.is_null()) r.sub_c.drs_per_criterion[k] = v.get<double>();
  }
  for (const auto& v : c.at("variants")) {
    r.sub_c.variants.push_back({v.at("split_id").get<std::string>(), scores_from_json(v.at("map"))});
  }
  if (j.contains("causal_audit") && !j.at("causal_audit").is_null()) {
    r.causal_audit = j.at("causal_audit").get<std::string>();
  }
}

// Prediction file: one line per (team, clip) with 90 frames of {c1, c2, c3}.
inline json prediction_line(const TeamId& team, const ClipId& clip, const ClipPrediction& p) {
  json frames = json::array();
  for (const auto& f : p) frames.push_back(json{{"c1", f[0]}, {"c2", f[1]}, {"c3", f[2]}});
  return json{{"team_id", team}, {"clip_id", clip}, {"frames", frames}};
}

inline std::vector<json> submission_lines(const Submission& s) {
  std::vector<json> out;
  for (const auto& [id, p] : s.clips) out.push_back(prediction_line(s.team_id, id, p));
  return out;
}

inline Submission submission_from_lines(const std::vector<json>& lines) {
  Submission s;
  for (const auto& l : lines) {
    const auto team = l.at("team_id").get<TeamId>();
    if (s.team_id.empty()) s.team_id = team;
    if (team != s.team_id) throw Error(Errc::kInvalidInput, "prediction file mixes teams");
    const auto& frames = l.at("frames");
    if (!frames.is_array() || frames.size() != kClipFrames) {
      throw Error(Errc::kShapeMismatch, "each clip needs exactly 90 frames");
    }
    ClipPrediction p{};
    for (int f = 0; f < kClipFrames; ++f) {
      p[f] = {frames[f].at("c1").get<double>(), frames[f].at("c2").get<double>(),
              frames[f].at("c3").get<double>()};
    }
    const auto clip = l.at("clip_id").get<ClipId>();
    if (!s.clips.emplace(clip, p).second) {
      throw Error(Errc::kInvalidInput, "duplicate predictions for " + clip.value);
    }
  }
  validate(s);
  return s;
}

// Compact form used in snapshots: clips as {clip_id: [[c1, c2, c3] x 90]}.
inline void to_json(json& j, const Submission& s) {
  json clips = json::object();
  for (const auto& [id, p] : s.clips) clips[id.value] = p;
  j = json{{"team_id", s.team_id},
           {"name", s.name},
           {"contact", s.contact},
           {"is_baseline", s.is_baseline},
           {"clips", clips}};
}
inline void from_json(const json& j, Submission& s) {
  j.at("team_id").get_to(s.team_id);
  s.name = j.value("name", std::string{});
  s.contact = j.value("contact", std::string{});
  s.is_baseline = j.value("is_baseline", false);
  s.clips.clear();
  for (const auto& [id, p] : j.at("clips").items()) {
    s.clips.emplace(ClipId(id), p.get<ClipPrediction>());
  }
}

}  // namespace cvsops::evaluation
