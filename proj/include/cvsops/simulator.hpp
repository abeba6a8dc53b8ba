#pragma once

// Synthetic campaigns: video pools with published marginals, annotator
// funnels, and an end-to-end campaign driver over the engine.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "cvsops/annotator_flow.hpp"
#include "cvsops/domain.hpp"
#include "cvsops/engine.hpp"
#include "cvsops/evaluation.hpp"
#include "cvsops/fusion.hpp"
#include "cvsops/scheduler.hpp"
#include "cvsops/video_flow.hpp"

namespace cvsops::simulator {

// ---------------------------------------------------------------------------
// Numerics

inline double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

// Mean and SD of clamp(X, 0, 1) for X ~ N(mu, sigma).
inline Moments clamped_normal_moments(double mu, double sigma) {
  const double a = (0.0 - mu) / sigma, b = (1.0 - mu) / sigma;
  const double pa = normal_cdf(a), pb = normal_cdf(b);
  const double da = normal_pdf(a), db = normal_pdf(b);
  const double mid = pb - pa;
  const double m1 = mu * mid + sigma * (da - db) + (1.0 - pb);
  const double m2 = mu * mu * mid + 2.0 * mu * sigma * (da - db) +
                    sigma * sigma * (mid + a * da - b * db) + (1.0 - pb);
  return {m1, std::sqrt(std::max(0.0, m2 - m1 * m1))};
}

// Latent (mu, sigma) whose clamped moments hit (mean, sd). Nested bisection:
// the clamped mean rises with mu, the clamped SD rises with sigma.
inline Moments calibrate_clamped_normal(double mean, double sd) {
  if (!(mean > 0.0 && mean < 1.0 && sd > 0.0 && sd < 0.5)) {
    throw Error(Errc::kInvalidConfig, "clamped-normal target out of range");
  }
  auto mu_for = [mean](double sigma) {
    double lo = -10.0, hi = 11.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (clamped_normal_moments(mid, sigma).mean < mean ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double lo = 1e-6, hi = 20.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (clamped_normal_moments(mu_for(mid), mid).sd < sd ? lo : hi) = mid;
  }
  const double sigma = 0.5 * (lo + hi);
  return {mu_for(sigma), sigma};
}

// Largest-remainder apportionment of n among weights, at least one each.
inline std::vector<int> quota_counts(const std::vector<double>& weights, int n) {
  const int k = static_cast<int>(weights.size());
  if (k == 0 || n < k) throw Error(Errc::kInvalidConfig, "cannot give every group a member");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(k, 1);
  const int rest = n - k;
  std::vector<std::pair<double, int>> remainders;
  int used = 0;
  for (int i = 0; i < k; ++i) {
    const double exact = rest * weights[i] / total;
    const int whole = static_cast<int>(std::floor(exact));
    counts[i] += whole;
    used += whole;
    remainders.emplace_back(exact - whole, -i);
  }
  std::sort(remainders.rbegin(), remainders.rend());
  for (int i = 0; i < rest - used; ++i) ++counts[-remainders[i].second];
  return counts;
}

inline double sample_sd(const std::vector<int>& xs) {
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  double ss = 0.0;
  for (int x : xs) ss += (x - m) * (x - m);
  return xs.size() > 1 ? std::sqrt(ss / (xs.size() - 1)) : 0.0;
}

// Geometric weights r^i over k groups, r chosen so the apportioned counts of
// n have sample SD as close as possible to `target_sd`.
inline std::vector<double> geometric_weights(int k, int n, double target_sd) {
  auto weights = [k](double r) {
    std::vector<double> w(k);
    for (int i = 0; i < k; ++i) w[i] = std::pow(r, i);
    return w;
  };
  double lo = 1e-3, hi = 1.0;  // SD falls as r grows
  for (int i = 0; i < 100; ++i) {
    const double mid = 0.5 * (lo + hi);
    (sample_sd(quota_counts(weights(mid), n)) > target_sd ? lo : hi) = mid;
  }
  const auto a = quota_counts(weights(lo), n), b = quota_counts(weights(hi), n);
  const auto& best = std::abs(sample_sd(a) - target_sd) <= std::abs(sample_sd(b) - target_sd) ? a : b;
  return {best.begin(), best.end()};
}

// P(majority of three flips) for per-annotator flip probability m.
constexpr double majority_flip(double m) { return 3 * m * m - 2 * m * m * m; }

// Per-cell flip rate e with (1-e)^3 + e^3 = full-agreement share.
inline double cell_flip_for(double full_agreement) {
  if (!(full_agreement > 0.25 && full_agreement <= 1.0)) {
    throw Error(Errc::kInvalidConfig, "full-agreement share must be in (0.25, 1]");
  }
  return (3.0 - std::sqrt(9.0 - 12.0 * (1.0 - full_agreement))) / 6.0;
}

inline std::uint64_t mix(std::uint64_t seed, const std::string& a, const std::string& b = {}) {
  std::uint64_t h = orchestrator::fnv1a(a + '\x1f' + b);
  return scheduler::tick_seed(seed ^ h, static_cast<std::int64_t>(h >> 1));
}

// ---------------------------------------------------------------------------
// Configuration

struct SplitModel {
  int countries = 1;
  std::vector<double> country_weights;  // one per country, sums to 1
  std::vector<double> device_weights;   // one per vendor, sums to 1
  double unknown_device_rate = 0.0;
  double ioc_rate = 0.0;
  double icg_rate = 0.0;
  double robotic_rate = 0.0;
  double confidence_mean = 0.6;  // clamped to [0, 1]
  double confidence_sd = 0.25;
};

struct AgreementModel {
  PerCriterion<double> positive_rate{0.413, 0.600, 0.395};  // video level
  PerCriterion<double> full_agreement{0.80, 0.74, 0.78};    // frame cells
  double video_flip = 0.08;  // per-annotator video-level disagreement
};

struct FunnelModel {
  int contacted = 106;
  double p_ineligible = 2.0 / 106.0;
  double p_continue_contacted = 71.0 / 104.0;
  double p_exam_given_eligible = 67.0 / 71.0;
  double p_pass = 27.0 / 67.0;
  double p_activate_given_pass = 20.0 / 27.0;
  int exam_items = 12;
};

struct SimConfig {
  std::uint64_t seed = 20240901;
  int n_videos = 1000;
  double test_fraction = 0.3;
  int n_annotators = 20;
  double dropout_rate = 0.0;  // per active annotator per tick
  double discordance_rate = 0.1;
  AgreementModel agreement;
  std::map<std::string, SplitModel> splits;
  FunnelModel funnel;
};

inline double weights_sum(const std::vector<double>& w) {
  return std::accumulate(w.begin(), w.end(), 0.0);
}

inline void validate(const SimConfig& c) {
  auto rate = [](double r, const char* what) {
    if (!(r >= 0.0 && r <= 1.0)) throw Error(Errc::kInvalidConfig, std::string(what) + " outside [0,1]");
  };
  if (c.n_videos < 1 || c.n_annotators < 0) throw Error(Errc::kInvalidConfig, "empty pool");
  rate(c.test_fraction, "test_fraction");
  rate(c.dropout_rate, "dropout_rate");
  rate(c.discordance_rate, "discordance_rate");
  rate(c.agreement.video_flip, "video_flip");
  for (int k = 0; k < kNumCriteria; ++k) {
    rate(c.agreement.positive_rate[k], "positive_rate");
    rate(c.agreement.full_agreement[k], "full_agreement");
  }
  if (c.agreement.video_flip >= 0.5) throw Error(Errc::kInvalidConfig, "video_flip must be < 0.5");
  for (const auto& name : {"train", "test"}) {
    auto it = c.splits.find(name);
    if (it == c.splits.end()) throw Error(Errc::kInvalidConfig, std::string("missing split ") + name);
    const auto& s = it->second;
    for (double r : {s.unknown_device_rate, s.ioc_rate, s.icg_rate, s.robotic_rate}) rate(r, name);
    if (static_cast<int>(s.country_weights.size()) != s.countries || s.device_weights.empty()) {
      throw Error(Errc::kInvalidConfig, std::string("split ") + name + " lacks weights");
    }
    for (const auto* w : {&s.country_weights, &s.device_weights}) {
      if (std::abs(weights_sum(*w) - 1.0) > 1e-9 ||
          std::any_of(w->begin(), w->end(), [](double x) { return !(x > 0.0); })) {
        throw Error(Errc::kInvalidConfig, std::string("weights in split ") + name +
                                              " must be positive and sum to 1");
      }
    }
  }
  const auto& f = c.funnel;
  for (double p : {f.p_ineligible, f.p_continue_contacted, f.p_exam_given_eligible, f.p_pass,
                   f.p_activate_given_pass}) {
    rate(p, "funnel probability");
  }
  if (f.exam_items < 1) throw Error(Errc::kInvalidConfig, "exam needs items");
}

inline std::vector<double> normalized(const std::vector<double>& w) {
  const double s = weights_sum(w);
  std::vector<double> out;
  for (double x : w) out.push_back(x / s);
  return out;
}

// Defaults from the published dataset summary. Country and device weights
// are geometric, tuned to the reported per-group SDs; the adjunct imaging
// rates and agreement shares are not published as numbers and are ours.
inline SimConfig paper_defaults() {
  SimConfig c;
  SplitModel train;
  train.countries = 23;
  train.country_weights = normalized(geometric_weights(23, 700, 46.54));
  train.device_weights = normalized(geometric_weights(8, 544, 65.47));
  train.unknown_device_rate = 156.0 / 700.0;
  train.ioc_rate = 0.10;
  train.icg_rate = 0.12;
  train.robotic_rate = 47.0 / 700.0;
  train.confidence_mean = 0.64;
  train.confidence_sd = 0.28;
  SplitModel test;
  test.countries = 18;
  test.country_weights = normalized(geometric_weights(18, 300, 23.18));
  test.device_weights = normalized(geometric_weights(8, 186, 24.44));
  test.unknown_device_rate = 114.0 / 300.0;
  test.ioc_rate = 0.10;
  test.icg_rate = 0.12;
  test.robotic_rate = 34.0 / 300.0;
  test.confidence_mean = 0.58;
  test.confidence_sd = 0.27;
  c.splits = {{"train", train}, {"test", test}};
  return c;
}

// ---------------------------------------------------------------------------
// Pool generation

struct ClipTruth {
  ClipId clip_id;
  std::string split;
  PerCriterion<int> achieved{};
  PerCriterion<int> onset{};  // first achieved annotated frame
};

struct SimVideo {
  video_flow::IntakeRecord record;
  std::vector<PreAnnotation> preannotations;  // adjudication chain, ends concordant
  ClipTruth truth;
};

struct Pool {
  std::vector<SimVideo> videos;
  std::vector<Annotator> annotators;
  std::vector<Assessment> assessments;
};

inline std::string numbered(const std::string& prefix, int i, int width) {
  std::string n = std::to_string(i);
  return prefix + std::string(std::max(0, width - static_cast<int>(n.size())), '0') + n;
}

inline std::string country_name(int i) { return numbered("country-", i + 1, 2); }
inline std::string vendor_name(int i) { return std::string("vendor-") + static_cast<char>('A' + i); }
inline AnnotatorId annotator_name(int i) { return AnnotatorId(numbered("ann-", i + 1, 2)); }

// Draws assessments for (clip, annotator) deterministically from the seed.
class AssessmentSampler {
 public:
  explicit AssessmentSampler(const SimConfig& cfg) : seed_(cfg.seed), model_(cfg.agreement) {
    for (const auto& [name, s] : cfg.splits) {
      latent_[name] = calibrate_clamped_normal(s.confidence_mean, s.confidence_sd);
    }
    for (int k = 0; k < kNumCriteria; ++k) cell_flip_[k] = cell_flip_for(model_.full_agreement[k]);
  }

  // Probability that a clip's latent video-level truth is positive, chosen so
  // the three-annotator mode hits the configured positive rate.
  double latent_rate(int k) const {
    const double m = majority_flip(model_.video_flip);
    return std::clamp((model_.positive_rate[k] - m) / (1.0 - 2.0 * m), 0.0, 1.0);
  }

  Assessment sample(const ClipTruth& truth, const AnnotatorId& who) const {
    std::mt19937_64 rng(mix(seed_, truth.clip_id.value, who.value));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Assessment a;
    a.clip_id = truth.clip_id;
    a.annotator_id = who;
    const auto& latent = latent_.at(truth.split);
    std::normal_distribution<double> conf(latent.mean, latent.sd);
    a.confidence = std::clamp(conf(rng), 0.0, 1.0);
    for (int k = 0; k < kNumCriteria; ++k) {
      for (int f = 0; f < kAnnotatedFrames; ++f) {
        const int t = truth.achieved[k] && f >= truth.onset[k];
        a.frame_labels[f][k] = u(rng) < cell_flip_[k] ? 1 - t : t;
      }
      a.video_level[k] = u(rng) < model_.video_flip ? 1 - truth.achieved[k] : truth.achieved[k];
      if (a.video_level[k] == 1) {
        bool any = false;
        for (const auto& row : a.frame_labels) any = any || row[k] == 1;
        if (!any) a.frame_labels[truth.achieved[k] ? truth.onset[k] : kAnnotatedFrames - 1][k] = 1;
      }
    }
    return a;
  }

 private:
  std::uint64_t seed_;
  AgreementModel model_;
  std::map<std::string, Moments> latent_;
  PerCriterion<double> cell_flip_{};
};

namespace detail {

// Exactly round(rate * n) members flagged, at shuffled positions.
inline std::vector<int> quota_flags(double rate, int n, std::mt19937_64& rng) {
  std::vector<int> flags(n, 0);
  const int count = static_cast<int>(std::lround(rate * n));
  std::fill(flags.begin(), flags.begin() + std::min(count, n), 1);
  std::shuffle(flags.begin(), flags.end(), rng);
  return flags;
}

inline std::vector<int> quota_labels(const std::vector<double>& weights, int n, std::mt19937_64& rng) {
  std::vector<int> labels;
  const auto counts = quota_counts(weights, n);
  for (std::size_t g = 0; g < counts.size(); ++g) labels.insert(labels.end(), counts[g], static_cast<int>(g));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

inline PreAnnotation rater_verdict(int rater, double timestamp, const CaseProvenance& p,
                                   double duration) {
  PreAnnotation a;
  a.rater_id = RaterId(numbered("rater-", rater, 2));
  a.clipping_timestamp = timestamp;
  a.used_ioc = p.used_ioc;
  a.used_icg = p.used_icg;
  a.approach = p.approach;
  return video_flow::with_eligibility(a, duration);
}

}  // namespace detail

inline Pool generate_pool(const SimConfig& cfg) {
  validate(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const AssessmentSampler sampler(cfg);
  Pool pool;

  for (int i = 0; i < cfg.n_annotators; ++i) {
    Annotator a;
    a.annotator_id = annotator_name(i);
    a.profile.contact = a.annotator_id.value + "@example.org";
    a.exam_score = 0.9;
    a.state = AnnotatorState::kActive;
    pool.annotators.push_back(std::move(a));
  }

  const int n_test = static_cast<int>(std::lround(cfg.test_fraction * cfg.n_videos));
  const int n_train = cfg.n_videos - n_test;
  int case_no = 0;
  int rr = 0;  // round-robin over annotators for the pool's three raters
  for (const auto& [name, n] : {std::pair<std::string, int>{"train", n_train}, {"test", n_test}}) {
    if (n == 0) continue;
    const auto& m = cfg.splits.at(name);
    const int n_unknown = static_cast<int>(std::lround(m.unknown_device_rate * n));
    const auto countries = detail::quota_labels(m.country_weights, n, rng);
    auto known_devices = detail::quota_labels(m.device_weights, n - n_unknown, rng);
    const auto unknown = detail::quota_flags(m.unknown_device_rate, n, rng);
    const auto ioc = detail::quota_flags(m.ioc_rate, n, rng);
    const auto icg = detail::quota_flags(m.icg_rate, n, rng);
    const auto robotic = detail::quota_flags(m.robotic_rate, n, rng);
    std::size_t next_device = 0;

    for (int i = 0; i < n; ++i) {
      SimVideo v;
      auto& r = v.record;
      r.case_id = CaseId(numbered("case-", ++case_no, 4));
      r.split = name;
      r.provenance.country = country_name(countries[i]);
      if (!unknown[i]) r.provenance.device_vendor = vendor_name(known_devices[next_device++]);
      r.provenance.used_ioc = ioc[i];
      r.provenance.used_icg = icg[i];
      r.provenance.approach = robotic[i] ? Approach::kRobotic : Approach::kLaparoscopic;
      r.provenance.source_institution = numbered("site-", 1 + static_cast<int>(u(rng) * 54), 2);
      r.duration_s = std::round(1200.0 + u(rng) * 3600.0);
      r.media_uri = "placeholder://" + r.case_id.value + ".mp4";

      const double t = std::round(r.duration_s * (0.4 + 0.5 * u(rng)));
      v.preannotations.push_back(detail::rater_verdict(1, t, r.provenance, r.duration_s));
      if (u(rng) < cfg.discordance_rate) {
        v.preannotations.push_back(detail::rater_verdict(2, t + 30.0, r.provenance, r.duration_s));
        v.preannotations.push_back(detail::rater_verdict(3, t + 31.0, r.provenance, r.duration_s));
      } else {
        v.preannotations.push_back(detail::rater_verdict(2, t + 1.0, r.provenance, r.duration_s));
      }

      v.truth.clip_id = ClipId(video_flow::clip_id_for(r.case_id));
      v.truth.split = name;
      for (int k = 0; k < kNumCriteria; ++k) {
        v.truth.achieved[k] = u(rng) < sampler.latent_rate(k);
        v.truth.onset[k] = static_cast<int>(u(rng) * kAnnotatedFrames);
      }
      for (int j = 0; j < kAnnotatorsPerClip && cfg.n_annotators >= kAnnotatorsPerClip; ++j) {
        pool.assessments.push_back(sampler.sample(v.truth, annotator_name(rr++ % cfg.n_annotators)));
      }
      pool.videos.push_back(std::move(v));
    }
  }
  return pool;
}

// Pool in the shape dataset_stats expects.
inline std::vector<fusion::PoolClip> pool_clips(const Pool& pool) {
  std::map<ClipId, std::vector<Assessment>> by_clip;
  for (const auto& a : pool.assessments) by_clip[a.clip_id].push_back(a);
  std::vector<fusion::PoolClip> out;
  for (const auto& v : pool.videos) {
    out.push_back({v.truth.clip_id, v.record.split, v.record.provenance, by_clip[v.truth.clip_id]});
  }
  return out;
}

// A team whose per-frame probability is the fused soft label of the
// enclosing annotated frame plus Gaussian noise of `noise_sd`.
inline evaluation::Submission synthetic_submission(const std::string& team,
                                                   const fusion::GroundTruth& gt, double noise_sd,
                                                   std::uint64_t seed, bool baseline = false) {
  evaluation::Submission s;
  s.team_id = TeamId(team);
  s.name = team;
  s.is_baseline = baseline;
  std::mt19937_64 rng(mix(seed, "team", team));
  std::normal_distribution<double> noise(0.0, noise_sd);
  for (const auto& [id, clip] : gt) {
    evaluation::ClipPrediction p{};
    for (int f = 0; f < kClipFrames; ++f) {
      for (int k = 0; k < kNumCriteria; ++k) {
        const double base = clip.frames[f / kFrameStride][k].soft;
        p[f][k] = std::clamp(base + (noise_sd > 0 ? noise(rng) : 0.0), 0.0, 1.0);
      }
    }
    s.clips.emplace(id, p);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Funnel

inline annotator_flow::CompetencyExam simulated_exam(int items, std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed, "exam"));
  annotator_flow::CompetencyExam exam{"sim-exam", {}};
  for (int i = 0; i < items; ++i) {
    annotator_flow::ExamItem item{numbered("exam-clip-", i + 1, 2), {}};
    for (auto& v : item.expert_key) v = static_cast<int>(rng() & 1);
    exam.items.push_back(item);
  }
  return exam;
}

// Answer sheet matching the key on exactly `correct` cells.
inline annotator_flow::ExamAnswers answers_with(const annotator_flow::CompetencyExam& exam,
                                                int correct, std::mt19937_64& rng) {
  const int cells = kNumCriteria * static_cast<int>(exam.items.size());
  std::vector<int> wrong(cells, 0);
  std::fill(wrong.begin(), wrong.begin() + (cells - correct), 1);
  std::shuffle(wrong.begin(), wrong.end(), rng);
  annotator_flow::ExamAnswers answers;
  for (std::size_t i = 0; i < exam.items.size(); ++i) {
    auto key = exam.items[i].expert_key;
    for (int k = 0; k < kNumCriteria; ++k) {
      if (wrong[i * kNumCriteria + k]) key[k] = 1 - key[k];
    }
    answers[exam.items[i].clip_ref] = key;
  }
  return answers;
}

// Walks `contacted` candidates through the funnel; exam outcomes go through
// grade_exam on materialized answer sheets.
inline std::vector<Annotator> simulate_funnel(const FunnelModel& m, std::uint64_t seed) {
  namespace ae = annotator_events;
  std::mt19937_64 rng(mix(seed, "funnel"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto exam = simulated_exam(m.exam_items, seed);
  const int cells = kNumCriteria * m.exam_items;
  const int pass_cells = static_cast<int>(std::ceil(kExamPassThreshold * cells - 1e-9));
  std::vector<Annotator> out;
  for (int i = 0; i < m.contacted; ++i) {
    Annotator a;
    a.annotator_id = AnnotatorId(numbered("cand-", i + 1, 3));
    auto step = [&a](const AnnotatorEvent& e) { a = annotator_transition(std::move(a), e); };
    if (u(rng) < m.p_ineligible) {
      a.profile.clinical_background = false;
      step(ae::EligibilityFailed{});
    } else if (u(rng) >= m.p_continue_contacted) {
      step(ae::DroppedOut{});
    } else {
      step(ae::EligibilityPassed{});
      if (u(rng) >= m.p_exam_given_eligible) {
        if (u(rng) < 0.5) step(ae::TrainingStarted{});
        step(ae::DroppedOut{});
      } else {
        step(ae::TrainingStarted{});
        const bool pass = u(rng) < m.p_pass;
        std::uniform_int_distribution<int> score(pass ? pass_cells : cells / 3,
                                                 pass ? cells : pass_cells - 1);
        const auto result = annotator_flow::grade_exam(answers_with(exam, score(rng), rng), exam);
        step(ae::ExamTaken{result.score});
        if (pass && u(rng) < m.p_activate_given_pass) {
          step(ae::QualificationConfirmed{});
          step(ae::Activated{});
        }
      }
    }
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Campaign

struct CampaignPolicy {
  double completion_rate = 1.0;  // share of open assignments finished per tick
  double dropout_rate = 0.0;     // per active annotator per tick
  int max_ticks = 500;
  Timestamp start = 1'700'000'000;
};

struct TickRecord {
  std::int64_t tick_id = 0;
  Timestamp at = 0;
  int assigned = 0;
  int completed = 0;
  int revoked = 0;
  int reminders = 0;
  std::vector<AnnotatorId> dropouts;
};

struct Transcript {
  std::vector<TickRecord> ticks;
  std::vector<scheduler::AssignmentBatch> batches;
  std::vector<orchestrator::Notification> notifications;
  int assessments = 0;
  int fused = 0;
  std::int64_t ticks_to_full_coverage = -1;
  std::vector<orchestrator::Event> log;
  orchestrator::EngineState final_state;
};

class DeadlockDetected : public Error {
 public:
  DeadlockDetected(std::vector<ClipId> starving, const std::string& msg)
      : Error(Errc::kDeadlockDetected, msg), starving(std::move(starving)) {}
  std::vector<ClipId> starving;
};

// Clips that can no longer reach three annotations with the annotators left.
inline std::vector<ClipId> starving_clips(const orchestrator::EngineState& s, int per_clip) {
  const auto active = orchestrator::active_annotators(s);
  std::vector<ClipId> out;
  for (const auto& [id, c] : s.coverage.clips) {
    int alive = c.completed_count();
    for (const auto& [a, _] : c.pending) {
      if (s.annotators.at(a).state != AnnotatorState::kDropped) ++alive;
    }
    int fresh = 0;
    for (const auto& a : active) fresh += !c.ever_assigned.count(a);
    if (alive < per_clip && alive + fresh < per_clip) out.push_back(id);
  }
  return out;
}

// Registers the pool in a fresh engine, then ticks the clock one cadence at a
// time. Annotators work and drop out between ticks; due effects (reminders,
// next tick, fusion) run at each tick boundary.
inline Transcript run_campaign(const Pool& pool, const SimConfig& cfg, const CampaignPolicy& policy,
                               orchestrator::EngineConfig engine_cfg = {}) {
  namespace ae = annotator_events;
  using orchestrator::EntityKind;
  namespace pl = orchestrator::payloads;

  orchestrator::MemoryEventStore store;
  orchestrator::RecordingNotifier notifier;
  orchestrator::MemoryErrorLog errors;
  orchestrator::ManualClock clock(policy.start);
  engine_cfg.seed = cfg.seed;
  orchestrator::Engine engine(engine_cfg, store, notifier, errors, clock);
  const AssessmentSampler sampler(cfg);
  std::map<ClipId, const ClipTruth*> truth;

  for (const auto& v : pool.videos) {
    const auto& id = v.record.case_id.value;
    engine.submit(EntityKind::kVideo, id, pl::VideoRegistered{v.record});
    engine.submit(EntityKind::kVideo, id, pl::VideoStep{video_events::ScreeningStarted{}});
    for (const auto& p : v.preannotations) {
      engine.submit(EntityKind::kVideo, id, pl::VideoStep{video_events::PreannotationSubmitted{p}});
    }
    truth[v.truth.clip_id] = &v.truth;
  }
  for (const auto& a : pool.annotators) {
    const auto& id = a.annotator_id.value;
    engine.submit(EntityKind::kAnnotator, id, pl::AnnotatorRegistered{a.profile});
    for (const AnnotatorEvent& e :
         {AnnotatorEvent{ae::EligibilityPassed{}}, AnnotatorEvent{ae::TrainingStarted{}},
          AnnotatorEvent{ae::ExamTaken{a.exam_score.value_or(1.0)}},
          AnnotatorEvent{ae::QualificationConfirmed{}}, AnnotatorEvent{ae::Activated{}}}) {
      engine.submit(EntityKind::kAnnotator, id, pl::AnnotatorStep{e});
    }
  }

  Transcript tr;
  std::mt19937_64 rng(mix(cfg.seed, "campaign"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int per_clip = engine_cfg.scheduler.annotators_per_clip;
  const auto cadence = engine_cfg.scheduler.cadence;

  auto run_effects = [&](TickRecord* rec) {
    const auto before = notifier.delivered.size();
    const auto report = engine.run_due_effects();
    for (std::size_t i = before; i < notifier.delivered.size(); ++i) {
      tr.notifications.push_back(notifier.delivered[i]);
      if (rec && notifier.delivered[i].idempotency_key.rfind("reminder:", 0) == 0) ++rec->reminders;
    }
    for (const auto& o : report.outcomes) tr.fused += o.kind == orchestrator::EffectKind::kFusionJob && o.ok;
  };

  run_effects(nullptr);
  for (int t = 0; t < policy.max_ticks; ++t) {
    TickRecord rec;
    rec.at = clock();
    const auto revoked_before = store.log.size();
    if (t == 0) {
      engine.issue_tick();
    } else {
      run_effects(&rec);  // due TickDue issues this tick
    }
    for (auto i = revoked_before; i < store.log.size(); ++i) {
      const auto& ev = store.log[i];
      if (const auto* b = std::get_if<pl::TickIssued>(&ev.payload)) {
        rec.tick_id = b->batch.tick_id;
        rec.assigned += static_cast<int>(b->batch.assignments.size());
        tr.batches.push_back(b->batch);
      } else if (const auto* r = std::get_if<pl::AssignmentsRevoked>(&ev.payload)) {
        rec.revoked += static_cast<int>(r->assignments.size());
      }
    }

    // Work between ticks.
    for (const auto& a : orchestrator::active_annotators(engine.state())) {
      for (const auto& [pending, view] : orchestrator::assignments_for(engine.state(), a)) {
        if (u(rng) >= policy.completion_rate) continue;
        engine.submit(EntityKind::kCoverage, orchestrator::kCoverageStream,
                      pl::AssessmentAccepted{sampler.sample(*truth.at(view.clip_id), a)});
        ++rec.completed;
        ++tr.assessments;
      }
    }
    for (const auto& a : orchestrator::active_annotators(engine.state())) {
      if (u(rng) < policy.dropout_rate) {
        engine.submit(EntityKind::kAnnotator, a.value, pl::AnnotatorStep{ae::DroppedOut{}});
        rec.dropouts.push_back(a);
      }
    }
    tr.ticks.push_back(rec);

    if (engine.state().coverage.fully_covered(per_clip)) {
      tr.ticks_to_full_coverage = t + 1;
      break;
    }
    if (auto starving = starving_clips(engine.state(), per_clip); !starving.empty()) {
      std::string msg = std::to_string(starving.size()) + " clip(s) cannot reach " +
                        std::to_string(per_clip) + " annotators, e.g. " + starving.front().value;
      throw DeadlockDetected(std::move(starving), msg);
    }
    clock.advance(cadence);
  }
  if (tr.ticks_to_full_coverage < 0) {
    throw DeadlockDetected(starving_clips(engine.state(), per_clip),
                           "no full coverage after " + std::to_string(policy.max_ticks) + " ticks");
  }
  run_effects(nullptr);  // pending fusion jobs
  tr.log = store.log;
  tr.final_state = engine.state();
  return tr;
}

// ---------------------------------------------------------------------------
// JSON

inline void to_json(json& j, const SplitModel& s) {
  j = json{{"countries", s.countries},
           {"country_weights", s.country_weights},
           {"device_weights", s.device_weights},
           {"unknown_device_rate", s.unknown_device_rate},
           {"ioc_rate", s.ioc_rate},
           {"icg_rate", s.icg_rate},
           {"robotic_rate", s.robotic_rate},
           {"confidence", {{"mean", s.confidence_mean}, {"sd", s.confidence_sd}}}};
}
inline void from_json(const json& j, SplitModel& s) {
  j.at("country_weights").get_to(s.country_weights);
  s.countries = j.value("countries", static_cast<int>(s.country_weights.size()));
  j.at("device_weights").get_to(s.device_weights);
  s.unknown_device_rate = j.value("unknown_device_rate", 0.0);
  s.ioc_rate = j.value("ioc_rate", 0.0);
  s.icg_rate = j.value("icg_rate", 0.0);
  s.robotic_rate = j.value("robotic_rate", 0.0);
  if (j.contains("confidence")) {
    s.confidence_mean = j.at("confidence").at("mean").get<double>();
    s.confidence_sd = j.at("confidence").at("sd").get<double>();
  }
}

inline void to_json(json& j, const SimConfig& c) {
  j = json{{"seed", c.seed},
           {"n_videos", c.n_videos},
           {"test_fraction", c.test_fraction},
           {"n_annotators", c.n_annotators},
           {"dropout_rate", c.dropout_rate},
           {"discordance_rate", c.discordance_rate},
           {"agreement",
            {{"positive_rate", c.agreement.positive_rate},
             {"full_agreement", c.agreement.full_agreement},
             {"video_flip", c.agreement.video_flip}}},
           {"splits", c.splits},
           {"funnel",
            {{"contacted", c.funnel.contacted},
             {"p_ineligible", c.funnel.p_ineligible},
             {"p_continue_contacted", c.funnel.p_continue_contacted},
             {"p_exam_given_eligible", c.funnel.p_exam_given_eligible},
             {"p_pass", c.funnel.p_pass},
             {"p_activate_given_pass", c.funnel.p_activate_given_pass},
             {"exam_items", c.funnel.exam_items}}}};
}

// Missing keys keep the paper defaults.
inline void from_json(const json& j, SimConfig& c) {
  c = paper_defaults();
  c.seed = j.value("seed", c.seed);
  c.n_videos = j.value("n_videos", c.n_videos);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.n_annotators = j.value("n_annotators", c.n_annotators);
  c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
  c.discordance_rate = j.value("discordance_rate", c.discordance_rate);
  if (j.contains("agreement")) {
    const auto& a = j.at("agreement");
    c.agreement.positive_rate = a.value("positive_rate", c.agreement.positive_rate);
    c.agreement.full_agreement = a.value("full_agreement", c.agreement.full_agreement);
    c.agreement.video_flip = a.value("video_flip", c.agreement.video_flip);
  }
  if (j.contains("splits")) {
    for (const auto& [name, s] : j.at("splits").items()) c.splits[name] = s.get<SplitModel>();
  }
  if (j.contains("funnel")) {
    const auto& f = j.at("funnel");
    c.funnel.contacted = f.value("contacted", c.funnel.contacted);
    c.funnel.p_ineligible = f.value("p_ineligible", c.funnel.p_ineligible);
    c.funnel.p_continue_contacted = f.value("p_continue_contacted", c.funnel.p_continue_contacted);
    c.funnel.p_exam_given_eligible = f.value("p_exam_given_eligible", c.funnel.p_exam_given_eligible);
    c.funnel.p_pass = f.value("p_pass", c.funnel.p_pass);
    c.funnel.p_activate_given_pass = f.value("p_activate_given_pass", c.funnel.p_activate_given_pass);
    c.funnel.exam_items = f.value("exam_items", c.funnel.exam_items);
  }
  validate(c);
}

}  // namespace cvsops::simulator
