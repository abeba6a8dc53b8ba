#pragma once

// Recruitment funnel, training gate and competency exam.

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cvsops/domain.hpp"

namespace cvsops::annotator_flow {

struct ExamItem {
  std::string clip_ref;
  PerCriterion<int> expert_key{};
};

struct CompetencyExam {
  std::string exam_id;
  std::vector<ExamItem> items;
  static constexpr double pass_threshold = kExamPassThreshold;
};

// answers[clip_ref] = the candidate's three criterion labels.
using ExamAnswers = std::map<std::string, PerCriterion<int>>;

enum class Verdict { kPass, kFail };

struct ExamResult {
  double score = 0.0;
  int matching_cells = 0;
  int total_cells = 0;
  Verdict verdict = Verdict::kFail;
};

inline Verdict verdict_for(double score) {
  return score >= CompetencyExam::pass_threshold ? Verdict::kPass : Verdict::kFail;
}

// Scoring unit is the criterion cell: 3 cells per exam item.
inline ExamResult grade_exam(const ExamAnswers& answers, const CompetencyExam& exam) {
  if (exam.items.empty()) throw Error(Errc::kInvalidInput, "exam has no items");
  ExamResult r;
  for (const auto& item : exam.items) {
    auto it = answers.find(item.clip_ref);
    if (it == answers.end()) {
      throw Error(Errc::kIncompleteAnswers, "no answer for item " + item.clip_ref);
    }
    for (int k = 0; k < kNumCriteria; ++k) {
      r.matching_cells += it->second[k] == item.expert_key[k] ? 1 : 0;
    }
  }
  r.total_cells = kNumCriteria * static_cast<int>(exam.items.size());
  r.score = static_cast<double>(r.matching_cells) / r.total_cells;
  r.verdict = verdict_for(r.score);
  return r;
}

// Cumulative funnel: each count is the number of annotators who reached at
// least that stage. `dropped` counts attrition (dropped out at any stage or
// failed the exam); organizer-excluded and passed-but-not-activated annotators
// are reported separately.
struct FunnelReport {
  int contacted = 0;
  int eligible = 0;
  int excluded = 0;
  int exam_taken = 0;
  int passed = 0;
  int failed = 0;
  int qualified = 0;
  int awaiting_activation = 0;
  int dropped = 0;
  std::map<AnnotatorState, int> by_state;

  friend bool operator==(const FunnelReport&, const FunnelReport&) = default;
};

inline FunnelReport funnel_report(const std::vector<Annotator>& pool) {
  FunnelReport r;
  for (const auto& a : pool) {
    const int depth = reached_depth(a);
    ++r.contacted;
    ++r.by_state[a.state];
    if (depth >= 1) ++r.eligible;
    if (depth >= 3) ++r.exam_taken;
    if (depth >= 4) ++r.passed;
    if (depth >= 5) ++r.qualified;
    switch (a.state) {
      case AnnotatorState::kIneligible: ++r.excluded; break;
      case AnnotatorState::kFailed: ++r.failed; ++r.dropped; break;
      case AnnotatorState::kDropped:
        // An annotator who qualified and later left still counts as qualified,
        // not as funnel attrition.
        if (depth < 5) ++r.dropped;
        break;
      case AnnotatorState::kPassed: ++r.awaiting_activation; break;
      default: break;
    }
  }
  return r;
}

inline void to_json(json& j, const FunnelReport& r) {
  j = json{{"contacted", r.contacted},   {"eligible", r.eligible},
           {"excluded", r.excluded},     {"exam_taken", r.exam_taken},
           {"passed", r.passed},         {"failed", r.failed},
           {"qualified", r.qualified},   {"awaiting_activation", r.awaiting_activation},
           {"dropped", r.dropped}};
  json states = json::object();
  for (const auto& [s, n] : r.by_state) states[std::string(enum_name(s))] = n;
  j["by_state"] = states;
}

inline std::string funnel_table(const FunnelReport& r) {
  std::ostringstream out;
  auto row = [&](const char* name, int n) {
    out << name << std::string(22 - std::string(name).size(), ' ') << n << '\n';
  };
  row("contacted", r.contacted);
  row("eligible", r.eligible);
  row("excluded", r.excluded);
  row("exam_taken", r.exam_taken);
  row("passed", r.passed);
  row("failed", r.failed);
  row("qualified", r.qualified);
  row("awaiting_activation", r.awaiting_activation);
  row("dropped", r.dropped);
  return out.str();
}

inline void to_json(json& j, const ExamItem& i) {
  j = json{{"clip_ref", i.clip_ref}, {"expert_key", i.expert_key}};
}
inline void from_json(const json& j, ExamItem& i) {
  j.at("clip_ref").get_to(i.clip_ref);
  j.at("expert_key").get_to(i.expert_key);
}
inline void to_json(json& j, const CompetencyExam& e) {
  j = json{{"exam_id", e.exam_id}, {"items", e.items}, {"pass_threshold", e.pass_threshold}};
}
inline void from_json(const json& j, CompetencyExam& e) {
  j.at("exam_id").get_to(e.exam_id);
  j.at("items").get_to(e.items);
  if (e.items.empty()) throw Error(Errc::kInvalidInput, "exam has no items");
}

}  // namespace cvsops::annotator_flow
