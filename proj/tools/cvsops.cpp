// cvsops: campaign operations from the command line.
//
//   cvsops [--config FILE] [--data-dir DIR] <command> ...
//
// Store-backed commands (intake, screen, enroll, assess, schedule, effects,
// fuse, submit, replay, serve) read and append to the event log under the
// data directory. evaluate, leaderboard, simulate and audit work on files.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cvsops/config.hpp"
#include "cvsops/demo_predictors.hpp"
#include "cvsops/http_api.hpp"
#include "cvsops/process_predictor.hpp"
#include "cvsops/service.hpp"
#include "cvsops/simulator.hpp"

namespace {

using namespace cvsops;
namespace pl = orchestrator::payloads;
using orchestrator::EntityKind;

struct Globals {
  std::string config_path;
  std::string data_dir;
};

ServiceConfig service_config(const Globals& g) {
  auto cfg = load_config(g.config_path.empty() ? std::nullopt
                                               : std::optional<std::filesystem::path>(g.config_path));
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  return cfg;
}

void emit(const std::string& out, const std::vector<json>& lines) {
  if (out.empty() || out == "-") {
    write_jsonl(std::cout, lines);
  } else {
    write_jsonl(out, lines);
  }
}

void emit(const std::string& out, const json& doc) {
  if (out.empty() || out == "-") {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::ofstream f(out);
    if (!f) throw Error(Errc::kInvalidInput, "cannot write " + out);
    f << doc.dump(2) << "\n";
  }
}

// Submits each line through `step`; rejected lines are reported and skipped.
template <class F>
int for_each_line(const std::string& path, F&& step) {
  int ok = 0, failed = 0, n = 0;
  for (const auto& line : read_jsonl(std::filesystem::path(path))) {
    ++n;
    try {
      step(line);
      ++ok;
    } catch (const std::exception& e) {
      ++failed;
      std::cerr << path << ":" << n << ": " << e.what() << "\n";
    }
  }
  std::cerr << ok << " accepted, " << failed << " rejected\n";
  return failed == 0 ? 0 : 2;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string leaderboard_table(const std::vector<evaluation::LeaderboardRow>& rows) {
  std::ostringstream ss;
  ss << std::left << std::setw(22) << "team" << std::right << std::setw(8) << "mAP" << std::setw(8)
     << "Brier" << std::setw(8) << "DRS" << std::setw(6) << "A" << std::setw(6) << "B"
     << std::setw(6) << "C" << std::setw(9) << "overall" << "\n";
  auto rank = [](const std::optional<int>& r) { return r ? std::to_string(*r) : std::string("-"); };
  for (const auto& r : rows) {
    ss << std::left << std::setw(22) << r.team_id.value << std::right << std::setw(8)
       << fixed(100 * r.map) << std::setw(8) << fixed(r.brier, 3) << std::setw(8)
       << fixed(100 * r.drs) << std::setw(6) << rank(r.rank_a) << std::setw(6) << rank(r.rank_b)
       << std::setw(6) << rank(r.rank_c) << std::setw(9) << rank(r.overall) << "\n";
  }
  return ss.str();
}

// Registers an annotator and walks it to the recorded state along the
// standard onboarding path.
void enroll(orchestrator::Engine& engine, const Annotator& a) {
  namespace ae = annotator_events;
  const auto& id = a.annotator_id.value;
  engine.submit(EntityKind::kAnnotator, id, pl::AnnotatorRegistered{a.profile});
  const auto target = a.state == AnnotatorState::kDropped
                          ? a.dropped_from.value_or(AnnotatorState::kContacted)
                          : a.state;
  std::vector<AnnotatorEvent> path;
  if (target == AnnotatorState::kIneligible) {
    path = {ae::EligibilityFailed{}};
  } else if (target != AnnotatorState::kContacted) {
    path = {ae::EligibilityPassed{}};
    if (target != AnnotatorState::kEligible) path.push_back(ae::TrainingStarted{});
    if (target != AnnotatorState::kEligible && target != AnnotatorState::kTraining) {
      path.push_back(ae::ExamTaken{a.exam_score.value_or(1.0)});
    }
    if (target == AnnotatorState::kQualified || target == AnnotatorState::kActive ||
        target == AnnotatorState::kPaused) {
      path.push_back(ae::QualificationConfirmed{});
    }
    if (target == AnnotatorState::kActive || target == AnnotatorState::kPaused) {
      path.push_back(ae::Activated{});
    }
    if (target == AnnotatorState::kPaused) path.push_back(ae::Paused{});
  }
  if (a.state == AnnotatorState::kDropped) path.push_back(ae::DroppedOut{});
  for (const auto& e : path) engine.submit(EntityKind::kAnnotator, id, pl::AnnotatorStep{e});
}

std::vector<evaluation::TestClip> pool_from_intake(const std::string& intake_path,
                                                   const fusion::GroundTruth& gt,
                                                   const std::string& split) {
  std::vector<evaluation::TestClip> pool;
  for (const auto& r : from_lines<video_flow::IntakeRecord>(read_jsonl(std::filesystem::path(intake_path)))) {
    if (!split.empty() && r.split != split) continue;
    const ClipId clip(video_flow::clip_id_for(r.case_id));
    if (auto it = gt.find(clip); it != gt.end()) {
      pool.push_back({clip, r.provenance, it->second.mean_confidence});
    }
  }
  return pool;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operations for multi-annotator surgical video campaigns"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "service configuration (JSON)");
  app.add_option("--data-dir", g.data_dir, "event store directory (overrides config)");

  int rc = 0;

  // intake
  auto* intake = app.add_subcommand("intake", "register videos from an intake manifest");
  std::string manifest;
  intake->add_option("manifest", manifest, "JSON-lines intake records")->required();
  intake->callback([&] {
    Service svc(service_config(g));
    rc = for_each_line(manifest, [&](const json& line) {
      auto r = line.get<video_flow::IntakeRecord>();
      const auto id = r.case_id.value;
      svc.write([&](auto& e) { return e.submit(EntityKind::kVideo, id, pl::VideoRegistered{std::move(r)}); });
    });
  });

  // screen
  auto* screen = app.add_subcommand("screen", "submit rater verdicts ({case_id, preannotation} lines)");
  std::string verdicts, audit_out;
  screen->add_option("verdicts", verdicts)->required();
  screen->add_option("--audit", audit_out, "write the screening audit of touched cases");
  screen->callback([&] {
    Service svc(service_config(g));
    std::set<CaseId> touched;
    rc = for_each_line(verdicts, [&](const json& line) {
      const auto id = line.at("case_id").get<CaseId>();
      const auto p = line.at("preannotation").get<PreAnnotation>();
      svc.write([&](auto& e) {
        const auto& videos = e.state().videos;
        auto it = videos.find(id);
        if (it == videos.end()) throw Error(Errc::kNotFound, "unknown case " + id.value);
        if (it->second.state == VideoState::kReceived) {
          e.submit(EntityKind::kVideo, id.value, pl::VideoStep{video_events::ScreeningStarted{}});
        }
        return e.submit(EntityKind::kVideo, id.value,
                        pl::VideoStep{video_events::PreannotationSubmitted{p}});
      });
      touched.insert(id);
    });
    std::vector<json> lines;
    for (const auto& id : touched) lines.push_back(video_flow::screening_audit_line(svc.state().videos.at(id)));
    if (!audit_out.empty()) emit(audit_out, lines);
  });

  // enroll
  auto* enroll_cmd = app.add_subcommand("enroll", "register annotators (Annotator JSON lines)");
  std::string annotators_path;
  enroll_cmd->add_option("annotators", annotators_path)->required();
  enroll_cmd->callback([&] {
    Service svc(service_config(g));
    rc = for_each_line(annotators_path, [&](const json& line) {
      const auto a = line.get<Annotator>();
      svc.write([&](auto& e) { enroll(e, a); });
    });
  });

  // assess
  auto* assess = app.add_subcommand("assess", "submit completed assessments");
  std::string assessments_path;
  assess->add_option("assessments", assessments_path)->required();
  assess->callback([&] {
    Service svc(service_config(g));
    rc = for_each_line(assessments_path, [&](const json& line) {
      auto a = line.get<Assessment>();
      svc.write([&](auto& e) {
        return e.submit(EntityKind::kCoverage, orchestrator::kCoverageStream, pl::AssessmentAccepted{a});
      });
    });
  });

  // schedule tick
  auto* schedule = app.add_subcommand("schedule", "assignment scheduling");
  schedule->require_subcommand(1);
  auto* tick = schedule->add_subcommand("tick", "issue the next assignment batch");
  std::optional<std::uint64_t> tick_seed;
  std::optional<Timestamp> tick_at;
  std::string batch_out;
  tick->add_option("--seed", tick_seed, "tie-break seed (overrides config)");
  tick->add_option("--at", tick_at, "issue time, epoch seconds (default: now)");
  tick->add_option("--out", batch_out, "batch JSON lines (default: stdout)");
  tick->callback([&] {
    auto cfg = service_config(g);
    if (tick_seed) cfg.engine.seed = *tick_seed;
    const Timestamp at = tick_at.value_or(system_now());
    Service svc(cfg, [at] { return at; });
    const auto batch = svc.write([](auto& e) { return e.issue_tick(); });
    emit(batch_out, scheduler::batch_to_lines(batch));
    std::cerr << "tick " << batch.tick_id << ": " << batch.assignments.size() << " assignments\n";
  });

  // effects
  auto* effects = app.add_subcommand("effects", "run reminders, ticks and fusion jobs that are due");
  std::optional<Timestamp> effects_at;
  effects->add_option("--at", effects_at, "current time, epoch seconds (default: now)");
  effects->callback([&] {
    const Timestamp at = effects_at.value_or(system_now());
    Service svc(service_config(g), [at] { return at; });
    emit("", json(svc.write([](auto& e) { return e.run_due_effects(); })));
  });

  // fuse
  auto* fuse = app.add_subcommand("fuse", "export fused ground truth");
  std::string fuse_in, fuse_out;
  fuse->add_option("--assessments", fuse_in, "fuse this file instead of the store");
  fuse->add_option("--out", fuse_out, "ground-truth JSON lines (default: stdout)");
  fuse->callback([&] {
    fusion::GroundTruth gt;
    if (!fuse_in.empty()) {
      gt = fusion::fuse_all(from_lines<Assessment>(read_jsonl(std::filesystem::path(fuse_in))));
    } else {
      Service svc(service_config(g));
      gt = svc.state().fused;
    }
    emit(fuse_out, fusion::ground_truth_lines(gt));
  });

  // submit
  auto* submit = app.add_subcommand("submit", "store a team's prediction file");
  std::string submit_path;
  bool submit_baseline = false;
  submit->add_option("predictions", submit_path)->required();
  submit->add_flag("--baseline", submit_baseline, "mark as baseline (unranked)");
  submit->callback([&] {
    auto sub = evaluation::submission_from_lines(read_jsonl(std::filesystem::path(submit_path)));
    sub.is_baseline = submit_baseline;
    Service svc(service_config(g));
    const auto team = sub.team_id.value;
    svc.write([&](auto& e) { return e.submit(EntityKind::kSubmission, team, pl::SubmissionReceived{std::move(sub)}); });
  });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "score prediction files against ground truth");
  std::vector<std::string> eval_subs;
  std::string eval_gt, eval_intake, eval_splits, eval_split = "test", eval_out;
  evaluate->add_option("--submission", eval_subs, "prediction JSON lines (repeatable)")->required();
  evaluate->add_option("--ground-truth", eval_gt)->required();
  evaluate->add_option("--intake", eval_intake, "intake manifest with provenance and split")->required();
  evaluate->add_option("--split", eval_split, "split to evaluate on");
  evaluate->add_option("--splits", eval_splits, "variant split definitions (JSON array)");
  evaluate->add_option("--out", eval_out, "metrics reports, JSON lines (default: stdout)");
  evaluate->callback([&] {
    const auto gt = fusion::ground_truth_from_lines(read_jsonl(std::filesystem::path(eval_gt)));
    const auto pool = pool_from_intake(eval_intake, gt, eval_split);
    if (pool.empty()) throw Error(Errc::kEmptySplit, "no ground-truth clips in split " + eval_split);
    const auto defs = eval_splits.empty()
                          ? evaluation::default_variant_splits_for(pool)
                          : read_json(eval_splits).get<std::vector<evaluation::VariantSplitDef>>();
    const auto splits = evaluation::build_variant_splits(pool, defs);
    std::vector<json> out;
    for (const auto& path : eval_subs) {
      const auto sub = evaluation::submission_from_lines(read_jsonl(std::filesystem::path(path)));
      out.push_back(evaluation::evaluate_submission(sub, gt, pool, splits));
    }
    emit(eval_out, out);
  });

  // leaderboard
  auto* board = app.add_subcommand("leaderboard", "rank metrics reports");
  std::string board_in, board_format = "table";
  board->add_option("metrics", board_in, "metrics reports, JSON lines (default: the store)");
  board->add_option("--format", board_format, "table, json or csv")
      ->check(CLI::IsMember({"table", "json", "csv"}));
  board->callback([&] {
    std::vector<evaluation::MetricsReport> reports;
    if (!board_in.empty()) {
      reports = from_lines<evaluation::MetricsReport>(read_jsonl(std::filesystem::path(board_in)));
    } else {
      Service svc(service_config(g));
      const auto m = campaign_metrics(svc.state(), svc.config());
      for (const auto& [team, why] : m.rejected) std::cerr << team.value << ": " << why << "\n";
      reports = m.reports;
    }
    const auto rows = evaluation::leaderboard(reports);
    if (board_format == "json") {
      std::cout << evaluation::leaderboard_json(rows).dump(2) << "\n";
    } else if (board_format == "csv") {
      std::cout << evaluation::leaderboard_csv(rows);
    } else {
      std::cout << leaderboard_table(rows);
    }
  });

  // simulate
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic campaign");
  std::string sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  bool sim_campaign = false;
  simulate->add_option("--config", sim_config, "simulator configuration (JSON; default: published marginals)");
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--out", sim_out)->required();
  simulate->add_flag("--campaign", sim_campaign, "also run the scheduling campaign and write its transcript");
  simulate->callback([&] {
    auto cfg = sim_config.empty() ? simulator::paper_defaults() : read_json(sim_config).get<simulator::SimConfig>();
    if (sim_seed) cfg.seed = *sim_seed;
    const auto pool = simulator::generate_pool(cfg);
    const std::filesystem::path dir(sim_out);
    std::vector<json> intake_lines, screening, truth;
    for (const auto& v : pool.videos) {
      intake_lines.push_back(v.record);
      for (const auto& p : v.preannotations) screening.push_back(json{{"case_id", v.record.case_id}, {"preannotation", p}});
    }
    write_jsonl(dir / "intake.jsonl", intake_lines);
    write_jsonl(dir / "screening.jsonl", screening);
    write_jsonl(dir / "annotators.jsonl", to_lines(pool.annotators));
    write_jsonl(dir / "assessments.jsonl", to_lines(pool.assessments));
    const auto gt = fusion::fuse_all(pool.assessments);
    write_jsonl(dir / "ground_truth.jsonl", fusion::ground_truth_lines(gt));
    write_jsonl(dir / "submission_expert.jsonl",
                evaluation::submission_lines(simulator::synthetic_submission("expert-soft", gt, 0.0, cfg.seed)));
    write_jsonl(dir / "submission_noisy.jsonl",
                evaluation::submission_lines(simulator::synthetic_submission("noisy-team", gt, 0.25, cfg.seed)));
    emit((dir / "stats.json").string(), json(fusion::dataset_stats(simulator::pool_clips(pool))));
    emit((dir / "funnel.json").string(),
         json(annotator_flow::funnel_report(simulator::simulate_funnel(cfg.funnel, cfg.seed))));
    emit((dir / "sim_config.json").string(), json(cfg));
    if (sim_campaign) {
      simulator::CampaignPolicy policy;
      policy.dropout_rate = cfg.dropout_rate;
      const auto tr = simulator::run_campaign(pool, cfg, policy);
      std::vector<json> ticks;
      for (const auto& t : tr.ticks) {
        ticks.push_back(json{{"tick_id", t.tick_id}, {"at", t.at}, {"assigned", t.assigned},
                             {"completed", t.completed}, {"revoked", t.revoked},
                             {"reminders", t.reminders}, {"dropouts", t.dropouts}});
      }
      write_jsonl(dir / "campaign_ticks.jsonl", ticks);
      write_jsonl(dir / "campaign_events.jsonl", to_lines(tr.log));
      std::cerr << "full coverage after " << tr.ticks_to_full_coverage << " ticks\n";
    }
    std::cerr << "wrote " << pool.videos.size() << " videos, " << pool.annotators.size()
              << " annotators, " << pool.assessments.size() << " assessments to " << sim_out << "\n";
  });

  // audit
  auto* audit_cmd = app.add_subcommand("audit", "causality audit of a streaming predictor process");
  std::vector<std::string> predictor_cmd;
  int audit_clips = 10;
  std::uint64_t audit_seed = 1;
  int audit_timeout_ms = 5000;
  audit_cmd->add_option("--clips", audit_clips);
  audit_cmd->add_option("--seed", audit_seed);
  audit_cmd->add_option("--timeout-ms", audit_timeout_ms);
  audit_cmd->add_option("command", predictor_cmd, "predictor command line (after --)")->required();
  audit_cmd->callback([&] {
    audit::ProcessPredictor predictor(predictor_cmd, std::chrono::milliseconds(audit_timeout_ms));
    audit::FileMediaStore store(std::filesystem::temp_directory_path() /
                                ("cvsops-audit-" + std::to_string(::getpid())));
    std::mt19937_64 rng(audit_seed);
    std::normal_distribution<double> feature(0.0, 1.0);
    int failed = 0;
    for (int c = 0; c < audit_clips; ++c) {
      audit::SyntheticMedia media{ClipId("audit-" + std::to_string(c)), {}};
      for (int f = 0; f < kClipFrames; ++f) media.frames.push_back({feature(rng), feature(rng), feature(rng)});
      const auto r = audit::causal_audit(predictor, media, store);
      std::cout << r.summary() << "\n";
      failed += !r.passed();
    }
    rc = failed == 0 ? 0 : 3;
  });

  // replay
  auto* replay = app.add_subcommand("replay", "rebuild state from the event log and check it");
  bool take_snapshot = false;
  replay->add_flag("--snapshot", take_snapshot, "write a snapshot of the rebuilt state");
  replay->callback([&] {
    const auto cfg = service_config(g);
    orchestrator::FileEventStore store(cfg.data_dir);
    orchestrator::FileErrorLog errors(cfg.error_log_path());
    const auto full = orchestrator::replay(store.events(), cfg.engine);
    const auto restored = orchestrator::restore(store, cfg.engine, &errors, system_now());
    const auto& s = full;
    int effects_pending = 0;
    for (const auto& [_, e] : s.effects) effects_pending += e.status == orchestrator::EffectStatus::kPending;
    emit("", json{{"events", s.applied},
                  {"videos", s.videos.size()},
                  {"clips", s.coverage.clips.size()},
                  {"annotators", s.annotators.size()},
                  {"assessments", [&] { std::size_t n = 0; for (const auto& [_, v] : s.assessments) n += v.size(); return n; }()},
                  {"fused", s.fused.size()},
                  {"submissions", s.submissions.size()},
                  {"next_tick", s.coverage.next_tick},
                  {"pending_effects", effects_pending},
                  {"snapshot_consistent", restored == full}});
    if (take_snapshot) store.save_snapshot(orchestrator::encode_snapshot(full));
    rc = restored == full ? 0 : 4;
  });

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP API");
  serve->callback([&] {
    Service svc(service_config(g));
    api::Api api(svc);
    httplib::Server server;
    api.mount(server);
    const auto& c = svc.config();
    std::cerr << "listening on " << c.host << ":" << c.port << "\n";
    if (!server.listen(c.host, c.port)) throw Error(Errc::kInvalidConfig, "cannot bind " + c.host + ":" + std::to_string(c.port));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "cvsops: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
