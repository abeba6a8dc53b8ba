#pragma once

// A configured engine over the on-disk store, plus the read-side reports the
// CLI and HTTP API share.

#include <chrono>
#include <memory>
#include <mutex>

#include "cvsops/annotator_flow.hpp"
#include "cvsops/config.hpp"
#include "cvsops/engine.hpp"
#include "cvsops/evaluation.hpp"

namespace cvsops {

inline Timestamp system_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// Metrics for every stored submission against the fused test pool. Teams
// that cannot be scored are listed in `rejected` with the reason.
struct CampaignMetrics {
  std::vector<evaluation::MetricsReport> reports;
  std::map<TeamId, std::string> rejected;
};

inline CampaignMetrics campaign_metrics(const orchestrator::EngineState& s,
                                        const ServiceConfig& cfg) {
  CampaignMetrics out;
  if (s.submissions.empty()) return out;
  const auto pool = orchestrator::test_pool(s, cfg.test_split);
  if (pool.empty()) throw Error(Errc::kEmptySplit, "no fused clips in split " + cfg.test_split);
  const auto defs =
      cfg.variant_splits.empty() ? evaluation::default_variant_splits_for(pool) : cfg.variant_splits;
  const auto splits = evaluation::build_variant_splits(pool, defs);
  for (const auto& [team, sub] : s.submissions) {
    try {
      out.reports.push_back(evaluation::evaluate_submission(sub, s.fused, pool, splits));
    } catch (const Error& e) {
      out.rejected[team] = e.what();
    }
  }
  return out;
}

inline json metrics_json(const CampaignMetrics& m) {
  json rejected = json::object();
  for (const auto& [team, why] : m.rejected) rejected[team.value] = why;
  return json{{"reports", m.reports}, {"rejected", rejected}};
}

// Engine plus its adapters as bound by the configuration. Writes go through
// `write`, which serializes writers and takes periodic snapshots.
class Service {
 public:
  explicit Service(ServiceConfig cfg, orchestrator::Clock clock = system_now)
      : cfg_(std::move(cfg)),
        store_(cfg_.data_dir),
        errors_(cfg_.error_log_path()),
        notifier_(make_notifier(cfg_)),
        engine_(cfg_.engine, store_, *notifier_, errors_, std::move(clock)) {}

  const ServiceConfig& config() const { return cfg_; }
  orchestrator::Engine& engine() { return engine_; }
  const orchestrator::EngineState& state() const { return engine_.state(); }

  // Consistent copies for concurrent readers; see Engine::enable_read_views.
  void enable_read_views() {
    std::lock_guard lock(writer_);
    engine_.enable_read_views();
  }
  std::shared_ptr<const orchestrator::EngineState> view() const { return engine_.view(); }

  template <class F>
  auto write(F&& f) {
    std::lock_guard lock(writer_);
    struct SnapshotAfter {
      Service& s;
      ~SnapshotAfter() {
        try {
          s.maybe_snapshot();
        } catch (...) {
          // The log stays authoritative; the next snapshot retries.
        }
      }
    } after{*this};
    return f(engine_);
  }

 private:
  static std::unique_ptr<orchestrator::NotificationPort> make_notifier(const ServiceConfig& c) {
    if (c.notifier == "spool") return std::make_unique<orchestrator::SpoolNotifier>(c.spool_path());
    return std::make_unique<orchestrator::RecordingNotifier>();
  }

  void maybe_snapshot() {
    const auto applied = engine_.state().applied;
    if (cfg_.snapshot_every > 0 && applied - last_snapshot_ >= cfg_.snapshot_every) {
      engine_.snapshot();
      last_snapshot_ = applied;
    }
  }

  ServiceConfig cfg_;
  orchestrator::FileEventStore store_;
  orchestrator::FileErrorLog errors_;
  std::unique_ptr<orchestrator::NotificationPort> notifier_;
  orchestrator::Engine engine_;
  std::mutex writer_;
  std::int64_t last_snapshot_ = 0;
};

}  // namespace cvsops
