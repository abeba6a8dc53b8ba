#pragma once

// Runtime around the event fold: persistence (event log + snapshot),
// notification and error-log ports, an injected clock, and the effect runner.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cvsops/orchestrator.hpp"

namespace cvsops::orchestrator {

using Clock = std::function<Timestamp()>;

// Settable clock for tests and the simulator.
class ManualClock {
 public:
  explicit ManualClock(Timestamp start = 0) : now_(std::make_shared<Timestamp>(start)) {}
  Timestamp operator()() const { return *now_; }
  void set(Timestamp t) { *now_ = t; }
  void advance(Timestamp dt) { *now_ += dt; }

 private:
  std::shared_ptr<Timestamp> now_;
};

// ---------------------------------------------------------------------------
// Error log (JSON-lines)

struct ErrorRecord {
  Timestamp at = 0;
  std::string level = "error";  // "error" or "warning"
  std::string entity;           // "KIND/id"
  std::string event;            // event or effect type
  std::string error_class;
  std::string message;
};

inline void to_json(json& j, const ErrorRecord& r) {
  j = json{{"at", r.at},         {"level", r.level},
           {"entity", r.entity}, {"event", r.event},
           {"error_class", r.error_class}, {"message", r.message}};
}

class ErrorLog {
 public:
  virtual ~ErrorLog() = default;
  virtual void record(const ErrorRecord& r) = 0;
};

class MemoryErrorLog : public ErrorLog {
 public:
  void record(const ErrorRecord& r) override { records.push_back(r); }
  std::vector<ErrorRecord> records;
};

class FileErrorLog : public ErrorLog {
 public:
  explicit FileErrorLog(std::filesystem::path path) : path_(std::move(path)) {}
  void record(const ErrorRecord& r) override {
    std::ofstream(path_, std::ios::app) << json(r).dump() << "\n";
  }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Notification port

struct Notification {
  std::string idempotency_key;
  std::string to;
  std::string subject;
  std::string body;

  friend bool operator==(const Notification&, const Notification&) = default;
};

inline void to_json(json& j, const Notification& n) {
  j = json{{"idempotency_key", n.idempotency_key},
           {"to", n.to},
           {"subject", n.subject},
           {"body", n.body}};
}

// Adapters must treat a repeated idempotency key as already delivered.
class NotificationPort {
 public:
  virtual ~NotificationPort() = default;
  virtual void send(const Notification& n) = 0;
};

class RecordingNotifier : public NotificationPort {
 public:
  void send(const Notification& n) override {
    ++calls;
    if (failures_left > 0) {
      --failures_left;
      throw std::runtime_error("gateway unavailable");
    }
    if (keys_.insert(n.idempotency_key).second) delivered.push_back(n);
  }

  int failures_left = 0;
  int calls = 0;
  std::vector<Notification> delivered;

 private:
  std::set<std::string> keys_;
};

// Drops one JSON file per message into a spool directory picked up by the
// mail gateway; the file name is the idempotency key.
class SpoolNotifier : public NotificationPort {
 public:
  explicit SpoolNotifier(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }
  void send(const Notification& n) override {
    std::string name = n.idempotency_key;
    for (char& c : name) {
      if (c == '/' || c == '\\') c = '_';
    }
    const auto path = dir_ / (name + ".json");
    if (std::filesystem::exists(path)) return;
    const auto tmp = dir_ / (name + ".tmp");
    std::ofstream(tmp) << json(n).dump() << "\n";
    std::filesystem::rename(tmp, path);
  }

 private:
  std::filesystem::path dir_;
};

// ---------------------------------------------------------------------------
// Event store

inline std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string encode_snapshot(const EngineState& s) {
  const auto body = json(s).dump();
  return json{{"applied", s.applied}, {"checksum", fnv1a(body)}, {"state", body}}.dump();
}

inline EngineState decode_snapshot(const std::string& blob) {
  try {
    const auto j = json::parse(blob);
    const auto body = j.at("state").get<std::string>();
    if (fnv1a(body) != j.at("checksum").get<std::uint64_t>()) {
      throw Error(Errc::kCorruptSnapshot, "snapshot checksum mismatch");
    }
    auto s = json::parse(body).get<EngineState>();
    if (s.applied != j.at("applied").get<std::int64_t>()) {
      throw Error(Errc::kCorruptSnapshot, "snapshot header disagrees with body");
    }
    return s;
  } catch (const Error& e) {
    if (e.code() == Errc::kCorruptSnapshot) throw;
    throw Error(Errc::kCorruptSnapshot, e.what());
  } catch (const std::exception& e) {
    throw Error(Errc::kCorruptSnapshot, e.what());
  }
}

class EventStore {
 public:
  virtual ~EventStore() = default;
  virtual void append(const Event& e) = 0;
  virtual std::vector<Event> events() const = 0;
  virtual void save_snapshot(const std::string& blob) = 0;
  virtual std::optional<std::string> load_snapshot() const = 0;
};

class MemoryEventStore : public EventStore {
 public:
  void append(const Event& e) override { log.push_back(e); }
  std::vector<Event> events() const override { return log; }
  void save_snapshot(const std::string& blob) override { snapshot = blob; }
  std::optional<std::string> load_snapshot() const override { return snapshot; }

  std::vector<Event> log;
  std::optional<std::string> snapshot;
};

// events.jsonl (append-only) and snapshot.json under one directory.
class FileEventStore : public EventStore {
 public:
  explicit FileEventStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  void append(const Event& e) override {
    std::ofstream out(dir_ / "events.jsonl", std::ios::app);
    out << json(e).dump() << "\n";
    out.flush();
    if (!out) throw Error(Errc::kInvalidInput, "cannot append to event log");
  }

  std::vector<Event> events() const override {
    std::vector<Event> out;
    std::ifstream in(dir_ / "events.jsonl");
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(json::parse(line).get<Event>());
    }
    return out;
  }

  void save_snapshot(const std::string& blob) override {
    const auto tmp = dir_ / "snapshot.json.tmp";
    std::ofstream(tmp) << blob;
    std::filesystem::rename(tmp, dir_ / "snapshot.json");
  }

  std::optional<std::string> load_snapshot() const override {
    std::ifstream in(dir_ / "snapshot.json");
    if (!in) return std::nullopt;
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

 private:
  std::filesystem::path dir_;
};

// Snapshot (if valid) plus the tail of the log. A corrupt snapshot falls back
// to full replay and leaves a warning in `log`.
inline EngineState restore(const EventStore& store, const EngineConfig& cfg = {},
                           ErrorLog* log = nullptr, Timestamp now = 0) {
  const auto events = store.events();
  EngineState base;
  if (auto blob = store.load_snapshot()) {
    try {
      base = decode_snapshot(*blob);
      if (base.applied > static_cast<std::int64_t>(events.size())) {
        throw Error(Errc::kCorruptSnapshot, "snapshot is ahead of the event log");
      }
    } catch (const Error& e) {
      base = {};
      if (log) {
        log->record({now, "warning", "STORE/snapshot", "RESTORE", std::string(to_string(e.code())),
                     std::string(e.what()) + "; replaying full log"});
      }
    }
  }
  return replay(events, cfg, std::move(base));
}

// ---------------------------------------------------------------------------
// Engine

struct EffectOutcome {
  std::string effect_id;
  EffectKind kind = EffectKind::kReminder;
  bool ok = true;
  bool sent = false;  // a notification went to the adapter
  int attempts = 0;
  EffectStatus status = EffectStatus::kPending;
  std::string error;
};

struct ExecutionReport {
  Timestamp at = 0;
  std::vector<EffectOutcome> outcomes;

  int count(EffectStatus s) const {
    int n = 0;
    for (const auto& o : outcomes) n += o.status == s;
    return n;
  }
};

inline void to_json(json& j, const EffectOutcome& o) {
  j = json{{"effect_id", o.effect_id}, {"kind", o.kind},         {"ok", o.ok},
           {"sent", o.sent},           {"attempts", o.attempts}, {"status", o.status},
           {"error", o.error}};
}
inline void to_json(json& j, const ExecutionReport& r) {
  j = json{{"at", r.at}, {"outcomes", r.outcomes}};
}

class Engine {
 public:
  Engine(EngineConfig cfg, EventStore& store, NotificationPort& notifier, ErrorLog& errors,
         Clock clock)
      : cfg_(std::move(cfg)),
        store_(store),
        notifier_(notifier),
        errors_(errors),
        clock_(std::move(clock)) {
    state_ = restore(store_, cfg_, &errors_, clock_());
    publish();
  }

  const EngineConfig& config() const { return cfg_; }
  const EngineState& state() const { return state_; }
  Timestamp now() const { return clock_(); }

  // Readers get an immutable copy taken after the last write, so they never
  // hold the writer up. Off by default: copying costs O(state) per write.
  void enable_read_views(bool on = true) {
    views_ = on;
    publish();
  }
  std::shared_ptr<const EngineState> view() const {
    std::lock_guard lock(view_mutex_);
    return view_;
  }

  // Appends one event to the entity's stream. A rejected event changes
  // nothing and is logged and rethrown. If the store refuses the write, the
  // state is rebuilt from what the store holds.
  std::vector<std::string> submit(EntityKind kind, const std::string& entity_id,
                                  Payload payload) {
    Event ev{next_event_id(state_, kind, entity_id), kind, entity_id, std::move(payload),
             clock_()};
    std::vector<std::string> emitted;
    try {
      emitted = apply_in_place(state_, ev, cfg_);
    } catch (const Error& e) {
      errors_.record({ev.occurred_at, "error", stream_key(kind, entity_id),
                      std::string(kPayloadNames[ev.payload.index()]),
                      std::string(to_string(e.code())), e.what()});
      throw;
    }
    try {
      store_.append(ev);
    } catch (...) {
      state_ = restore(store_, cfg_);
      publish();
      throw;
    }
    publish();
    return emitted;
  }

  // Revokes stale work of dropped annotators, then plans and records the next
  // batch for every active annotator.
  scheduler::AssignmentBatch issue_tick() {
    const auto now = clock_();
    auto preview = state_.coverage;
    auto revoked =
        scheduler::revoke_dropped(preview, dropped_annotators(state_), now, cfg_.scheduler);
    if (!revoked.empty()) {
      submit(EntityKind::kCoverage, kCoverageStream,
             payloads::AssignmentsRevoked{std::move(revoked)});
    }
    auto batch = scheduler::plan_tick(state_.coverage, active_annotators(state_), now, cfg_.seed,
                                      cfg_.scheduler);
    submit(EntityKind::kCoverage, kCoverageStream, payloads::TickIssued{batch});
    return batch;
  }

  // Runs every pending effect due at or before now, in (due_at, id) order.
  // Adapter failures are recorded and retried with backoff, never thrown.
  ExecutionReport run_due_effects() {
    ExecutionReport report{clock_(), {}};
    std::vector<std::pair<Timestamp, std::string>> due;
    for (const auto& [id, e] : state_.effects) {
      if (e.status == EffectStatus::kPending && e.due_at <= report.at) due.emplace_back(e.due_at, id);
    }
    std::sort(due.begin(), due.end());
    for (const auto& [_, id] : due) {
      const auto it = state_.effects.find(id);
      if (it == state_.effects.end() || it->second.status != EffectStatus::kPending) continue;
      const Effect effect = it->second;
      EffectOutcome out{id, effect.kind, true, false, 0, EffectStatus::kPending, {}};
      try {
        out.sent = execute(effect);
      } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
        const auto* err = dynamic_cast<const Error*>(&e);
        errors_.record({report.at, "error", stream_key(EntityKind::kEffect, id),
                        std::string(enum_name(effect.kind)),
                        err ? std::string(to_string(err->code())) : "AdapterError", e.what()});
      }
      submit(EntityKind::kEffect, id, payloads::EffectAttempted{out.ok, out.error});
      const auto& after = state_.effects.at(id);
      out.attempts = after.attempts;
      out.status = after.status;
      report.outcomes.push_back(std::move(out));
    }
    return report;
  }

  void snapshot() { store_.save_snapshot(encode_snapshot(state_)); }

 private:
  // Returns true when a notification was handed to the adapter.
  bool execute(const Effect& e) {
    switch (e.kind) {
      case EffectKind::kReminder: {
        const AnnotatorId who(e.target);
        const auto a = state_.annotators.find(who);
        if (a == state_.annotators.end() || a->second.state == AnnotatorState::kDropped) {
          return false;
        }
        int open = 0;
        for (const auto& [_, cov] : state_.coverage.clips) {
          auto p = cov.pending.find(who);
          open += p != cov.pending.end() && p->second.tick_id == e.tick_id;
        }
        if (open == 0) return false;
        notifier_.send({e.effect_id, a->second.profile.contact.empty() ? who.value
                                                                       : a->second.profile.contact,
                        "Assessment reminder",
                        std::to_string(open) + " clip(s) from batch " +
                            std::to_string(e.tick_id) + " are past due"});
        return true;
      }
      case EffectKind::kNotifyOrganizer:
        notifier_.send({e.effect_id, cfg_.organizer_contact, "Annotator ready for activation",
                        "Annotator " + e.target + " passed the competency exam"});
        return true;
      case EffectKind::kTickDue:
        if (state_.coverage.next_tick == e.tick_id) issue_tick();
        return false;
      case EffectKind::kFusionJob:
        return false;  // fusion runs when the attempt is folded into the state
    }
    return false;
  }

  void publish() {
    if (!views_) return;
    auto copy = std::make_shared<const EngineState>(state_);
    std::lock_guard lock(view_mutex_);
    view_ = std::move(copy);
  }

  EngineConfig cfg_;
  EventStore& store_;
  NotificationPort& notifier_;
  ErrorLog& errors_;
  Clock clock_;
  EngineState state_;
  bool views_ = false;
  mutable std::mutex view_mutex_;
  std::shared_ptr<const EngineState> view_;
};

}  // namespace cvsops::orchestrator
