#pragma once

// Declarative service configuration with CVSOPS_* environment overrides, and
// JSON-lines file helpers shared by the CLI.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cvsops/engine.hpp"
#include "cvsops/evaluation.hpp"

namespace cvsops {

// ---------------------------------------------------------------------------
// JSON lines

inline std::vector<json> read_jsonl(std::istream& in, const std::string& what = "input") {
  std::vector<json> out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw Error(Errc::kInvalidInput, what + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  return read_jsonl(in, path.string());
}

inline void write_jsonl(std::ostream& out, const std::vector<json>& lines) {
  for (const auto& l : lines) out << l.dump() << "\n";
}

inline void write_jsonl(const std::filesystem::path& path, const std::vector<json>& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(Errc::kInvalidInput, "cannot write " + path.string());
  write_jsonl(out, lines);
}

template <class T>
std::vector<json> to_lines(const std::vector<T>& items) {
  return {items.begin(), items.end()};
}

template <class T>
std::vector<T> from_lines(const std::vector<json>& lines) {
  std::vector<T> out;
  for (const auto& l : lines) out.push_back(l.get<T>());
  return out;
}

inline json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::kInvalidInput, path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Service configuration

struct ServiceConfig {
  orchestrator::EngineConfig engine;
  std::string data_dir = "cvsops-data";
  std::string notifier = "memory";  // memory | spool
  std::string spool_dir;            // defaults to <data_dir>/outbox
  std::string error_log;            // defaults to <data_dir>/errors.jsonl
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string api_token;
  std::int64_t snapshot_every = 1000;  // events between snapshots
  std::string test_split = "test";
  std::vector<evaluation::VariantSplitDef> variant_splits;  // empty: derived from the pool

  std::string spool_path() const { return spool_dir.empty() ? data_dir + "/outbox" : spool_dir; }
  std::string error_log_path() const {
    return error_log.empty() ? data_dir + "/errors.jsonl" : error_log;
  }
};

inline void validate(const ServiceConfig& c) {
  const auto& s = c.engine.scheduler;
  if (s.bucket_size < 1 || s.annotators_per_clip < 1 || s.cadence <= 0) {
    throw Error(Errc::kInvalidConfig, "scheduler settings must be positive");
  }
  const auto& r = c.engine.retry;
  if (r.base <= 0 || r.factor < 1 || r.max_attempts < 1) {
    throw Error(Errc::kInvalidConfig, "retry settings must be positive");
  }
  if (c.engine.timestamp_tolerance < 0) throw Error(Errc::kInvalidConfig, "negative tolerance");
  if (c.notifier != "memory" && c.notifier != "spool") {
    throw Error(Errc::kInvalidConfig, "notifier must be 'memory' or 'spool'");
  }
  if (c.port < 0 || c.port > 65535) throw Error(Errc::kInvalidConfig, "port out of range");
  if (c.snapshot_every < 0) throw Error(Errc::kInvalidConfig, "negative snapshot interval");
}

inline void to_json(json& j, const ServiceConfig& c) {
  const auto& e = c.engine;
  j = json{{"cadence_days", static_cast<double>(e.scheduler.cadence) / kDay},
           {"bucket_size", e.scheduler.bucket_size},
           {"annotators_per_clip", e.scheduler.annotators_per_clip},
           {"timestamp_tolerance_s", e.timestamp_tolerance},
           {"retry",
            {{"base_s", e.retry.base}, {"factor", e.retry.factor},
             {"max_attempts", e.retry.max_attempts}}},
           {"seed", e.seed},
           {"organizer_contact", e.organizer_contact},
           {"data_dir", c.data_dir},
           {"adapters",
            {{"notifier", c.notifier}, {"spool_dir", c.spool_dir}, {"error_log", c.error_log}}},
           {"api", {{"host", c.host}, {"port", c.port}, {"token", c.api_token}}},
           {"snapshot_every", c.snapshot_every},
           {"test_split", c.test_split},
           {"variant_splits", c.variant_splits}};
}

inline void from_json(const json& j, ServiceConfig& c) {
  c = {};
  auto& e = c.engine;
  if (j.contains("cadence_days")) {
    e.scheduler.cadence = static_cast<Timestamp>(j.at("cadence_days").get<double>() * kDay);
  }
  e.scheduler.bucket_size = j.value("bucket_size", e.scheduler.bucket_size);
  e.scheduler.annotators_per_clip = j.value("annotators_per_clip", e.scheduler.annotators_per_clip);
  e.timestamp_tolerance = j.value("timestamp_tolerance_s", e.timestamp_tolerance);
  if (j.contains("retry")) {
    const auto& r = j.at("retry");
    e.retry.base = r.value("base_s", e.retry.base);
    e.retry.factor = r.value("factor", e.retry.factor);
    e.retry.max_attempts = r.value("max_attempts", e.retry.max_attempts);
  }
  e.seed = j.value("seed", e.seed);
  e.organizer_contact = j.value("organizer_contact", e.organizer_contact);
  c.data_dir = j.value("data_dir", c.data_dir);
  if (j.contains("adapters")) {
    const auto& a = j.at("adapters");
    c.notifier = a.value("notifier", c.notifier);
    c.spool_dir = a.value("spool_dir", c.spool_dir);
    c.error_log = a.value("error_log", c.error_log);
  }
  if (j.contains("api")) {
    const auto& a = j.at("api");
    c.host = a.value("host", c.host);
    c.port = a.value("port", c.port);
    c.api_token = a.value("token", c.api_token);
  }
  c.snapshot_every = j.value("snapshot_every", c.snapshot_every);
  c.test_split = j.value("test_split", c.test_split);
  if (j.contains("variant_splits")) j.at("variant_splits").get_to(c.variant_splits);
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

// CVSOPS_DATA_DIR, CVSOPS_API_TOKEN, CVSOPS_HOST, CVSOPS_PORT, CVSOPS_SEED,
// CVSOPS_CADENCE_DAYS, CVSOPS_BUCKET_SIZE, CVSOPS_NOTIFIER, CVSOPS_SPOOL_DIR,
// CVSOPS_ERROR_LOG, CVSOPS_RETRY_BASE_S, CVSOPS_RETRY_MAX_ATTEMPTS.
inline void apply_env(ServiceConfig& c, const EnvLookup& env = process_env) {
  auto number = [](const std::string& name, const std::string& v) {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw Error(Errc::kInvalidConfig, name + " is not a number: '" + v + "'");
    }
  };
  auto str = [&](const char* name, std::string& field) {
    if (auto v = env(name)) field = *v;
  };
  auto num = [&](const char* name, auto& field) {
    if (auto v = env(name)) field = static_cast<std::remove_reference_t<decltype(field)>>(number(name, *v));
  };
  str("CVSOPS_DATA_DIR", c.data_dir);
  str("CVSOPS_API_TOKEN", c.api_token);
  str("CVSOPS_HOST", c.host);
  str("CVSOPS_NOTIFIER", c.notifier);
  str("CVSOPS_SPOOL_DIR", c.spool_dir);
  str("CVSOPS_ERROR_LOG", c.error_log);
  num("CVSOPS_PORT", c.port);
  num("CVSOPS_SEED", c.engine.seed);
  num("CVSOPS_BUCKET_SIZE", c.engine.scheduler.bucket_size);
  num("CVSOPS_RETRY_BASE_S", c.engine.retry.base);
  num("CVSOPS_RETRY_MAX_ATTEMPTS", c.engine.retry.max_attempts);
  if (auto v = env("CVSOPS_CADENCE_DAYS")) {
    c.engine.scheduler.cadence = static_cast<Timestamp>(number("CVSOPS_CADENCE_DAYS", *v) * kDay);
  }
}

// File (optional) then environment, then validation.
inline ServiceConfig load_config(const std::optional<std::filesystem::path>& path,
                                 const EnvLookup& env = process_env) {
  ServiceConfig c;
  if (path) c = read_json(*path).get<ServiceConfig>();
  apply_env(c, env);
  validate(c);
  return c;
}

}  // namespace cvsops
