#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "cvsops/config.hpp"
#include "errc.hpp"

using namespace cvsops;

namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  auto p = std::filesystem::temp_directory_path() /
           ("cvsops-config-" + std::to_string(::getpid()) + "-" + name);
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  const auto c = load_config(std::nullopt, fake_env({}));
  EXPECT_EQ(c.engine.scheduler.bucket_size, 20);
  EXPECT_EQ(c.engine.scheduler.cadence, 14 * kDay);
  EXPECT_EQ(c.engine.retry.max_attempts, 3);
  EXPECT_EQ(c.notifier, "memory");
  EXPECT_EQ(c.error_log_path(), c.data_dir + "/errors.jsonl");
  EXPECT_EQ(c.spool_path(), c.data_dir + "/outbox");
}

TEST(Config, FileThenEnvironment) {
  const auto path = temp_file("a.json", R"({
    "cadence_days": 7, "bucket_size": 10, "seed": 5, "data_dir": "/tmp/x",
    "adapters": {"notifier": "spool"}, "api": {"port": 9000, "token": "file-token"},
    "retry": {"base_s": 60}
  })");
  const auto c = load_config(path, fake_env({{"CVSOPS_API_TOKEN", "env-token"},
                                             {"CVSOPS_CADENCE_DAYS", "1.5"},
                                             {"CVSOPS_PORT", "9100"}}));
  EXPECT_EQ(c.engine.scheduler.cadence, static_cast<Timestamp>(1.5 * kDay));
  EXPECT_EQ(c.engine.scheduler.bucket_size, 10);
  EXPECT_EQ(c.engine.seed, 5u);
  EXPECT_EQ(c.engine.retry.base, 60);
  EXPECT_EQ(c.engine.retry.factor, 2);
  EXPECT_EQ(c.notifier, "spool");
  EXPECT_EQ(c.spool_path(), "/tmp/x/outbox");
  EXPECT_EQ(c.api_token, "env-token");
  EXPECT_EQ(c.port, 9100);
  std::filesystem::remove(path);
}

TEST(Config, BadValuesRejected) {
  EXPECT_EQ(testkit::error_code([] { load_config(std::nullopt, fake_env({{"CVSOPS_PORT", "80x"}})); }),
            Errc::kInvalidConfig);
  EXPECT_EQ(testkit::error_code(
                [] { load_config(std::nullopt, fake_env({{"CVSOPS_BUCKET_SIZE", "0"}})); }),
            Errc::kInvalidConfig);
  EXPECT_EQ(testkit::error_code(
                [] { load_config(std::nullopt, fake_env({{"CVSOPS_NOTIFIER", "smtp"}})); }),
            Errc::kInvalidConfig);
  EXPECT_EQ(testkit::error_code(
                [] { load_config(std::nullopt, fake_env({{"CVSOPS_PORT", "70000"}})); }),
            Errc::kInvalidConfig);
  const auto broken = temp_file("broken.json", "{ not json");
  EXPECT_EQ(testkit::error_code([&] { load_config(broken, fake_env({})); }), Errc::kInvalidInput);
  std::filesystem::remove(broken);
  EXPECT_EQ(testkit::error_code([] { load_config("/no/such/config.json", fake_env({})); }),
            Errc::kNotFound);
}

TEST(Config, JsonRoundTrip) {
  ServiceConfig c;
  c.engine.scheduler.bucket_size = 7;
  c.engine.retry.max_attempts = 5;
  c.api_token = "t";
  c.variant_splits.push_back({"vendor-a", evaluation::SplitKind::kDeviceVendor, {"vendor-A"}, 0.5});
  const json j = c;
  for (const char* key : {"cadence_days", "bucket_size", "annotators_per_clip",
                          "timestamp_tolerance_s", "retry", "seed", "organizer_contact",
                          "data_dir", "adapters", "api", "snapshot_every", "test_split",
                          "variant_splits"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(j["variant_splits"][0]["kind"], "DEVICE_VENDOR");
  const auto back = j.get<ServiceConfig>();
  EXPECT_EQ(json(back), j);
}

TEST(JsonLines, ReportsLineOfBadInput) {
  std::istringstream in("{\"a\":1}\n\n  \n{oops\n");
  try {
    read_jsonl(in, "batch");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kInvalidInput);
    EXPECT_NE(std::string(e.what()).find("batch:4"), std::string::npos);
  }
  std::istringstream ok("{\"a\":1}\n\n[2]\n");
  EXPECT_EQ(read_jsonl(ok, "x").size(), 2u);
}
