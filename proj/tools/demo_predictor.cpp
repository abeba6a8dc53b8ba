// Streaming predictor process for the causality audit. Reads one frame
// descriptor per line on stdin, answers {"frame_index", "c1", "c2", "c3"}.
//
//   demo_predictor --mode memoryless|moving-average|lookahead

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cvsops/demo_predictors.hpp"
#include "cvsops/process_predictor.hpp"

int main(int argc, char** argv) {
  using namespace cvsops;
  CLI::App app{"demo streaming predictor"};
  std::string mode_name = "memoryless";
  app.add_option("--mode", mode_name, "memoryless, moving-average or lookahead");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto mode = audit::demo_mode_from(mode_name);
    std::map<std::string, audit::SyntheticMedia> cache;
    std::string line;
    while (std::getline(std::cin, line)) {
      if (line.empty()) continue;
      const auto frame = json::parse(line).get<audit::FrameDescriptor>();
      auto it = cache.find(frame.media_uri);
      if (it == cache.end()) {
        it = cache.emplace(frame.media_uri, audit::FileMediaStore::load(frame.media_uri)).first;
      }
      const auto p = audit::demo_predict(mode, it->second, frame.frame_index);
      std::cout << json{{"frame_index", frame.frame_index}, {"c1", p[0]}, {"c2", p[1]}, {"c3", p[2]}}
                       .dump()
                << std::endl;
    }
  } catch (const std::exception& e) {
    std::cerr << "demo_predictor: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
