#pragma once

// Streaming predictor protocol over a child process's standard streams
// (POSIX). The harness writes one FrameDescriptor JSON object per line and
// waits for a reply line {"frame_index": i, "c1": p, "c2": p, "c3": p}
// before sending the next frame.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cvsops/causal_audit.hpp"

namespace cvsops::audit {

class FileMediaStore : public MediaStore {
 public:
  explicit FileMediaStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  std::string publish(const SyntheticMedia& media, const std::string& tag) override {
    auto path = dir_ / (media.clip_id.value + "." + tag + ".json");
    std::ofstream(path) << json(media).dump();
    return "file://" + path.string();
  }

  static SyntheticMedia load(const std::string& uri) {
    const std::string prefix = "file://";
    const auto path = uri.rfind(prefix, 0) == 0 ? uri.substr(prefix.size()) : uri;
    std::ifstream in(path);
    if (!in) throw Error(Errc::kNotFound, "cannot open media " + path);
    return json::parse(in).get<SyntheticMedia>();
  }

 private:
  std::filesystem::path dir_;
};

class ProcessPredictor : public StreamingPredictor {
 public:
  ProcessPredictor(std::vector<std::string> argv, std::chrono::milliseconds timeout)
      : argv_(std::move(argv)), timeout_(timeout) {
    if (argv_.empty()) throw Error(Errc::kInvalidInput, "empty predictor command");
  }
  ProcessPredictor(const ProcessPredictor&) = delete;
  ProcessPredictor& operator=(const ProcessPredictor&) = delete;
  ~ProcessPredictor() override { terminate(); }

  void begin(const ClipId&, const std::string&) override { spawn(); }

  PerCriterion<double> on_frame(const FrameDescriptor& frame) override {
    write_line(json(frame).dump());
    const auto line = read_line();
    json reply;
    try {
      reply = json::parse(line);
    } catch (const json::exception&) {
      throw Error(Errc::kProtocolError, "unparseable reply: " + line);
    }
    if (!reply.is_object() || reply.value("frame_index", -1) != frame.frame_index) {
      throw Error(Errc::kProtocolError, "reply does not answer frame " +
                                            std::to_string(frame.frame_index) + ": " + line);
    }
    try {
      return {reply.at("c1").get<double>(), reply.at("c2").get<double>(),
              reply.at("c3").get<double>()};
    } catch (const json::exception&) {
      throw Error(Errc::kProtocolError, "reply lacks c1..c3: " + line);
    }
  }

  void end() override {
    close_fd(to_child_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    close_fd(from_child_);
    buffer_.clear();
  }

 private:
  static void close_fd(int& fd) {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }

  void terminate() {
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      int status = 0;
      waitpid(pid_, &status, 0);
      pid_ = -1;
    }
    close_fd(to_child_);
    close_fd(from_child_);
  }

  void spawn() {
    terminate();
    buffer_.clear();
    int in_pipe[2], out_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
      throw Error(Errc::kProtocolError, std::string("pipe: ") + std::strerror(errno));
    }
    pid_ = fork();
    if (pid_ < 0) throw Error(Errc::kProtocolError, std::string("fork: ") + std::strerror(errno));
    if (pid_ == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      std::vector<char*> args;
      for (auto& a : argv_) args.push_back(a.data());
      args.push_back(nullptr);
      execvp(args[0], args.data());
      _exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    ::signal(SIGPIPE, SIG_IGN);
  }

  void write_line(const std::string& text) {
    std::string line = text + "\n";
    std::size_t off = 0;
    while (off < line.size()) {
      const auto n = ::write(to_child_, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw Error(Errc::kProtocolError, "predictor closed its input");
      }
      off += static_cast<std::size_t>(n);
    }
  }

  std::string read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        auto line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw Error(Errc::kTimeout, "no reply from predictor");
      pollfd pfd{from_child_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) throw Error(Errc::kTimeout, "no reply from predictor");
      char chunk[4096];
      const auto n = ::read(from_child_, chunk, sizeof chunk);
      if (n <= 0) throw Error(Errc::kProtocolError, "predictor exited mid-clip");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace cvsops::audit
