// Copyright 2026 The covis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <csignal>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "covis/volume/volume.hpp"

namespace covis::testing {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(COVIS_FIXTURE_DIR); }
inline fs::path source_dir() { return fs::path(COVIS_SOURCE_DIR); }
inline fs::path fixture(const std::string& name) { return fixture_dir() / name; }

// Goldens are rewritten instead of compared when COVIS_UPDATE_GOLDENS=1.
inline bool updating_goldens() {
  const char* v = std::getenv("COVIS_UPDATE_GOLDENS");
  return v && std::string(v) == "1";
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_file(const fs::path& p, const std::string& bytes) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << bytes;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "covis-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

struct CommandResult {
  int exit_code{-1};
  std::string out;
};

// Runs a shell command, capturing stdout. stderr goes wherever the command sends it.
inline CommandResult run_command(const std::string& cmd) {
  CommandResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed for: " + cmd);
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

// A child process with stdout on a pipe and stderr in a file. Killed on destruction.
class Process {
 public:
  Process(const std::vector<std::string>& argv, const fs::path& stderr_path,
          const std::vector<std::pair<std::string, std::string>>& env = {}) {
    int fds[2];
    if (pipe(fds) != 0) throw std::runtime_error("pipe failed");
    pid_ = fork();
    if (pid_ < 0) throw std::runtime_error("fork failed");
    if (pid_ == 0) {
      dup2(fds[1], STDOUT_FILENO);
      close(fds[0]);
      close(fds[1]);
      if (FILE* err = std::fopen(stderr_path.c_str(), "w")) dup2(fileno(err), STDERR_FILENO);
      for (const auto& [k, v] : env) setenv(k.c_str(), v.c_str(), 1);
      std::vector<char*> args;
      for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
      args.push_back(nullptr);
      execv(args[0], args.data());
      _exit(127);
    }
    close(fds[1]);
    out_ = fdopen(fds[0], "r");
  }
  ~Process() {
    terminate();
    if (out_) std::fclose(out_);
  }
  Process(const Process&) = delete;
  Process& operator=(const Process&) = delete;

  // Blocks for the next stdout line; empty at end of stream.
  std::string read_line() {
    std::string line;
    for (int c; (c = std::fgetc(out_)) != EOF;) {
      if (c == '\n') break;
      line += static_cast<char>(c);
    }
    return line;
  }

  // Sends SIGTERM and returns the exit code (-1 when killed by a signal).
  int terminate() {
    if (pid_ <= 0) return status_;
    kill(pid_, SIGTERM);
    return wait();
  }

  int wait() {
    if (pid_ <= 0) return status_;
    int st = 0;
    waitpid(pid_, &st, 0);
    pid_ = -1;
    status_ = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return status_;
  }

 private:
  pid_t pid_{-1};
  int status_{-1};
  FILE* out_{nullptr};
};

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

inline Volume random_volume(std::mt19937_64& rng, Dims dims, Vec3 spacing = {1, 1, 1}, Vec3 origin = {}) {
  Volume v(dims, spacing, origin, DType::f32);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& f : v.data) f = u(rng);
  return v;
}

}  // namespace covis::testing
