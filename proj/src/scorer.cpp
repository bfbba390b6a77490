// Copyright 2026 The selfsup Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "selfsup/scorer.hpp"

#include <csignal>
#include <cstring>
#include <istream>
#include <ostream>

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "selfsup/error.hpp"

namespace selfsup {

using nlohmann::json;

ProcessScorer::ProcessScorer(const std::string& command) : command_(command) {
  int in_pipe[2];
  int out_pipe[2];
  if (::pipe(in_pipe) != 0) fail(ErrorKind::kScorer, "pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    fail(ErrorKind::kScorer, "pipe() failed");
  }
  // A scorer that exits early must not kill us with SIGPIPE.
  std::signal(SIGPIPE, SIG_IGN);
  pid_ = ::fork();
  if (pid_ < 0) fail(ErrorKind::kScorer, "fork() failed");
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

ProcessScorer::~ProcessScorer() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

std::string ProcessScorer::round_trip(const std::string& request) const {
  std::lock_guard lock(mu_);
  std::string line = request;
  line += '\n';
  std::size_t sent = 0;
  while (sent < line.size()) {
    const auto n = ::write(to_child_, line.data() + sent, line.size() - sent);
    if (n <= 0) fail(ErrorKind::kScorer, "scorer process '" + command_ + "' closed its input");
    sent += static_cast<std::size_t>(n);
  }
  for (;;) {
    const auto nl = read_buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string reply = read_buffer_.substr(0, nl);
      read_buffer_.erase(0, nl + 1);
      return reply;
    }
    char buf[4096];
    const auto n = ::read(from_child_, buf, sizeof buf);
    if (n <= 0) fail(ErrorKind::kScorer, "scorer process '" + command_ + "' exited");
    read_buffer_.append(buf, static_cast<std::size_t>(n));
  }
}

namespace {

json parse_reply(const std::string& reply) {
  json j;
  try {
    j = json::parse(reply);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::kScorer, std::string("malformed scorer reply: ") + e.what());
  }
  if (j.contains("error")) {
    fail(ErrorKind::kScorer, "scorer error: " + j["error"].dump());
  }
  return j;
}

}  // namespace

ContinuationScore ProcessScorer::score(std::string_view prefix,
                                       std::string_view continuation) const {
  const json req = {{"op", "score"},
                    {"prefix", std::string(prefix)},
                    {"continuation", std::string(continuation)}};
  const json j = parse_reply(round_trip(req.dump()));
  try {
    return {j.at("logprob").get<double>(), j.at("tokens").get<std::size_t>()};
  } catch (const json::exception& e) {
    fail(ErrorKind::kScorer, std::string("bad score reply: ") + e.what());
  }
}

std::string ProcessScorer::generate(std::string_view prefix,
                                    std::size_t max_new_tokens) const {
  const json req = {{"op", "generate"},
                    {"prefix", std::string(prefix)},
                    {"max_new_tokens", max_new_tokens}};
  const json j = parse_reply(round_trip(req.dump()));
  try {
    return j.at("text").get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kScorer, std::string("bad generate reply: ") + e.what());
  }
}

void serve_scorer(const Scorer& scorer, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json reply;
    try {
      const json req = json::parse(line);
      const auto op = req.at("op").get<std::string>();
      if (op == "score") {
        const auto s = scorer.score(req.at("prefix").get<std::string>(),
                                    req.at("continuation").get<std::string>());
        reply = {{"logprob", s.log_prob}, {"tokens", s.tokens}};
      } else if (op == "generate") {
        reply = {{"text", scorer.generate(req.at("prefix").get<std::string>(),
                                          req.at("max_new_tokens").get<std::size_t>())}};
      } else {
        reply = {{"error", "unknown op: " + op}};
      }
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    out << reply.dump() << '\n' << std::flush;
  }
}

}  // namespace selfsup
