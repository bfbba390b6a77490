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

#pragma once

#include <cstddef>
#include <iosfwd>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace selfsup {

struct ContinuationScore {
  double log_prob = 0.0;   // natural log, summed over continuation tokens
  std::size_t tokens = 0;  // continuation tokens scored
};

/// Language-model access used by the evaluator. Both operations must be
/// deterministic; generate() decodes greedily.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual ContinuationScore score(std::string_view prefix,
                                  std::string_view continuation) const = 0;
  virtual std::string generate(std::string_view prefix,
                               std::size_t max_new_tokens) const = 0;

  /// Whether score()/generate() may be called from several threads at once.
  /// The evaluator serializes calls otherwise.
  virtual bool thread_safe() const { return false; }
};

/// Talks to an external scorer process over line-delimited JSON on its
/// standard streams:
///
///   {"op":"score","prefix":P,"continuation":C}     -> {"logprob":x,"tokens":n}
///   {"op":"generate","prefix":P,"max_new_tokens":n} -> {"text":s}
///
/// A response carrying {"error": msg} raises Error(kScorer); the process is
/// expected to stay alive. The command runs under /bin/sh -c.
class ProcessScorer final : public Scorer {
 public:
  explicit ProcessScorer(const std::string& command);
  ~ProcessScorer() override;

  ProcessScorer(const ProcessScorer&) = delete;
  ProcessScorer& operator=(const ProcessScorer&) = delete;

  ContinuationScore score(std::string_view prefix,
                          std::string_view continuation) const override;
  std::string generate(std::string_view prefix,
                       std::size_t max_new_tokens) const override;

 private:
  std::string round_trip(const std::string& request) const;

  std::string command_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  mutable std::string read_buffer_;
  mutable std::mutex mu_;
};

/// Serves `scorer` with the protocol above until `in` reaches EOF. Malformed
/// requests get an {"error": ...} response.
void serve_scorer(const Scorer& scorer, std::istream& in, std::ostream& out);

}  // namespace selfsup
