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
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsup/rng.hpp"
#include "selfsup/taskgen.hpp"

namespace selfsup::packer {

/// Counts model tokens in a piece of text. The packer assumes additivity:
/// count(a + "\n" + b) == count(a) + separator_cost() + count(b).
class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::size_t count(std::string_view text) const = 0;
  virtual std::size_t separator_cost() const = 0;
  virtual std::string name() const = 0;
};

/// Whitespace-delimited words; the newline separator is free.
class WhitespaceCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
  std::size_t separator_cost() const override { return 0; }
  std::string name() const override { return "whitespace"; }
};

/// UTF-8 bytes (byte-fallback tokenization); the separator costs one byte.
class ByteCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override { return text.size(); }
  std::size_t separator_cost() const override { return 1; }
  std::string name() const override { return "bytes"; }
};

/// Character-level BPE over a merges file ("left right" per line, highest
/// priority first, optional "#" header). Each whitespace-delimited word is
/// split into UTF-8 characters and merged by rank; whitespace is free.
class BpeCounter final : public TokenCounter {
 public:
  explicit BpeCounter(const std::filesystem::path& merges);
  explicit BpeCounter(std::vector<std::pair<std::string, std::string>> merges);

  std::size_t count(std::string_view text) const override;
  std::size_t separator_cost() const override { return 0; }
  std::string name() const override { return "bpe"; }

  std::size_t count_word(std::string_view word) const;

 private:
  std::map<std::pair<std::string, std::string>, std::size_t> ranks_;
};

/// "whitespace", "bytes" or "bpe:<merges path>".
std::shared_ptr<const TokenCounter> make_counter(std::string_view spec);

struct TokenBudget {
  static constexpr std::size_t kDefaultMaxTokens = 2048;

  std::size_t max_tokens = kDefaultMaxTokens;
  std::shared_ptr<const TokenCounter> counter =
      std::make_shared<WhitespaceCounter>();

  /// Throws Error(kConfig) when max_tokens < 8 or no counter is set.
  void validate() const;
};

/// Half-open range of Unicode scalar offsets into Instance::text.
struct Span {
  std::size_t start = 0;
  std::size_t end = 0;
  friend bool operator==(const Span&, const Span&) = default;
};

struct Instance {
  taskgen::Task task = taskgen::Task::kNsg;
  std::string domain;
  std::string text;         // examples rendered and joined by "\n"
  std::vector<Span> spans;  // one per example, covering its output text
  std::size_t example_count = 0;
  std::size_t tokens = 0;
  std::vector<std::uint64_t> seed_trace;  // {bucket seed, ordinal in bucket}
};

/// {"task","domain","text","loss_spans":[[s,e],...],"example_count",
///  "seed_trace"}
nlohmann::json to_json(const Instance& inst);
Instance instance_from_json(const nlohmann::json& j);

/// Bytes of `text` covered by a scalar-offset span.
std::string span_text(std::string_view text, Span span);

struct PackedExample {
  std::string prefix;  // "Input: ...\nOutput: "
  std::string output;  // the loss-span text
};

/// Splits an instance back into its examples. Example i runs from just past
/// the newline that ends example i-1 to the end of span i. Throws
/// Error(kData) when the spans are out of order or out of range.
std::vector<PackedExample> unpack(const Instance& inst);

enum class StopReason { kOverflow, kExhausted };

/// Why an instance was closed. For kOverflow, `candidate` is the unit that
/// did not fit, rendered as it would have been appended.
struct PackDecision {
  std::size_t instance = 0;  // index into PackResult::instances
  StopReason reason = StopReason::kExhausted;
  std::size_t instance_tokens = 0;
  std::size_t candidate_tokens = 0;
  std::string candidate;
};

struct PackResult {
  std::vector<Instance> instances;
  std::vector<PackDecision> log;
  std::size_t dropped = 0;
  std::vector<std::string> warnings;
};

/// Packs same-task examples into instances. Examples are split into buckets
/// (taskgen::label_bucket) and units (a CL group, or a single example);
/// each bucket is visited in a seeded random order without replacement.
/// Units are appended, newline-separated, while the instance stays within
/// the budget; the first unit that would overflow closes the instance and
/// opens the next. A unit larger than the whole budget is dropped with a
/// warning. Label tasks get one fresh label assignment per instance.
/// Throws Error(kData) when the examples do not share one task.
PackResult pack(std::span<const taskgen::Example> examples,
                const TokenBudget& budget, Rng& rng);

/// Re-counts the closed instance plus its logged candidate with `counter`.
bool replay_overflows(const Instance& inst, const PackDecision& decision,
                      const TokenCounter& counter, std::size_t max_tokens);

/// round(ratio * n) instances: without replacement for ratio <= 1; for
/// ratio > 1 every instance once plus draws with replacement for the rest,
/// then shuffled. Throws Error(kConfig) for ratio <= 0.
std::vector<Instance> subsample(std::span<const Instance> instances,
                                double ratio, Rng& rng);

}  // namespace selfsup::packer
