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
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "selfsup/scorer.hpp"

namespace selfsup::ngram {

/// Add-k smoothed word n-gram model over whitespace tokens.
///
/// P(w | h) = (c(h', w) + k) / (c(h') + k |V'|), where h' is the longest
/// suffix of the last order-1 tokens of h that was observed as a context,
/// and V' is the training vocabulary plus one unknown-word slot. Every
/// distribution sums to one over V'.
class NgramModel {
 public:
  static constexpr std::size_t kDefaultOrder = 3;
  static constexpr double kDefaultK = 0.1;
  static constexpr std::uint32_t kUnknown = 0xFFFFFFFFu;

  /// Throws Error(kConfig) for order < 1 or k <= 0, Error(kData) when the
  /// texts hold no tokens.
  static NgramModel fit(std::span<const std::string> texts,
                        std::size_t order = kDefaultOrder, double k = kDefaultK);

  std::size_t order() const { return order_; }
  double k() const { return k_; }
  std::size_t vocab_size() const { return vocab_.size(); }  // without UNK
  std::uint32_t id(std::string_view token) const;           // kUnknown if absent
  const std::string& token(std::uint32_t id) const { return vocab_[id]; }

  double prob(std::span<const std::uint32_t> history, std::uint32_t next) const;
  double prob(std::span<const std::string> history, std::string_view next) const;

  /// Text format, byte-stable for a given model.
  void save(std::ostream& out) const;
  static NgramModel load(std::istream& in);

  /// Counts for one context; total is the sum over next.
  struct ContextStats {
    std::uint64_t total = 0;
    std::unordered_map<std::uint32_t, std::uint64_t> next;
  };

  /// Longest observed context for `history`; never null.
  const ContextStats* context(std::span<const std::uint32_t> history) const;

 private:
  NgramModel() = default;
  void add_ngram(std::span<const std::uint32_t> ids, std::uint64_t count);

  std::size_t order_ = kDefaultOrder;
  double k_ = kDefaultK;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  // levels_[m] maps an m-token context key to its follower counts.
  std::vector<std::unordered_map<std::string, ContextStats>> levels_;
};

struct NgramScorerOptions {
  /// Weight of a cache model estimated from the running prompt, mixed as
  /// (1 - w) P_model + w P_cache. The cache uses the same order, k and
  /// vocabulary, so the mixture is still a normalized distribution.
  double cache_weight = 0.0;
  /// Generation stops before emitting this token.
  std::string stop_token = "Input:";
};

/// Scorer backed by an NgramModel. Thread-safe.
class NgramScorer final : public Scorer {
 public:
  explicit NgramScorer(std::shared_ptr<const NgramModel> model,
                       NgramScorerOptions options = {});

  /// Throws Error(kScorer) for an empty continuation.
  ContinuationScore score(std::string_view prefix,
                          std::string_view continuation) const override;
  /// Greedy argmax decoding; ties break toward the lexicographically smaller
  /// token. Tokens are joined with single spaces.
  std::string generate(std::string_view prefix,
                       std::size_t max_new_tokens) const override;
  bool thread_safe() const override { return true; }

  const NgramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NgramModel> model_;
  NgramScorerOptions options_;
};

}  // namespace selfsup::ngram
