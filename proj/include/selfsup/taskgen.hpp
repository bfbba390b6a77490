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

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsup/corpus.hpp"
#include "selfsup/rng.hpp"

// Self-supervised example constructors. Each builder turns one
// SentenceWindow into input/output pairs following a fixed rule; all of them
// are pure functions of (window, rng state).
namespace selfsup::taskgen {

enum class Task { kNsg, kMwp, kLppGen, kLppCls, kCl, kDae, kGsg };

inline constexpr std::array<Task, 7> kAllTasks = {
    Task::kNsg, Task::kMwp, Task::kLppGen, Task::kLppCls,
    Task::kCl,  Task::kDae, Task::kGsg};

std::string_view task_name(Task task) noexcept;
std::optional<Task> parse_task(std::string_view name);

inline constexpr std::string_view kInputMarker = "Input:";
inline constexpr std::string_view kOutputMarker = "Output:";

struct Example {
  Task task = Task::kNsg;
  std::string input_text;
  std::string output_text;
  nlohmann::json meta = nlohmann::json::object();

  /// "Input: <input>\nOutput: <output>"
  std::string render() const;
};

/// {"task","input","output","meta"}
nlohmann::json to_json(const Example& e);
Example example_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Constants

inline constexpr std::array<std::string_view, 9> kMaskSymbols = {
    "___", "⟨⟨⟩⟩", "@@@", "(())", "$$$", "%%%", "###", "***", "+++"};

/// Interchangeable label strings for one classification instance.
struct LabelPool {
  std::vector<std::string> labels;  // 2 or 3 distinct strings
};

/// Binary pools, positive label first: Yes/No, Y/N, True/False, T/F.
const std::vector<LabelPool>& binary_label_pools();
/// Positive/Negative/Neutral, True/False/Neither, T/F/N, Yes/No/Unknown,
/// Y/N/U.
const std::vector<LabelPool>& ternary_label_pools();
const std::vector<LabelPool>& label_pools(std::size_t arity);

/// Lower-case function words that delimit the last phrase of a sentence.
class FunctionWordTable {
 public:
  explicit FunctionWordTable(std::set<std::string, std::less<>> words);

  /// The standard list (50 distinct words).
  static const FunctionWordTable& standard();

  bool contains(std::string_view lower_word) const {
    return words_.contains(lower_word);
  }
  std::size_t size() const noexcept { return words_.size(); }
  const std::set<std::string, std::less<>>& words() const noexcept {
    return words_;
  }

 private:
  std::set<std::string, std::less<>> words_;
};

enum class ClInputType { kOriginal, kShuffled, kDifferentDoc, kMultiDoc };

std::string_view cl_type_name(ClInputType t) noexcept;
std::optional<ClInputType> parse_cl_type(std::string_view name);

// ---------------------------------------------------------------------------
// Builders

/// Context = all but the last sentence, output = last sentence.
/// Throws Error(kConstructor) for windows shorter than 3 sentences.
Example build_nsg(const corpus::SentenceWindow& w, Rng& rng);

struct MaskedText {
  std::string input;
  std::string output;
};

/// Replaces words[p] for every p in `positions` (sorted, distinct) with
/// `symbol`; output is the removed words in order, space-joined.
MaskedText mask_words(std::span<const std::string> words,
                      std::span<const std::size_t> positions,
                      std::string_view symbol);

/// Masks k distinct words, k uniform in [1, min(20, floor(words/2))], with
/// one symbol drawn from kMaskSymbols (symbols already present in the window
/// text are not eligible). meta: symbol, positions.
Example build_mwp(const corpus::SentenceWindow& w, Rng& rng);

struct LastPhrase {
  std::string prefix;         // words before the function word
  std::string phrase;         // function word to end, final punctuation removed
  std::string function_word;  // lower case
  std::size_t position = 0;   // word index of the function word
};

/// Finds the last function word of the sentence; succeeds only when it sits
/// at word position >= ceil(word_count / 2).
std::optional<LastPhrase> extract_last_phrase(std::string_view sentence,
                                              const FunctionWordTable& table);

/// "<context> Question: <prefix> ?" -> phrase. Absent when extraction fails.
std::optional<Example> build_lpp_gen(const corpus::SentenceWindow& w,
                                     const FunctionWordTable& table, Rng& rng);

/// Last phrases harvested from a corpus, keyed by function word. Built in a
/// sequential pass before LPP classification examples are generated, then
/// read-only.
class PhraseBank {
 public:
  void add(std::string_view function_word, std::string phrase);
  void harvest(std::span<const corpus::SentenceWindow> windows,
               const FunctionWordTable& table);

  std::span<const std::string> phrases(std::string_view function_word) const;
  std::size_t size() const noexcept { return total_; }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> by_word_;
  std::size_t total_ = 0;
};

/// "<context> Question: <prefix> ? Answer: <answer>" -> label. With
/// probability 1/2 the answer is the true phrase; otherwise a different
/// phrase from the bank starting with the same function word. Label strings
/// come from a binary pool; meta.label_class is 0 for the positive label
/// and 1 for the negative one. Absent when extraction fails or no negative
/// exists for the function word.
std::optional<Example> build_lpp_cls(const corpus::SentenceWindow& w,
                                     const FunctionWordTable& table,
                                     const PhraseBank& bank, Rng& rng);

/// Draws consecutive sentence runs from windows of other documents.
class ForeignWindowSampler {
 public:
  explicit ForeignWindowSampler(std::vector<corpus::SentenceWindow> windows);

  struct Run {
    std::string doc_id;
    std::size_t start = 0;
    std::vector<corpus::Sentence> sentences;
  };

  /// A run of `length` consecutive sentences from a document other than
  /// `exclude_doc`. Throws Error(kConstructor) when no such run exists.
  Run draw(std::string_view exclude_doc, std::size_t length, Rng& rng) const;

  std::size_t size() const noexcept { return windows_.size(); }

 private:
  std::vector<corpus::SentenceWindow> windows_;
};

/// One group of classification examples: ORIGINAL plus one or two other
/// input types, one example per type, in random order. The group shares one
/// label map (a random bijection onto a pool of matching arity) and a
/// meta.group id; the packer keeps a group inside one instance.
std::vector<Example> build_cl(const corpus::SentenceWindow& w,
                              const ForeignWindowSampler& foreign, Rng& rng);

struct DaeConfig {
  double delete_prob = 0.1;
  double swap_prob = 0.1;  // swap with one of the next two words
};

/// Input = corrupted window, output = original window text.
Example build_dae(const corpus::SentenceWindow& w, Rng& rng,
                  const DaeConfig& cfg = {});

/// One sentence (uniform position) replaced by a mask symbol; output is the
/// removed sentence.
Example build_gsg(const corpus::SentenceWindow& w, Rng& rng);

// ---------------------------------------------------------------------------
// Random-label corruption

/// Outputs of generation-style examples, per task, used as random
/// replacement outputs.
class DonorPool {
 public:
  void add(const Example& e);
  std::span<const std::string> outputs(Task task) const;

 private:
  std::map<Task, std::vector<std::string>> outputs_;
};

/// Generation tasks: output replaced by a uniformly drawn donor output of the
/// same task (Error(kData) when the pool is empty). LPP_CLS / CL: the label
/// is resampled uniformly from the example's label pool.
Example corrupt_labels(const Example& e, const DonorPool& donors, Rng& rng);

// ---------------------------------------------------------------------------
// Per-instance label maps

bool uses_label_map(Task task) noexcept;

/// Examples with different buckets may not share an instance. CL groups are
/// bucketed by their input-type set; every other example returns "".
std::string label_bucket(const Example& e);

/// Label strings chosen for one packed instance.
struct LabelAssignment {
  std::vector<std::string> labels;                 // pool order
  std::map<std::string, std::string> type_labels;  // CL only: type -> label
};

/// Draws a fresh assignment compatible with `exemplar` (same task, same CL
/// type set). For tasks without labels the assignment is empty.
LabelAssignment draw_label_assignment(const Example& exemplar, Rng& rng);

/// Rewrites the example's output label under `a`, keeping its label class.
void apply_label_assignment(Example& e, const LabelAssignment& a);

}  // namespace selfsup::taskgen
