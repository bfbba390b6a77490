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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsup/corpus.hpp"
#include "selfsup/evaluator.hpp"
#include "selfsup/packer.hpp"
#include "selfsup/scorer.hpp"
#include "selfsup/taskgen.hpp"
#include "selfsup/templates.hpp"

// Stage orchestration behind the command-line tool. Output layout under
// PipelineConfig::out_dir:
//
//   manifest.json                  synthesize manifest
//   examples/<TASK>.jsonl          one example per line
//   examples/<TASK>.heldout.jsonl  held-out documents, when requested
//   instances/<TASK>.jsonl         packed instances
//   instances/<TASK>.heldout.jsonl
//   instances/stats.json
//   eval/<task>.seed<N>.jsonl      rendered evaluation items
//   eval/report.json               score report
namespace selfsup::pipeline {

/// Output file granularity. LPP files mix generation and classification
/// examples; everything else maps to one constructor.
enum class FileTask { kNsg, kMwp, kLpp, kCl, kDae, kGsg };

std::string_view file_task_name(FileTask t) noexcept;
std::optional<FileTask> parse_file_task(std::string_view name);
std::vector<FileTask> default_file_tasks();

struct CorpusInput {
  std::filesystem::path path;
  std::string domain;
};

struct PipelineConfig {
  static constexpr std::size_t kDefaultInstancesPerTask = 250'000;

  std::vector<CorpusInput> corpus;
  corpus::CorpusSampleConfig sample;  // domains missing here get defaults
  std::vector<FileTask> tasks = default_file_tasks();
  std::size_t instances_per_task = kDefaultInstancesPerTask;
  double data_ratio = 1.0;
  bool random_label = false;
  double lpp_cls_share = 0.5;    // share of LPP windows used for classification
  double heldout_fraction = 0.0;  // documents reserved for held-out files
  std::size_t max_tokens = packer::TokenBudget::kDefaultMaxTokens;
  std::string counter = "whitespace";
  bool write_pack_log = false;
  std::uint64_t seed = 0;

  std::size_t workers = 1;  // not part of the configuration hash
  std::filesystem::path out_dir = "out";

  /// Throws Error(kConfig) on invalid values.
  void validate() const;
  /// Canonical JSON of every field that affects outputs.
  nlohmann::json semantic_json() const;
  /// 16 hex digits of FNV-1a over semantic_json().
  std::string config_hash() const;
};

/// Per-domain document count used when the config names none: 10,000 for
/// the "stories" domain, 100,000 otherwise.
std::size_t default_docs_for_domain(std::string_view domain);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first
/// exception thrown is rethrown after all threads stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

// ---------------------------------------------------------------------------
// synthesize

struct SynthesisCorpus {
  std::vector<corpus::Document> documents;
  std::vector<corpus::SentenceWindow> train_windows;
  std::vector<corpus::SentenceWindow> heldout_windows;
  std::size_t skipped_marker_windows = 0;
  std::vector<std::string> warnings;
};

/// Ingests, samples and windows the corpus, splitting documents into train
/// and held-out sets.
SynthesisCorpus prepare_corpus(const PipelineConfig& cfg);

/// Builds the examples of one file task from `windows`. Deterministic in
/// (windows, seed) for any worker count.
std::vector<taskgen::Example> build_examples(FileTask task,
                                             std::span<const corpus::SentenceWindow> windows,
                                             std::uint64_t seed, const PipelineConfig& cfg);

struct SynthesizeResult {
  nlohmann::json manifest;
  std::vector<std::string> warnings;
};

SynthesizeResult synthesize(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// pack

/// Packs examples grouped by (task, domain); groups run in parallel and are
/// concatenated in key order.
std::vector<packer::Instance> pack_examples(std::span<const taskgen::Example> examples,
                                            const packer::TokenBudget& budget, std::uint64_t seed,
                                            std::size_t workers,
                                            std::vector<packer::PackDecision>* log = nullptr,
                                            std::vector<std::string>* warnings = nullptr);

struct PackSummary {
  nlohmann::json stats;
  std::vector<std::string> warnings;
};

PackSummary pack(const PipelineConfig& cfg);

// ---------------------------------------------------------------------------
// evaluation

struct EvalConfig {
  std::map<std::string, std::filesystem::path> benchmarks;  // task -> records
  std::map<std::string, std::filesystem::path> demos;       // task -> records
  std::map<std::string, std::filesystem::path> heldout;     // TASK -> instances
  std::optional<std::filesystem::path> templates_path;
  templates::Style style = templates::Style::kOurs;
  std::size_t shots = 4;
  std::size_t min_examples = 0;  // held-out instances; 0 means shots + 1
  evaluator::RunOptions run;
};

std::vector<evaluator::EvalTask> make_eval_tasks(const EvalConfig& cfg);

struct ScorerConfig {
  std::string kind = "ngram";  // "ngram" or "process:<command>"
  std::vector<std::filesystem::path> train_files;  // instance or text files
  std::optional<std::filesystem::path> model_path;  // load instead of fitting
  std::optional<std::filesystem::path> save_path;
  std::size_t order = 3;
  double k = 0.1;
  double cache_weight = 0.0;
};

/// Texts used to fit the reference scorer: the "text" member of JSON-lines
/// records, or every line of other files.
std::vector<std::string> load_training_texts(std::span<const std::filesystem::path> files);

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& cfg);

/// Writes eval/<task>.seed<N>.jsonl for every task and seed; returns the
/// paths.
std::vector<std::filesystem::path> render_eval(const EvalConfig& cfg,
                                               const std::filesystem::path& out_dir);

evaluator::ScoreReport evaluate(const EvalConfig& cfg, const Scorer& scorer,
                                const std::filesystem::path& report_path);

// ---------------------------------------------------------------------------
// stats

/// Summaries of example and instance files under out_dir.
nlohmann::json stats(const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// I/O helpers

void write_jsonl(const std::filesystem::path& path, std::span<const nlohmann::json> records);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
std::vector<taskgen::Example> read_examples(const std::filesystem::path& path);
std::vector<packer::Instance> read_instances(const std::filesystem::path& path);

}  // namespace selfsup::pipeline
