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
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsup/packer.hpp"
#include "selfsup/scorer.hpp"
#include "selfsup/taskgen.hpp"
#include "selfsup/templates.hpp"

namespace selfsup::evaluator {

using templates::EvalItem;

// ---------------------------------------------------------------------------
// Protocols

struct RankResult {
  std::size_t choice = 0;
  std::vector<double> nll_per_token;  // one per candidate
};

/// Picks the candidate with the lowest per-token negative log-likelihood of
/// the scored segment; the first candidate wins ties. Scorer errors are
/// rethrown as Error(kScorer) naming the item.
RankResult rank_classify(const EvalItem& item, const Scorer& scorer);

inline constexpr std::size_t kDefaultMaxNewTokens = 64;

/// Cuts a generation at the first "Input:" marker or blank line and trims
/// surrounding whitespace.
std::string truncate_generation(std::string_view generated);

struct GenerationResult {
  std::string hypothesis;
  double rouge_l = 0.0;
};

GenerationResult eval_generation(const EvalItem& item, const Scorer& scorer,
                                 std::size_t max_new_tokens = kDefaultMaxNewTokens);

// ---------------------------------------------------------------------------
// Metrics

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Sentence-level ROUGE-L F1 over lower-cased whitespace tokens. 0 when
/// either side is empty.
double rouge_l_score(std::string_view hypothesis, std::string_view reference);

/// Metric values are fractions in [0, 1].
using MetricMap = std::map<std::string, double>;

/// Throws Error(kData) on length mismatch or empty input.
double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> golds);
/// Mean over `num_classes` of per-class F1 (0 for a class with P + R = 0).
double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                std::size_t num_classes);
/// Micro F1 over all answer options, class 0 ("True") positive.
double multirc_f1a(std::span<const std::size_t> predictions,
                   std::span<const std::size_t> golds);
/// Fraction of groups (questions) whose options are all predicted correctly.
double multirc_em(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                  std::span<const std::string> groups);

/// Result of evaluating one item.
struct Outcome {
  std::optional<std::size_t> prediction;
  std::optional<std::size_t> gold;
  std::size_t num_candidates = 0;
  std::string group;
  std::string hypothesis;
  double rouge_l = 0.0;
};

/// Computes the named metrics (accuracy, f1, f1a, em, rouge_l).
MetricMap task_metrics(std::span<const std::string> metrics, std::span<const Outcome> outcomes);

/// Mean of a task's metric values: the single metric, or the average of the
/// two for two-metric tasks.
double task_score(const MetricMap& metrics);
/// Mean of per-task scores.
double benchmark_average(std::span<const double> task_scores);

// ---------------------------------------------------------------------------
// Harness

struct RunOptions {
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::size_t max_new_tokens = kDefaultMaxNewTokens;
  std::size_t workers = 1;
};

/// Evaluates items in order. Uses `workers` threads only when the scorer is
/// thread-safe; results do not depend on the worker count.
std::vector<Outcome> evaluate_items(std::span<const EvalItem> items, const Scorer& scorer,
                                    const RunOptions& options);

/// A task to evaluate: a name, its metrics and the items for one seed.
struct EvalTask {
  std::string name;
  std::vector<std::string> metrics;
  std::function<std::vector<EvalItem>(std::uint64_t seed)> items;
};

/// Benchmark task from a template. Demonstrations come from `demos`, or,
/// when that is empty, from the other evaluation records.
EvalTask template_task(const templates::TaskTemplate& tpl, std::vector<templates::Record> eval,
                       std::vector<templates::Record> demos, std::size_t shots);

/// Candidate label strings for label tasks (LPP_CLS, CL): every string of
/// every pool the task draws from, in pool order, without duplicates.
std::vector<std::string> label_candidates(taskgen::Task task);

/// Held-out task from packed instances of `task`. Each instance with at
/// least `min_examples` examples yields one item: its last example is the
/// test, and demonstrations are drawn from the examples before it. Label
/// tasks are ranked over label_candidates(); the rest are generation tasks.
EvalTask heldout_task(taskgen::Task task, std::vector<packer::Instance> instances,
                      std::size_t shots, std::size_t min_examples);

struct TaskReport {
  std::string name;
  std::vector<std::string> metrics;
  std::size_t items = 0;
  std::vector<MetricMap> runs;  // one per seed
  MetricMap mean;
  std::optional<MetricMap> stddev;  // sample std, two or more runs
  std::vector<double> scores;       // task_score per run
  double score_mean = 0.0;
  std::optional<double> score_std;
};

struct ScoreReport {
  std::vector<std::uint64_t> seeds;
  std::vector<TaskReport> tasks;
  std::vector<double> average_runs;
  double average_mean = 0.0;
  std::optional<double> average_std;
};

/// Evaluates every task once per seed and aggregates mean and std.
/// Throws Error(kConfig) when no seeds are given.
ScoreReport run_benchmark(std::span<const EvalTask> tasks, const Scorer& scorer,
                          const RunOptions& options);

nlohmann::json to_json(const ScoreReport& report);
/// Human-readable table; values in percent.
std::string format_table(const ScoreReport& report);

}  // namespace selfsup::evaluator
