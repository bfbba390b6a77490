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

#include "selfsup/evaluator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include "selfsup/error.hpp"
#include "selfsup/rng.hpp"
#include "selfsup/text.hpp"

namespace selfsup::evaluator {

using nlohmann::json;

RankResult rank_classify(const EvalItem& item, const Scorer& scorer) {
  if (item.candidates.empty()) {
    fail(ErrorKind::kData, "item " + item.id + ": no candidates to rank");
  }
  RankResult out;
  out.nll_per_token.reserve(item.candidates.size());
  for (std::size_t i = 0; i < item.candidates.size(); ++i) {
    ContinuationScore s;
    try {
      s = scorer.score(item.prompt_prefix, item.candidates[i]);
    } catch (const std::exception& e) {
      fail(ErrorKind::kScorer, "item " + item.id + ": " + e.what());
    }
    if (s.tokens == 0) {
      fail(ErrorKind::kScorer, "item " + item.id + ": scorer returned zero tokens");
    }
    const double nll = -s.log_prob / static_cast<double>(s.tokens);
    out.nll_per_token.push_back(nll);
    if (nll < out.nll_per_token[out.choice]) out.choice = i;
  }
  return out;
}

std::string truncate_generation(std::string_view generated) {
  std::size_t cut = generated.size();
  if (const auto p = generated.find(taskgen::kInputMarker); p != std::string_view::npos) {
    cut = std::min(cut, p);
  }
  if (const auto p = generated.find("\n\n"); p != std::string_view::npos) {
    cut = std::min(cut, p);
  }
  return std::string(text::trim(generated.substr(0, cut)));
}

GenerationResult eval_generation(const EvalItem& item, const Scorer& scorer,
                                 std::size_t max_new_tokens) {
  if (!item.reference) fail(ErrorKind::kData, "item " + item.id + ": no reference");
  std::string generated;
  try {
    generated = scorer.generate(item.prompt_prefix, max_new_tokens);
  } catch (const std::exception& e) {
    fail(ErrorKind::kScorer, "item " + item.id + ": " + e.what());
  }
  GenerationResult out;
  out.hypothesis = truncate_generation(generated);
  out.rouge_l = rouge_l_score(out.hypothesis, *item.reference);
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_score(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = text::split_words_copy(text::to_lower_ascii(hypothesis));
  const auto ref = text::split_words_copy(text::to_lower_ascii(reference));
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

namespace {

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) fail(ErrorKind::kData, "predictions and golds differ in length");
  if (a == 0) fail(ErrorKind::kData, "no predictions to score");
}

double f1(double tp, double fp, double fn) {
  const double denom = 2.0 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2.0 * tp / denom;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> sample_std(std::span<const double> v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

double accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> golds) {
  check_aligned(predictions.size(), golds.size());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == golds[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double macro_f1(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                std::size_t num_classes) {
  check_aligned(predictions.size(), golds.size());
  if (num_classes == 0) fail(ErrorKind::kData, "macro F1 needs at least one class");
  double total = 0.0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      const bool p = predictions[i] == c;
      const bool g = golds[i] == c;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    total += f1(tp, fp, fn);
  }
  return total / static_cast<double>(num_classes);
}

double multirc_f1a(std::span<const std::size_t> predictions,
                   std::span<const std::size_t> golds) {
  check_aligned(predictions.size(), golds.size());
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool p = predictions[i] == 0;
    const bool g = golds[i] == 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  return f1(tp, fp, fn);
}

double multirc_em(std::span<const std::size_t> predictions, std::span<const std::size_t> golds,
                  std::span<const std::string> groups) {
  check_aligned(predictions.size(), golds.size());
  if (groups.size() != predictions.size()) {
    fail(ErrorKind::kData, "groups and predictions differ in length");
  }
  std::map<std::string_view, bool> all_right;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    auto [it, inserted] = all_right.try_emplace(groups[i], true);
    it->second = it->second && predictions[i] == golds[i];
  }
  std::size_t exact = 0;
  for (const auto& [g, ok] : all_right) exact += ok;
  return static_cast<double>(exact) / static_cast<double>(all_right.size());
}

MetricMap task_metrics(std::span<const std::string> metrics, std::span<const Outcome> outcomes) {
  if (outcomes.empty()) fail(ErrorKind::kData, "no outcomes to score");
  std::vector<std::size_t> preds;
  std::vector<std::size_t> golds;
  std::vector<std::string> groups;
  std::vector<double> rouge;
  std::size_t num_classes = 0;
  for (const auto& o : outcomes) {
    if (o.prediction) {
      if (!o.gold) fail(ErrorKind::kData, "classification outcome without a gold label");
      preds.push_back(*o.prediction);
      golds.push_back(*o.gold);
      groups.push_back(o.group);
      num_classes = std::max(num_classes, o.num_candidates);
    } else {
      rouge.push_back(o.rouge_l);
    }
  }
  MetricMap out;
  for (const auto& m : metrics) {
    if (m == "rouge_l") {
      if (rouge.empty()) fail(ErrorKind::kData, "rouge_l needs generation outcomes");
      out[m] = mean_of(rouge);
    } else if (m == "accuracy") {
      out[m] = accuracy(preds, golds);
    } else if (m == "f1") {
      out[m] = macro_f1(preds, golds, num_classes);
    } else if (m == "f1a") {
      out[m] = multirc_f1a(preds, golds);
    } else if (m == "em") {
      out[m] = multirc_em(preds, golds, groups);
    } else {
      fail(ErrorKind::kConfig, "unknown metric '" + m + "'");
    }
  }
  return out;
}

double task_score(const MetricMap& metrics) {
  if (metrics.empty()) fail(ErrorKind::kData, "task has no metrics");
  double sum = 0.0;
  for (const auto& [name, v] : metrics) sum += v;
  return sum / static_cast<double>(metrics.size());
}

double benchmark_average(std::span<const double> task_scores) {
  if (task_scores.empty()) fail(ErrorKind::kData, "no task scores to average");
  return mean_of(task_scores);
}

// ---------------------------------------------------------------------------
// Harness

namespace {

Outcome evaluate_one(const EvalItem& item, const Scorer& scorer, std::size_t max_new_tokens) {
  Outcome o;
  o.gold = item.gold;
  o.group = item.group;
  if (!item.candidates.empty()) {
    o.prediction = rank_classify(item, scorer).choice;
    o.num_candidates = item.candidates.size();
  } else {
    auto g = eval_generation(item, scorer, max_new_tokens);
    o.hypothesis = std::move(g.hypothesis);
    o.rouge_l = g.rouge_l;
  }
  return o;
}

}  // namespace

std::vector<Outcome> evaluate_items(std::span<const EvalItem> items, const Scorer& scorer,
                                    const RunOptions& options) {
  std::vector<Outcome> out(items.size());
  const std::size_t workers =
      scorer.thread_safe() ? std::max<std::size_t>(1, std::min(options.workers, items.size())) : 1;
  if (workers <= 1) {
    for (std::size_t i = 0; i < items.size(); ++i) {
      out[i] = evaluate_one(items[i], scorer, options.max_new_tokens);
    }
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= items.size()) return;
        try {
          out[i] = evaluate_one(items[i], scorer, options.max_new_tokens);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = items.size();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

EvalTask template_task(const templates::TaskTemplate& tpl, std::vector<templates::Record> eval,
                       std::vector<templates::Record> demos, std::size_t shots) {
  if (eval.empty()) fail(ErrorKind::kData, "task " + tpl.task + ": no evaluation records");
  struct State {
    std::vector<templates::RenderedExample> tests;
    std::vector<std::string> ids;
    std::vector<std::string> groups;
    std::vector<std::string> demo_texts;
    bool demos_are_eval = false;
  };
  auto state = std::make_shared<State>();
  for (const auto& rec : eval) {
    state->tests.push_back(templates::render_example(rec, tpl));
    if (!tpl.generative() && !state->tests.back().gold) {
      fail(ErrorKind::kData, "task " + tpl.task + ": record " + rec.id + " has no label");
    }
    state->ids.push_back(rec.id);
    if (!rec.group.empty()) {
      state->groups.push_back(rec.group);
    } else {
      const auto c = rec.fields.find("Context");
      const auto q = rec.fields.find("Question");
      state->groups.push_back((c == rec.fields.end() ? "" : c->second) + '\x1f' +
                              (q == rec.fields.end() ? "" : q->second));
    }
  }
  state->demos_are_eval = demos.empty();
  if (state->demos_are_eval) {
    for (const auto& t : state->tests) state->demo_texts.push_back(t.demo_text());
  } else {
    for (const auto& rec : demos) {
      const auto r = templates::render_example(rec, tpl);
      if (!r.gold && !r.reference) {
        fail(ErrorKind::kData, "task " + tpl.task + ": demonstration " + rec.id +
                                   " has no label");
      }
      state->demo_texts.push_back(r.demo_text());
    }
  }

  EvalTask task;
  task.name = tpl.task;
  task.metrics = tpl.metrics;
  task.items = [state, shots, name = tpl.task](std::uint64_t seed) {
    std::vector<EvalItem> items;
    items.reserve(state->tests.size());
    for (std::size_t i = 0; i < state->tests.size(); ++i) {
      Rng rng(derive_seed(seed, i));
      std::optional<std::size_t> exclude;
      if (state->demos_are_eval) exclude = i;
      auto item = templates::assemble_prompt(state->demo_texts, state->tests[i], shots, rng,
                                             exclude);
      item.id = state->ids[i];
      item.task = name;
      item.group = state->groups[i];
      items.push_back(std::move(item));
    }
    return items;
  };
  return task;
}

std::vector<std::string> label_candidates(taskgen::Task task) {
  std::vector<std::string> out;
  auto add_pools = [&](const std::vector<taskgen::LabelPool>& pools) {
    for (const auto& p : pools) {
      for (const auto& l : p.labels) {
        if (std::find(out.begin(), out.end(), l) == out.end()) out.push_back(l);
      }
    }
  };
  if (task == taskgen::Task::kLppCls) {
    add_pools(taskgen::binary_label_pools());
  } else if (task == taskgen::Task::kCl) {
    add_pools(taskgen::binary_label_pools());
    add_pools(taskgen::ternary_label_pools());
  }
  return out;
}

EvalTask heldout_task(taskgen::Task task, std::vector<packer::Instance> instances,
                      std::size_t shots, std::size_t min_examples) {
  const std::size_t need = std::max(min_examples, shots + 1);
  struct State {
    std::vector<std::vector<packer::PackedExample>> examples;
    std::vector<std::string> ids;
    std::vector<std::string> candidates;
  };
  auto state = std::make_shared<State>();
  state->candidates = label_candidates(task);
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& inst = instances[i];
    if (inst.task != task || inst.spans.size() < need) continue;
    state->examples.push_back(packer::unpack(inst));
    state->ids.push_back(std::to_string(i));
  }
  const std::string name(taskgen::task_name(task));
  if (state->examples.empty()) {
    fail(ErrorKind::kData, "no " + name + " instances with at least " + std::to_string(need) +
                               " examples");
  }

  EvalTask out;
  out.name = name;
  out.metrics = {state->candidates.empty() ? "rouge_l" : "accuracy"};
  out.items = [state, shots, name](std::uint64_t seed) {
    std::vector<EvalItem> items;
    items.reserve(state->examples.size());
    for (std::size_t i = 0; i < state->examples.size(); ++i) {
      const auto& ex = state->examples[i];
      std::vector<std::string> demos;
      for (std::size_t j = 0; j + 1 < ex.size(); ++j) demos.push_back(ex[j].prefix + ex[j].output);
      templates::RenderedExample test;
      test.prefix = ex.back().prefix;
      if (state->candidates.empty()) {
        test.reference = ex.back().output;
      } else {
        test.choices = state->candidates;
        const auto it = std::find(test.choices.begin(), test.choices.end(), ex.back().output);
        if (it == test.choices.end()) {
          fail(ErrorKind::kData, "instance " + state->ids[i] + ": label '" + ex.back().output +
                                     "' is not a known label");
        }
        test.gold = static_cast<std::size_t>(it - test.choices.begin());
      }
      Rng rng(derive_seed(seed, i));
      auto item = templates::assemble_prompt(demos, test, shots, rng);
      item.id = state->ids[i];
      item.task = name;
      items.push_back(std::move(item));
    }
    return items;
  };
  return out;
}

ScoreReport run_benchmark(std::span<const EvalTask> tasks, const Scorer& scorer,
                          const RunOptions& options) {
  if (options.seeds.empty()) fail(ErrorKind::kConfig, "at least one seed is required");
  if (tasks.empty()) fail(ErrorKind::kConfig, "no tasks to evaluate");
  ScoreReport report;
  report.seeds = options.seeds;
  for (const auto& task : tasks) {
    TaskReport tr;
    tr.name = task.name;
    tr.metrics = task.metrics;
    for (const auto seed : options.seeds) {
      const auto items = task.items(seed);
      tr.items = items.size();
      const auto outcomes = evaluate_items(items, scorer, options);
      tr.runs.push_back(task_metrics(task.metrics, outcomes));
      tr.scores.push_back(task_score(tr.runs.back()));
    }
    for (const auto& m : task.metrics) {
      std::vector<double> v;
      for (const auto& r : tr.runs) v.push_back(r.at(m));
      tr.mean[m] = mean_of(v);
      if (const auto s = sample_std(v)) {
        if (!tr.stddev) tr.stddev.emplace();
        (*tr.stddev)[m] = *s;
      }
    }
    tr.score_mean = mean_of(tr.scores);
    tr.score_std = sample_std(tr.scores);
    report.tasks.push_back(std::move(tr));
  }
  for (std::size_t r = 0; r < options.seeds.size(); ++r) {
    std::vector<double> per_task;
    for (const auto& tr : report.tasks) per_task.push_back(tr.scores[r]);
    report.average_runs.push_back(benchmark_average(per_task));
  }
  report.average_mean = mean_of(report.average_runs);
  report.average_std = sample_std(report.average_runs);
  return report;
}

json to_json(const ScoreReport& report) {
  json tasks = json::array();
  for (const auto& t : report.tasks) {
    json jt = {{"task", t.name},
               {"metrics", t.metrics},
               {"items", t.items},
               {"runs", t.runs},
               {"mean", t.mean},
               {"scores", t.scores},
               {"score_mean", t.score_mean}};
    if (t.stddev) jt["std"] = *t.stddev;
    if (t.score_std) jt["score_std"] = *t.score_std;
    tasks.push_back(std::move(jt));
  }
  json j = {{"seeds", report.seeds},
            {"tasks", std::move(tasks)},
            {"average_runs", report.average_runs},
            {"average_mean", report.average_mean}};
  if (report.average_std) j["average_std"] = *report.average_std;
  return j;
}

std::string format_table(const ScoreReport& report) {
  std::string out;
  char line[256];
  auto row = [&](const std::string& task, const std::string& metric, double mean,
                 std::optional<double> sd) {
    if (sd) {
      std::snprintf(line, sizeof line, "%-12s %-10s %7.2f (%.2f)\n", task.c_str(),
                    metric.c_str(), 100.0 * mean, 100.0 * *sd);
    } else {
      std::snprintf(line, sizeof line, "%-12s %-10s %7.2f\n", task.c_str(), metric.c_str(),
                    100.0 * mean);
    }
    out += line;
  };
  std::snprintf(line, sizeof line, "%-12s %-10s %7s\n", "task", "metric", "mean");
  out += line;
  for (const auto& t : report.tasks) {
    for (const auto& m : t.metrics) {
      std::optional<double> sd;
      if (t.stddev) sd = t.stddev->at(m);
      row(t.name, m, t.mean.at(m), sd);
    }
  }
  row("average", "", report.average_mean, report.average_std);
  return out;
}

}  // namespace selfsup::evaluator
