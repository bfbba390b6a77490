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

// selfsup: synthesize -> pack -> render-eval -> evaluate -> stats.

#include <cstdint>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "selfsup/error.hpp"
#include "selfsup/ngram.hpp"
#include "selfsup/pipeline.hpp"
#include "selfsup/scorer.hpp"
#include "selfsup/text.hpp"

namespace {

using selfsup::ErrorKind;
using selfsup::fail;
namespace pl = selfsup::pipeline;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kIo:
      return 3;
    case ErrorKind::kParse:
      return 4;
    case ErrorKind::kData:
    case ErrorKind::kConstructor:
    case ErrorKind::kRender:
      return 5;
    case ErrorKind::kScorer:
      return 6;
  }
  return 1;
}

// "key=value" pairs into a map.
std::map<std::string, std::string> split_pairs(const std::vector<std::string>& items,
                                               const std::string& flag) {
  std::map<std::string, std::string> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) {
      fail(ErrorKind::kConfig, flag + " expects name=value, got '" + item + "'");
    }
    out[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return out;
}

struct Options {
  pl::PipelineConfig pipeline;
  std::vector<std::string> corpus;
  std::vector<std::string> docs_per_domain;
  std::vector<std::string> tasks;

  pl::EvalConfig eval;
  std::vector<std::string> benchmarks;
  std::vector<std::string> demos;
  std::vector<std::string> heldout;
  std::string style = "ours";
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string templates;
  std::string report;
  std::string eval_dir;

  pl::ScorerConfig scorer;
  std::vector<std::string> scorer_train;
  std::string model;
  std::string save_model;

  void finalize() {
    auto& p = pipeline;
    p.corpus.clear();
    for (const auto& c : corpus) {
      const auto eq = c.find('=');
      if (eq == std::string::npos) {
        p.corpus.push_back({c, "default"});
      } else {
        p.corpus.push_back({c.substr(eq + 1), c.substr(0, eq)});
      }
    }
    for (const auto& [domain, n] : split_pairs(docs_per_domain, "--docs-per-domain")) {
      try {
        p.sample.docs_per_domain[domain] = std::stoul(n);
      } catch (const std::logic_error&) {
        fail(ErrorKind::kConfig, "--docs-per-domain: bad count '" + n + "'");
      }
    }
    if (!tasks.empty()) {
      p.tasks.clear();
      for (const auto& t : tasks) {
        const auto ft = pl::parse_file_task(t);
        if (!ft) fail(ErrorKind::kConfig, "unknown task '" + t + "'");
        p.tasks.push_back(*ft);
      }
    }

    for (const auto& [k, v] : split_pairs(benchmarks, "--benchmark")) eval.benchmarks[k] = v;
    for (const auto& [k, v] : split_pairs(demos, "--demos")) eval.demos[k] = v;
    for (const auto& [k, v] : split_pairs(heldout, "--heldout")) eval.heldout[k] = v;
    const auto s = selfsup::templates::parse_style(style);
    if (!s) fail(ErrorKind::kConfig, "--style must be ours or gpt3");
    eval.style = *s;
    if (!templates.empty()) eval.templates_path = templates;
    eval.run.seeds = seeds;
    eval.run.workers = p.workers;

    for (const auto& f : scorer_train) scorer.train_files.emplace_back(f);
    if (!model.empty()) scorer.model_path = model;
    if (!save_model.empty()) scorer.save_path = save_model;
    if (report.empty()) report = (p.out_dir / "eval" / "report.json").string();
    if (eval_dir.empty()) eval_dir = (p.out_dir / "eval").string();
  }
};

void add_pipeline_options(CLI::App& app, Options& o) {
  auto& p = o.pipeline;
  app.add_option("--seed", p.seed, "Global seed")->capture_default_str();
  app.add_option("--workers", p.workers, "Worker threads")->capture_default_str();
  app.add_option("--out", p.out_dir, "Output directory")->capture_default_str();

  app.add_option("--corpus", o.corpus, "Corpus file, optionally domain=path (repeatable)");
  app.add_option("--docs-per-domain", o.docs_per_domain, "domain=count (repeatable)");
  app.add_option("--min-sentence-words", p.sample.min_sentence_words)->capture_default_str();
  app.add_option("--min-window-sentences", p.sample.min_window_sentences)
      ->capture_default_str();
  app.add_option("--tasks", o.tasks, "NSG, MWP, LPP, CL, DAE, GSG (default: first four)")
      ->delimiter(',');
  app.add_flag("--random-label", p.random_label, "Replace outputs with random labels");
  app.add_option("--lpp-cls-share", p.lpp_cls_share, "Share of LPP windows used for "
                                                       "classification")
      ->capture_default_str();
  app.add_option("--heldout-fraction", p.heldout_fraction, "Documents kept for held-out files")
      ->capture_default_str();

  app.add_option("--max-tokens", p.max_tokens, "Token budget per instance")
      ->capture_default_str();
  app.add_option("--counter", p.counter, "whitespace, bytes or bpe:<merges>")
      ->capture_default_str();
  app.add_option("--instances-per-task", p.instances_per_task)->capture_default_str();
  app.add_option("--ratio", p.data_ratio, "Fraction of packed instances to keep")
      ->capture_default_str();
  app.add_flag("--pack-log", p.write_pack_log, "Write the packer decision log");

  app.add_option("--benchmark", o.benchmarks, "task=records.jsonl (repeatable)");
  app.add_option("--demos", o.demos, "task=records.jsonl demonstration pool (repeatable)");
  app.add_option("--heldout", o.heldout, "TASK=instances.jsonl (repeatable)");
  app.add_option("--templates", o.templates, "Template file (default: built-in)");
  app.add_option("--style", o.style, "ours or gpt3")->capture_default_str();
  app.add_option("--shots", o.eval.shots, "Demonstrations per prompt")->capture_default_str();
  app.add_option("--min-examples", o.eval.min_examples,
                 "Held-out instances need this many examples (0: shots + 1)")
      ->capture_default_str();
  app.add_option("--eval-seeds", o.seeds, "Evaluation seeds")->delimiter(',');
  app.add_option("--max-new-tokens", o.eval.run.max_new_tokens)->capture_default_str();
  app.add_option("--report", o.report, "Report path (default: <out>/eval/report.json)");
  app.add_option("--eval-dir", o.eval_dir, "render-eval output (default: <out>/eval)");

  app.add_option("--scorer", o.scorer.kind, "ngram or process:<command>")
      ->capture_default_str();
  app.add_option("--ngram-train", o.scorer_train, "Files to fit the n-gram scorer on");
  app.add_option("--ngram-model", o.model, "Load a saved n-gram model");
  app.add_option("--ngram-save", o.save_model, "Save the fitted n-gram model");
  app.add_option("--ngram-order", o.scorer.order)->capture_default_str();
  app.add_option("--ngram-k", o.scorer.k)->capture_default_str();
  app.add_option("--cache-weight", o.scorer.cache_weight,
                 "Weight of the prompt cache in the n-gram scorer")
      ->capture_default_str();
}

int run_synthesize(const Options& o) {
  const auto r = pl::synthesize(o.pipeline);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "config " << r.manifest["config_hash"].get<std::string>() << '\n';
  for (const auto& [task, entry] : r.manifest["tasks"].items()) {
    std::cout << task << ": " << entry["examples"].get<std::size_t>() << " examples";
    if (entry.contains("heldout")) {
      std::cout << ", " << entry["heldout"]["examples"].get<std::size_t>() << " held out";
    }
    std::cout << '\n';
  }
  return 0;
}

int run_pack(const Options& o) {
  const auto r = pl::pack(o.pipeline);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& [task, entry] : r.stats["tasks"].items()) {
    std::cout << task << ": " << entry["instances"].get<std::size_t>() << " instances, "
              << entry["avg_examples_per_instance"].get<double>() << " examples/instance\n";
  }
  return 0;
}

int run_render_eval(const Options& o) {
  for (const auto& p : pl::render_eval(o.eval, o.eval_dir)) std::cout << p.string() << '\n';
  return 0;
}

int run_evaluate(const Options& o) {
  const auto scorer = pl::make_scorer(o.scorer);
  const auto report = pl::evaluate(o.eval, *scorer, o.report);
  std::cout << selfsup::evaluator::format_table(report);
  return 0;
}

int run_stats(const Options& o) {
  std::cout << pl::stats(o.pipeline.out_dir).dump(2) << '\n';
  return 0;
}

int run_serve(const Options& o) {
  const auto scorer = pl::make_scorer(o.scorer);
  selfsup::serve_scorer(*scorer, std::cin, std::cout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised few-shot data pipeline"};
  app.set_config("--config", "", "Key-value config file (INI or TOML)");
  app.require_subcommand(1);
  Options o;
  add_pipeline_options(app, o);

  auto* synth = app.add_subcommand("synthesize", "Build example files from a corpus");
  auto* pack = app.add_subcommand("pack", "Pack example files into instances");
  auto* render = app.add_subcommand("render-eval", "Write rendered evaluation prompts");
  auto* eval = app.add_subcommand("evaluate", "Score benchmarks or held-out instances");
  auto* stats = app.add_subcommand("stats", "Summarize example and instance files");
  auto* serve = app.add_subcommand("serve", "Serve the scorer protocol on stdin/stdout");
  for (auto* sub : {synth, pack, render, eval, stats, serve}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    o.finalize();
    if (*synth) return run_synthesize(o);
    if (*pack) return run_pack(o);
    if (*render) return run_render_eval(o);
    if (*eval) return run_evaluate(o);
    if (*stats) return run_stats(o);
    if (*serve) return run_serve(o);
  } catch (const selfsup::Error& e) {
    std::cerr << "error (" << selfsup::to_string(e.kind()) << "): " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
