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

#include "selfsup/pipeline.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "selfsup/error.hpp"
#include "selfsup/ngram.hpp"
#include "selfsup/rng.hpp"
#include "selfsup/text.hpp"

namespace selfsup::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using taskgen::Example;
using taskgen::Task;

namespace {

constexpr std::array<std::pair<FileTask, std::string_view>, 6> kFileTaskNames = {{
    {FileTask::kNsg, "NSG"},
    {FileTask::kMwp, "MWP"},
    {FileTask::kLpp, "LPP"},
    {FileTask::kCl, "CL"},
    {FileTask::kDae, "DAE"},
    {FileTask::kGsg, "GSG"},
}};

std::string task_file(FileTask t, bool heldout) {
  return std::string(file_task_name(t)) + (heldout ? ".heldout.jsonl" : ".jsonl");
}

double unit_interval(std::uint64_t x) {
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::string domain_of(const Example& e) {
  return e.meta.value("domain", std::string());
}

}  // namespace

std::string_view file_task_name(FileTask t) noexcept {
  for (const auto& [task, name] : kFileTaskNames) {
    if (task == t) return name;
  }
  return "?";
}

std::optional<FileTask> parse_file_task(std::string_view name) {
  const auto upper = [&] {
    std::string s(name);
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
  }();
  for (const auto& [task, n] : kFileTaskNames) {
    if (n == upper) return task;
  }
  return std::nullopt;
}

std::vector<FileTask> default_file_tasks() {
  return {FileTask::kNsg, FileTask::kMwp, FileTask::kLpp, FileTask::kCl};
}

std::size_t default_docs_for_domain(std::string_view domain) {
  return domain == "stories" ? corpus::CorpusSampleConfig::kLongDocumentDocs
                             : corpus::CorpusSampleConfig::kDefaultDocsPerDomain;
}

void PipelineConfig::validate() const {
  sample.validate();
  if (tasks.empty()) fail(ErrorKind::kConfig, "at least one task must be enabled");
  if (!(data_ratio > 0.0)) fail(ErrorKind::kConfig, "data ratio must be positive");
  if (instances_per_task == 0) fail(ErrorKind::kConfig, "instance target must be positive");
  if (lpp_cls_share < 0.0 || lpp_cls_share > 1.0) {
    fail(ErrorKind::kConfig, "LPP classification share must be in [0, 1]");
  }
  if (heldout_fraction < 0.0 || heldout_fraction >= 1.0) {
    fail(ErrorKind::kConfig, "held-out fraction must be in [0, 1)");
  }
  if (workers == 0) fail(ErrorKind::kConfig, "workers must be at least 1");
  packer::TokenBudget{max_tokens, packer::make_counter(counter)}.validate();
}

json PipelineConfig::semantic_json() const {
  json inputs = json::array();
  for (const auto& c : corpus) inputs.push_back({c.path.generic_string(), c.domain});
  json task_names = json::array();
  for (const auto t : tasks) task_names.push_back(file_task_name(t));
  char ratio[64];
  std::snprintf(ratio, sizeof ratio, "%.17g", data_ratio);
  char share[64];
  std::snprintf(share, sizeof share, "%.17g", lpp_cls_share);
  char heldout[64];
  std::snprintf(heldout, sizeof heldout, "%.17g", heldout_fraction);
  return json{{"corpus", inputs},
              {"docs_per_domain", sample.docs_per_domain},
              {"min_sentence_words", sample.min_sentence_words},
              {"min_window_sentences", sample.min_window_sentences},
              {"tasks", task_names},
              {"instances_per_task", instances_per_task},
              {"data_ratio", ratio},
              {"random_label", random_label},
              {"lpp_cls_share", share},
              {"heldout_fraction", heldout},
              {"max_tokens", max_tokens},
              {"counter", counter},
              {"seed", seed}};
}

std::string PipelineConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(semantic_json().dump())));
  return buf;
}

void parallel_for(std::size_t n, std::size_t workers,
                  const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// I/O

void write_jsonl(const fs::path& path, std::span<const json> records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<json> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Example> read_examples(const fs::path& path) {
  std::vector<Example> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(taskgen::example_from_json(j));
    } catch (const std::exception& e) {
      fail(ErrorKind::kParse, path.string() + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

std::vector<packer::Instance> read_instances(const fs::path& path) {
  std::vector<packer::Instance> out;
  std::size_t line = 0;
  for (const auto& j : read_jsonl(path)) {
    ++line;
    try {
      out.push_back(packer::instance_from_json(j));
    } catch (const std::exception& e) {
      fail(ErrorKind::kParse, path.string() + ": record " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthesize

SynthesisCorpus prepare_corpus(const PipelineConfig& cfg) {
  if (cfg.corpus.empty()) fail(ErrorKind::kConfig, "no corpus inputs given");
  corpus::CorpusSampleConfig sc = cfg.sample;
  sc.seed = derive_seed(cfg.seed, "corpus");
  for (const auto& in : cfg.corpus) {
    if (!sc.docs_per_domain.contains(in.domain)) {
      sc.docs_per_domain[in.domain] = default_docs_for_domain(in.domain);
    }
  }
  sc.validate();

  SynthesisCorpus out;
  corpus::DocumentSampler sampler(sc);
  for (const auto& in : cfg.corpus) {
    auto st = corpus::ingest(in.path, in.domain, [&](corpus::Document&& d) { sampler.add(std::move(d)); });
    for (auto& w : st.warnings) out.warnings.push_back(std::move(w));
  }
  out.documents = std::move(sampler).finish();

  std::vector<std::vector<corpus::SentenceWindow>> per_doc(out.documents.size());
  parallel_for(out.documents.size(), cfg.workers,
               [&](std::size_t i) { per_doc[i] = corpus::windows(out.documents[i], sc); });

  const std::uint64_t split_seed = derive_seed(cfg.seed, "heldout");
  for (std::size_t i = 0; i < out.documents.size(); ++i) {
    const bool heldout =
        unit_interval(derive_seed(split_seed, out.documents[i].id)) < cfg.heldout_fraction;
    auto& target = heldout ? out.heldout_windows : out.train_windows;
    for (auto& w : per_doc[i]) {
      const auto t = w.text();
      if (text::contains(t, taskgen::kInputMarker) || text::contains(t, taskgen::kOutputMarker)) {
        ++out.skipped_marker_windows;
        continue;
      }
      target.push_back(std::move(w));
    }
  }
  return out;
}

std::vector<Example> build_examples(FileTask task,
                                    std::span<const corpus::SentenceWindow> windows,
                                    std::uint64_t seed, const PipelineConfig& cfg) {
  const auto& table = taskgen::FunctionWordTable::standard();
  taskgen::PhraseBank bank;
  std::optional<taskgen::ForeignWindowSampler> foreign;
  if (task == FileTask::kLpp) bank.harvest(windows, table);
  if (task == FileTask::kCl) {
    foreign.emplace(std::vector<corpus::SentenceWindow>(windows.begin(), windows.end()));
  }

  std::vector<std::vector<Example>> per_window(windows.size());
  parallel_for(windows.size(), cfg.workers, [&](std::size_t i) {
    const auto& w = windows[i];
    Rng rng(derive_seed(seed, w.doc_id + "@" + std::to_string(w.start)));
    auto& out = per_window[i];
    try {
      switch (task) {
        case FileTask::kNsg:
          out.push_back(taskgen::build_nsg(w, rng));
          break;
        case FileTask::kMwp:
          out.push_back(taskgen::build_mwp(w, rng));
          break;
        case FileTask::kLpp: {
          std::optional<Example> e;
          if (rng.bernoulli(cfg.lpp_cls_share)) e = taskgen::build_lpp_cls(w, table, bank, rng);
          if (!e) e = taskgen::build_lpp_gen(w, table, rng);
          if (e) out.push_back(std::move(*e));
          break;
        }
        case FileTask::kCl:
          out = taskgen::build_cl(w, *foreign, rng);
          break;
        case FileTask::kDae:
          out.push_back(taskgen::build_dae(w, rng));
          break;
        case FileTask::kGsg:
          out.push_back(taskgen::build_gsg(w, rng));
          break;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kConstructor) throw;
      out.clear();  // window unusable for this task
    }
  });

  std::vector<Example> examples;
  for (auto& v : per_window) {
    for (auto& e : v) examples.push_back(std::move(e));
  }

  if (cfg.random_label && !examples.empty()) {
    taskgen::DonorPool donors;
    for (const auto& e : examples) donors.add(e);
    const std::uint64_t label_seed = derive_seed(seed, "random_label");
    parallel_for(examples.size(), cfg.workers, [&](std::size_t i) {
      Rng rng(derive_seed(label_seed, static_cast<std::uint64_t>(i)));
      examples[i] = taskgen::corrupt_labels(examples[i], donors, rng);
    });
  }
  return examples;
}

namespace {

json count_examples(std::span<const Example> examples) {
  std::map<std::string, std::size_t> by_domain;
  std::map<std::string, std::size_t> by_task;
  for (const auto& e : examples) {
    ++by_domain[domain_of(e)];
    ++by_task[std::string(taskgen::task_name(e.task))];
  }
  return json{{"examples", examples.size()}, {"by_domain", by_domain}, {"by_constructor", by_task}};
}

void write_examples(const fs::path& path, std::span<const Example> examples) {
  std::vector<json> rows;
  rows.reserve(examples.size());
  for (const auto& e : examples) rows.push_back(taskgen::to_json(e));
  write_jsonl(path, rows);
}

}  // namespace

SynthesizeResult synthesize(const PipelineConfig& cfg) {
  cfg.validate();
  const auto prepared = prepare_corpus(cfg);
  SynthesizeResult result;
  result.warnings = prepared.warnings;

  const fs::path dir = cfg.out_dir / "examples";
  fs::create_directories(dir);
  const std::uint64_t task_seed = derive_seed(cfg.seed, "taskgen");

  std::map<std::string, std::size_t> docs_by_domain;
  for (const auto& d : prepared.documents) ++docs_by_domain[d.domain];

  json tasks = json::object();
  for (const auto t : cfg.tasks) {
    const std::string name(file_task_name(t));
    const auto seed = derive_seed(task_seed, name);
    const auto train = build_examples(t, prepared.train_windows, derive_seed(seed, "train"), cfg);
    write_examples(dir / task_file(t, false), train);
    json entry = count_examples(train);
    entry["file"] = (fs::path("examples") / task_file(t, false)).generic_string();
    if (train.empty()) result.warnings.push_back(name + ": corpus produced no examples");
    if (cfg.heldout_fraction > 0.0) {
      const auto held =
          build_examples(t, prepared.heldout_windows, derive_seed(seed, "heldout"), cfg);
      write_examples(dir / task_file(t, true), held);
      entry["heldout"] = count_examples(held);
      entry["heldout"]["file"] = (fs::path("examples") / task_file(t, true)).generic_string();
    }
    tasks[name] = std::move(entry);
  }

  result.manifest = json{{"config_hash", cfg.config_hash()},
                         {"seed", cfg.seed},
                         {"config", cfg.semantic_json()},
                         {"documents", docs_by_domain},
                         {"windows",
                          {{"train", prepared.train_windows.size()},
                           {"heldout", prepared.heldout_windows.size()},
                           {"skipped_marker", prepared.skipped_marker_windows}}},
                         {"tasks", std::move(tasks)},
                         {"warnings", result.warnings}};
  std::ofstream out(cfg.out_dir / "manifest.json", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write manifest in " + cfg.out_dir.string());
  out << result.manifest.dump(2) << '\n';
  return result;
}

// ---------------------------------------------------------------------------
// pack

std::vector<packer::Instance> pack_examples(std::span<const Example> examples,
                                            const packer::TokenBudget& budget,
                                            std::uint64_t seed, std::size_t workers,
                                            std::vector<packer::PackDecision>* log,
                                            std::vector<std::string>* warnings) {
  std::map<std::string, std::vector<Example>> groups;
  for (const auto& e : examples) {
    groups[std::string(taskgen::task_name(e.task)) + "/" + domain_of(e)].push_back(e);
  }
  std::vector<std::pair<const std::string*, const std::vector<Example>*>> keyed;
  for (const auto& [k, v] : groups) keyed.emplace_back(&k, &v);

  std::vector<packer::PackResult> results(keyed.size());
  parallel_for(keyed.size(), workers, [&](std::size_t i) {
    Rng rng(derive_seed(seed, *keyed[i].first));
    results[i] = packer::pack(*keyed[i].second, budget, rng);
  });

  std::vector<packer::Instance> out;
  for (auto& r : results) {
    const std::size_t offset = out.size();
    if (log != nullptr) {
      for (auto d : r.log) {
        d.instance += offset;
        log->push_back(std::move(d));
      }
    }
    if (warnings != nullptr) {
      for (auto& w : r.warnings) warnings->push_back(std::move(w));
    }
    for (auto& inst : r.instances) out.push_back(std::move(inst));
  }
  return out;
}

namespace {

json instance_stats(std::span<const packer::Instance> instances) {
  struct Acc {
    std::size_t instances = 0;
    std::size_t examples = 0;
    std::size_t tokens = 0;
  };
  std::map<std::string, Acc> by_domain;
  Acc all;
  for (const auto& inst : instances) {
    for (Acc* a : {&by_domain[inst.domain], &all}) {
      ++a->instances;
      a->examples += inst.example_count;
      a->tokens += inst.tokens;
    }
  }
  auto to_j = [](const Acc& a) {
    const double n = a.instances == 0 ? 1.0 : static_cast<double>(a.instances);
    return json{{"instances", a.instances},
                {"examples", a.examples},
                {"avg_examples_per_instance", static_cast<double>(a.examples) / n},
                {"avg_tokens_per_instance", static_cast<double>(a.tokens) / n}};
  };
  json j = to_j(all);
  json d = json::object();
  for (const auto& [k, a] : by_domain) d[k] = to_j(a);
  j["by_domain"] = std::move(d);
  return j;
}

void write_instances(const fs::path& path, std::span<const packer::Instance> instances) {
  std::vector<json> rows;
  rows.reserve(instances.size());
  for (const auto& i : instances) rows.push_back(packer::to_json(i));
  write_jsonl(path, rows);
}

}  // namespace

PackSummary pack(const PipelineConfig& cfg) {
  cfg.validate();
  const packer::TokenBudget budget{cfg.max_tokens, packer::make_counter(cfg.counter)};
  const fs::path in_dir = cfg.out_dir / "examples";
  const fs::path out_dir = cfg.out_dir / "instances";
  fs::create_directories(out_dir);
  const std::uint64_t pack_seed = derive_seed(cfg.seed, "packer");

  PackSummary summary;
  json per_task = json::object();
  for (const auto t : cfg.tasks) {
    const std::string name(file_task_name(t));
    const fs::path src = in_dir / task_file(t, false);
    if (!fs::exists(src)) {
      fail(ErrorKind::kIo, "missing example file for " + name + ": " + src.string());
    }
    const auto examples = read_examples(src);
    std::vector<packer::PackDecision> log;
    std::vector<std::string> warnings;
    const auto seed = derive_seed(pack_seed, name);
    auto instances = pack_examples(examples, budget, seed, cfg.workers, &log, &warnings);
    const std::size_t packed = instances.size();

    std::size_t overflow = 0;
    for (const auto& d : log) overflow += d.reason == packer::StopReason::kOverflow;

    if (instances.size() > cfg.instances_per_task) {
      Rng rng(derive_seed(seed, "target"));
      auto keep = rng.sample_indices(instances.size(), cfg.instances_per_task);
      std::sort(keep.begin(), keep.end());
      std::vector<packer::Instance> kept;
      kept.reserve(keep.size());
      for (const auto i : keep) kept.push_back(std::move(instances[i]));
      instances = std::move(kept);
    } else if (instances.size() < cfg.instances_per_task) {
      warnings.push_back(name + ": " + std::to_string(instances.size()) +
                         " instances, below the target of " +
                         std::to_string(cfg.instances_per_task));
    }
    if (cfg.data_ratio != 1.0) {
      Rng rng(derive_seed(seed, "ratio"));
      instances = packer::subsample(instances, cfg.data_ratio, rng);
    }
    write_instances(out_dir / task_file(t, false), instances);

    if (cfg.write_pack_log) {
      std::vector<json> rows;
      for (const auto& d : log) {
        json r = {{"instance", d.instance},
                  {"reason", d.reason == packer::StopReason::kOverflow ? "overflow" : "exhausted"},
                  {"instance_tokens", d.instance_tokens}};
        if (d.reason == packer::StopReason::kOverflow) {
          r["candidate_tokens"] = d.candidate_tokens;
          r["candidate"] = d.candidate;
        }
        rows.push_back(std::move(r));
      }
      write_jsonl(out_dir / (name + ".log.jsonl"), rows);
    }

    json entry = instance_stats(instances);
    entry["packed"] = packed;
    entry["overflow_closes"] = overflow;
    entry["exhausted_closes"] = log.size() - overflow;
    entry["file"] = (fs::path("instances") / task_file(t, false)).generic_string();

    const fs::path held_src = in_dir / task_file(t, true);
    if (fs::exists(held_src)) {
      const auto held_examples = read_examples(held_src);
      const auto held = pack_examples(held_examples, budget, derive_seed(seed, "heldout"),
                                      cfg.workers, nullptr, &warnings);
      write_instances(out_dir / task_file(t, true), held);
      entry["heldout"] = instance_stats(held);
      entry["heldout"]["file"] = (fs::path("instances") / task_file(t, true)).generic_string();
    }
    entry["warnings"] = warnings;
    for (auto& w : warnings) summary.warnings.push_back(std::move(w));
    per_task[name] = std::move(entry);
  }
  summary.stats = json{{"max_tokens", cfg.max_tokens},
                       {"instances_per_task", cfg.instances_per_task},
                       {"data_ratio", cfg.data_ratio},
                       {"counter", cfg.counter},
                       {"tasks", std::move(per_task)}};
  std::ofstream out(out_dir / "stats.json", std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write " + (out_dir / "stats.json").string());
  out << summary.stats.dump(2) << '\n';
  return summary;
}

// ---------------------------------------------------------------------------
// evaluation

std::vector<evaluator::EvalTask> make_eval_tasks(const EvalConfig& cfg) {
  std::vector<evaluator::EvalTask> tasks;
  if (!cfg.benchmarks.empty()) {
    const auto set = cfg.templates_path ? templates::TemplateSet::load(*cfg.templates_path)
                                        : templates::TemplateSet::builtin();
    for (const auto& [task, path] : cfg.benchmarks) {
      const auto& tpl = set.get(task, cfg.style);
      auto eval = templates::load_records(path);
      std::vector<templates::Record> demos;
      if (const auto it = cfg.demos.find(task); it != cfg.demos.end()) {
        demos = templates::load_records(it->second);
      }
      tasks.push_back(evaluator::template_task(tpl, std::move(eval), std::move(demos), cfg.shots));
    }
  }
  for (const auto& [name, path] : cfg.heldout) {
    const auto task = taskgen::parse_task(name);
    if (!task) fail(ErrorKind::kConfig, "unknown held-out task '" + name + "'");
    const std::size_t min_examples = cfg.min_examples == 0 ? cfg.shots + 1 : cfg.min_examples;
    tasks.push_back(evaluator::heldout_task(*task, read_instances(path), cfg.shots, min_examples));
  }
  if (tasks.empty()) fail(ErrorKind::kConfig, "no benchmark or held-out tasks given");
  return tasks;
}

std::vector<std::string> load_training_texts(std::span<const fs::path> files) {
  std::vector<std::string> texts;
  for (const auto& f : files) {
    const auto ext = f.extension().string();
    if (ext == ".jsonl" || ext == ".ndjson") {
      for (const auto& j : read_jsonl(f)) {
        if (j.contains("text") && j["text"].is_string()) {
          texts.push_back(j["text"].get<std::string>());
        } else if (j.contains("input") && j.contains("output")) {
          texts.push_back(taskgen::example_from_json(j).render());
        }
      }
    } else {
      std::ifstream in(f, std::ios::binary);
      if (!in) fail(ErrorKind::kIo, "cannot open " + f.string());
      std::string line;
      while (std::getline(in, line)) {
        if (!text::trim(line).empty()) texts.push_back(line);
      }
    }
  }
  return texts;
}

std::unique_ptr<Scorer> make_scorer(const ScorerConfig& cfg) {
  if (cfg.kind.starts_with("process:")) {
    const auto cmd = cfg.kind.substr(std::string_view("process:").size());
    if (text::trim(cmd).empty()) fail(ErrorKind::kConfig, "process scorer needs a command");
    return std::make_unique<ProcessScorer>(cmd);
  }
  if (cfg.kind != "ngram") {
    fail(ErrorKind::kConfig, "unknown scorer '" + cfg.kind + "' (use ngram or process:<cmd>)");
  }
  std::shared_ptr<const ngram::NgramModel> model;
  if (cfg.model_path) {
    std::ifstream in(*cfg.model_path, std::ios::binary);
    if (!in) fail(ErrorKind::kIo, "cannot open n-gram model " + cfg.model_path->string());
    model = std::make_shared<const ngram::NgramModel>(ngram::NgramModel::load(in));
  } else {
    if (cfg.train_files.empty()) {
      fail(ErrorKind::kConfig, "n-gram scorer needs training files or a saved model");
    }
    const auto texts = load_training_texts(cfg.train_files);
    model = std::make_shared<const ngram::NgramModel>(ngram::NgramModel::fit(texts, cfg.order, cfg.k));
  }
  if (cfg.save_path) {
    std::ofstream out(*cfg.save_path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + cfg.save_path->string());
    model->save(out);
  }
  return std::make_unique<ngram::NgramScorer>(model,
                                              ngram::NgramScorerOptions{cfg.cache_weight, "Input:"});
}

std::vector<fs::path> render_eval(const EvalConfig& cfg, const fs::path& out_dir) {
  std::vector<fs::path> written;
  for (const auto& task : make_eval_tasks(cfg)) {
    for (const auto seed : cfg.run.seeds) {
      std::vector<json> rows;
      for (const auto& item : task.items(seed)) rows.push_back(templates::to_json(item));
      const auto path = out_dir / (task.name + ".seed" + std::to_string(seed) + ".jsonl");
      write_jsonl(path, rows);
      written.push_back(path);
    }
  }
  return written;
}

evaluator::ScoreReport evaluate(const EvalConfig& cfg, const Scorer& scorer,
                                const fs::path& report_path) {
  const auto tasks = make_eval_tasks(cfg);
  auto report = evaluator::run_benchmark(tasks, scorer, cfg.run);
  if (!report_path.empty()) {
    if (report_path.has_parent_path()) fs::create_directories(report_path.parent_path());
    std::ofstream out(report_path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write " + report_path.string());
    json j = evaluator::to_json(report);
    j["style"] = templates::style_name(cfg.style);
    j["shots"] = cfg.shots;
    out << j.dump(2) << '\n';
  }
  return report;
}

// ---------------------------------------------------------------------------
// stats

json stats(const fs::path& out_dir) {
  json j = json::object();
  const fs::path ex_dir = out_dir / "examples";
  const fs::path in_dir = out_dir / "instances";
  if (!fs::exists(ex_dir) && !fs::exists(in_dir)) {
    fail(ErrorKind::kIo, "no examples/ or instances/ under " + out_dir.string());
  }
  auto sorted_files = [](const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::exists(dir)) {
      for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (e.is_regular_file() && name.ends_with(".jsonl") && !name.ends_with(".log.jsonl")) {
          files.push_back(e.path());
        }
      }
    }
    std::sort(files.begin(), files.end());
    return files;
  };
  json examples = json::object();
  for (const auto& f : sorted_files(ex_dir)) {
    const auto ex = read_examples(f);
    json e = count_examples(ex);
    std::size_t in_words = 0;
    std::size_t out_words = 0;
    for (const auto& x : ex) {
      in_words += text::count_words(x.input_text);
      out_words += text::count_words(x.output_text);
    }
    const double n = ex.empty() ? 1.0 : static_cast<double>(ex.size());
    e["avg_input_words"] = static_cast<double>(in_words) / n;
    e["avg_output_words"] = static_cast<double>(out_words) / n;
    examples[f.filename().string()] = std::move(e);
  }
  json instances = json::object();
  for (const auto& f : sorted_files(in_dir)) {
    auto insts = read_instances(f);
    const auto counter = packer::WhitespaceCounter();
    for (auto& i : insts) i.tokens = counter.count(i.text);
    instances[f.filename().string()] = instance_stats(insts);
  }
  j["examples"] = std::move(examples);
  j["instances"] = std::move(instances);
  return j;
}

}  // namespace selfsup::pipeline
