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

// Acceptance checks. One PASS/FAIL line per criterion; exit status is the
// number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "selfsup/corpus.hpp"
#include "selfsup/evaluator.hpp"
#include "selfsup/ngram.hpp"
#include "selfsup/packer.hpp"
#include "selfsup/pipeline.hpp"
#include "selfsup/taskgen.hpp"
#include "selfsup/templates.hpp"
#include "selfsup/text.hpp"
#include "synthetic_corpus.hpp"

namespace {

namespace fs = std::filesystem;
using namespace selfsup;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Constructor invariants

bool ascii_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
}

std::string bare(std::string_view w) {
  while (!w.empty() && !ascii_alnum(w.front())) w.remove_prefix(1);
  while (!w.empty() && !ascii_alnum(w.back())) w.remove_suffix(1);
  return text::to_lower_ascii(w);
}

struct Violations {
  std::map<std::string, std::size_t> count;
  std::map<std::string, std::size_t> checked;
  std::string first;

  void check(const std::string& task, bool ok, const std::string& what) {
    ++checked[task];
    if (ok) return;
    ++count[task];
    if (first.empty()) first = task + ": " + what;
  }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& [k, v] : count) n += v;
    return n;
  }
};

// Chi-squared goodness of fit against the uniform distribution.
bool uniform_at_alpha(const std::vector<std::size_t>& counts, double alpha, double* stat,
                      double* critical) {
  double n = 0;
  for (auto c : counts) n += static_cast<double>(c);
  const double expected = n / static_cast<double>(counts.size());
  double x2 = 0;
  for (auto c : counts) x2 += (static_cast<double>(c) - expected) * (c - expected) / expected;
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  *stat = x2;
  *critical = boost::math::quantile(boost::math::complement(dist, alpha));
  return x2 <= *critical;
}

Outcome constructor_invariants() {
  const auto t0 = Clock::now();
  constexpr std::size_t kWindows = 16'000;

  // Documents through the real segmenter and windowing.
  Rng rng(2024);
  std::vector<corpus::Document> docs;
  std::vector<corpus::SentenceWindow> windows;
  corpus::CorpusSampleConfig cfg;
  while (windows.size() < kWindows) {
    std::string body;
    const std::size_t n = rng.uniform_between(6, 15);
    for (std::size_t i = 0; i < n; ++i) body += (i ? " " : "") + testing::synthetic_sentence(rng);
    corpus::Document d;
    d.id = "doc" + std::to_string(docs.size());
    d.domain = "news";
    d.sentences = corpus::segment(body);
    for (auto& w : corpus::windows(d, cfg)) windows.push_back(std::move(w));
    docs.push_back(std::move(d));
  }
  std::map<std::string, const corpus::Document*> by_id;
  for (const auto& d : docs) by_id[d.id] = &d;

  const auto& table = taskgen::FunctionWordTable::standard();
  taskgen::PhraseBank bank;
  bank.harvest(windows, table);
  taskgen::ForeignWindowSampler foreign(windows);

  Violations v;
  std::map<std::string, std::size_t> made;
  // Label permutation counts per arity: index of the permutation.
  std::map<std::size_t, std::vector<std::size_t>> perm_counts = {{2, std::vector<std::size_t>(2)},
                                                                 {3, std::vector<std::size_t>(6)}};

  auto join = [](const std::vector<std::string>& s) { return text::join(s, " "); };

  for (std::size_t wi = 0; wi < windows.size(); ++wi) {
    const auto& w = windows[wi];
    Rng r(derive_seed(99, static_cast<std::uint64_t>(wi)));
    std::vector<std::string> sents;
    for (const auto& s : w.sentences) sents.push_back(s.text);
    const std::string original = join(sents);

    {
      const auto e = taskgen::build_nsg(w, r);
      ++made["NSG"];
      v.check("NSG", e.output_text == sents.back() &&
                         e.input_text == join({sents.begin(), sents.end() - 1}),
              "context/last sentence split");
    }
    {
      const auto e = taskgen::build_mwp(w, r);
      ++made["MWP"];
      const std::string sym = e.meta["symbol"];
      const auto in = text::split_words_copy(e.input_text);
      const auto orig = text::split_words_copy(original);
      std::size_t masks = 0;
      std::vector<std::string> removed;
      bool aligned = in.size() == orig.size();
      for (std::size_t i = 0; aligned && i < in.size(); ++i) {
        if (in[i] == sym) {
          ++masks;
          removed.push_back(orig[i]);
        } else {
          aligned = in[i] == orig[i];
        }
      }
      v.check("MWP",
              aligned && masks >= 1 && masks <= 20 &&
                  masks == text::count_words(e.output_text) && join(removed) == e.output_text &&
                  !text::contains(original, sym),
              "mask count " + std::to_string(masks) + " vs output '" + e.output_text + "'");
    }

    // Last-phrase oracle.
    const auto last = text::split_words_copy(sents.back());
    std::optional<std::size_t> fw;
    for (std::size_t i = 0; i < last.size(); ++i) {
      if (table.contains(bare(last[i]))) fw = i;
    }
    bool extractable = fw && *fw >= (last.size() + 1) / 2 && *fw > 0;
    std::string expect_question, expect_phrase, expect_fw;
    if (extractable) {
      expect_fw = bare(last[*fw]);
      expect_question = join({sents.begin(), sents.end() - 1}) + " Question: " +
                        join({last.begin(), last.begin() + static_cast<std::ptrdiff_t>(*fw)}) +
                        " ?";
      expect_phrase = join({last.begin() + static_cast<std::ptrdiff_t>(*fw), last.end()});
      while (!expect_phrase.empty() && std::string(".,;:!?\"')]}").find(expect_phrase.back()) !=
                                           std::string::npos) {
        expect_phrase.pop_back();
      }
      extractable = !expect_phrase.empty();
    }
    {
      const auto e = taskgen::build_lpp_gen(w, table, r);
      if (e) ++made["LPP_GEN"];
      v.check("LPP_GEN",
              e.has_value() == extractable &&
                  (!e || (e->input_text == expect_question && e->output_text == expect_phrase)),
              "question for window " + w.doc_id);
    }
    {
      const auto e = taskgen::build_lpp_cls(w, table, bank, r);
      if (e) {
        ++made["LPP_CLS"];
        const int cls = e->meta["label_class"];
        const std::string answer = e->meta["answer"];
        const auto labels = e->meta["labels"].get<std::vector<std::string>>();
        const auto answer_words = text::split_words_copy(answer);
        bool ok = extractable && e->input_text == expect_question + " Answer: " + answer &&
                  e->output_text == labels.at(static_cast<std::size_t>(cls)) &&
                  !answer_words.empty() && bare(answer_words[0]) == expect_fw;
        if (cls == 0) ok = ok && answer == expect_phrase;
        if (cls == 1) ok = ok && answer != expect_phrase;
        v.check("LPP_CLS", ok, "classification example for window " + w.doc_id);
      } else {
        v.check("LPP_CLS", !extractable || bank.phrases(expect_fw).size() <= 1,
                "missing classification example for " + w.doc_id);
      }
    }
    {
      const auto group = taskgen::build_cl(w, foreign, r);
      made["CL"] += group.size();
      const auto types = group.front().meta["cl_types"].get<std::vector<std::string>>();
      const auto pool = group.front().meta["labels"].get<std::vector<std::string>>();
      // Label of each type in pool-index order, as a permutation rank.
      std::vector<std::size_t> perm;
      for (const auto& t : types) {
        const std::string label = group.front().meta["label_map"][t];
        perm.push_back(static_cast<std::size_t>(
            std::find(pool.begin(), pool.end(), label) - pool.begin()));
      }
      std::vector<std::size_t> identity(perm.size());
      for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
      std::size_t rank = 0;
      do {
        if (identity == perm) break;
        ++rank;
      } while (std::next_permutation(identity.begin(), identity.end()));
      ++perm_counts[perm.size()][rank];

      for (const auto& e : group) {
        const std::string type = e.meta["cl_type"];
        bool ok = e.output_text == e.meta["label_map"][type].get<std::string>();
        if (type == "ORIGINAL") {
          ok = ok && e.input_text == original;
        } else if (type == "SHUFFLED") {
          const auto perm_of = e.meta["permutation"].get<std::vector<std::size_t>>();
          std::vector<std::string> block;
          std::vector<std::size_t> sorted = perm_of;
          std::sort(sorted.begin(), sorted.end());
          bool is_perm = sorted.size() == sents.size();
          for (std::size_t i = 0; is_perm && i < sorted.size(); ++i) is_perm = sorted[i] == i;
          for (auto k : perm_of) block.push_back(is_perm ? sents[k] : "");
          ok = ok && is_perm && !std::is_sorted(perm_of.begin(), perm_of.end()) &&
               e.input_text == join(block);
        } else {
          const std::string fdoc = e.meta["foreign_doc"];
          const std::size_t fstart = e.meta["foreign_start"];
          const auto* d = by_id.at(fdoc);
          const std::size_t n = sents.size();
          std::vector<std::string> expected = sents;
          std::size_t lo = 0, hi = n;
          if (type == "MULTI_DOC") {
            const auto rep = e.meta["replaced"].get<std::vector<std::size_t>>();
            lo = rep.at(0);
            hi = rep.at(1);
            ok = ok && hi - lo == (n + 1) / 2 && (lo == 0 || hi == n);
          }
          for (std::size_t i = lo; ok && i < hi; ++i) {
            ok = fstart + (i - lo) < d->sentences.size();
            if (ok) expected[i] = d->sentences[fstart + (i - lo)].text;
          }
          ok = ok && fdoc != w.doc_id && e.input_text == join(expected);
        }
        v.check("CL", ok, type + " input for " + w.doc_id);
      }
    }
    {
      const auto e = taskgen::build_dae(w, r);
      ++made["DAE"];
      v.check("DAE", e.output_text == original, "reconstruction target");
    }
    {
      const auto e = taskgen::build_gsg(w, r);
      ++made["GSG"];
      const std::size_t gap = e.meta["gap"];
      auto masked = sents;
      masked[gap] = e.meta["symbol"].get<std::string>();
      v.check("GSG", e.output_text == sents[gap] && e.input_text == join(masked),
              "gap sentence");
    }
  }

  const double elapsed = seconds_since(t0);
  Outcome o;
  std::ostringstream d;
  std::size_t fewest = SIZE_MAX;
  for (const auto& [task, n] : made) fewest = std::min(fewest, n);
  d << "examples/task min " << fewest << ", violations " << v.total();
  if (!v.first.empty()) d << " (first: " << v.first << ")";
  for (const auto& [arity, counts] : perm_counts) {
    double stat = 0, crit = 0;
    const bool uniform = uniform_at_alpha(counts, 0.01, &stat, &crit);
    d << "; CL label chi2[" << arity << "] " << fmt("%.2f", stat) << " <= " << fmt("%.2f", crit);
    o.pass = o.pass && uniform;
  }
  d << "; " << fmt("%.1f", elapsed) << "s";
  o.pass = o.pass && fewest >= 10'000 && v.total() == 0 && elapsed < 120.0;
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 2. Packing

std::map<std::string, std::string> file_tree(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testing::slurp(e.path());
  }
  return out;
}

Outcome packing(const fs::path& work) {
  testing::SyntheticCorpusOptions opts;
  opts.target_bytes = 1'000'000;
  opts.seed = 11;
  pipeline::PipelineConfig cfg;
  cfg.corpus = testing::write_synthetic_corpus(work / "corpus", opts);
  cfg.tasks = {pipeline::FileTask::kNsg, pipeline::FileTask::kMwp, pipeline::FileTask::kLpp,
               pipeline::FileTask::kCl,  pipeline::FileTask::kDae, pipeline::FileTask::kGsg};
  cfg.max_tokens = 256;
  cfg.seed = 3;
  cfg.write_pack_log = true;

  std::vector<std::map<std::string, std::string>> trees;
  for (const std::size_t workers : {1, 1, 8}) {
    cfg.workers = workers;
    cfg.out_dir = work / ("run" + std::to_string(trees.size()));
    pipeline::synthesize(cfg);
    pipeline::pack(cfg);
    trees.push_back(file_tree(cfg.out_dir));
  }
  const bool identical = trees[0] == trees[1] && trees[0] == trees[2];

  // Budget and replay over the first run.
  const auto counter = packer::make_counter(cfg.counter);
  std::size_t instances = 0, within = 0, replayed = 0;
  for (const auto t : cfg.tasks) {
    const std::string name(pipeline::file_task_name(t));
    const auto dir = work / "run0" / "instances";
    const auto insts = pipeline::read_instances(dir / (name + ".jsonl"));
    const auto log = pipeline::read_jsonl(dir / (name + ".log.jsonl"));
    for (const auto& inst : insts) within += counter->count(inst.text) <= cfg.max_tokens;
    instances += insts.size();
    for (const auto& row : log) {
      if (row["reason"] != "overflow") continue;
      packer::PackDecision d;
      d.reason = packer::StopReason::kOverflow;
      d.candidate = row["candidate"];
      const auto& inst = insts.at(row["instance"].get<std::size_t>());
      replayed += packer::replay_overflows(inst, d, *counter, cfg.max_tokens);
    }
  }
  const double within_frac = static_cast<double>(within) / static_cast<double>(instances);
  const double replay_frac = static_cast<double>(replayed) / static_cast<double>(instances);
  Outcome o;
  o.pass = instances > 0 && within == instances && replay_frac >= 0.99 && identical;
  o.detail = std::to_string(instances) + " instances, within budget " +
             fmt("%.4f", within_frac) + ", next-candidate overflow " + fmt("%.4f", replay_frac) +
             ", byte-identical (2 runs, 1 vs 8 workers) " + (identical ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 3. ROUGE-L

// Top-down recursion over suffixes with memoization.
std::size_t oracle_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    if (i == a.size() || j == b.size()) return std::size_t{0};
    const auto key = std::make_pair(i, j);
    if (const auto it = memo.find(key); it != memo.end()) return it->second;
    const std::size_t r = a[i] == b[j] ? 1 + go(i + 1, j + 1) : std::max(go(i + 1, j), go(i, j + 1));
    memo[key] = r;
    return r;
  };
  return go(0, 0);
}

Outcome rouge() {
  Rng rng(77);
  const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "a", "dog", "ran"};
  std::size_t mismatches = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::string> a(rng.uniform_between(1, 20)), b(rng.uniform_between(1, 20));
    for (auto& w : a) w = vocab[rng.uniform(vocab.size())];
    for (auto& w : b) w = vocab[rng.uniform(vocab.size())];
    const double l = static_cast<double>(oracle_lcs(a, b));
    const double p = l / static_cast<double>(a.size());
    const double r = l / static_cast<double>(b.size());
    const double expected = l == 0 ? 0.0 : 2 * p * r / (p + r);
    const double got = evaluator::rouge_l_score(text::join(a, " "), text::join(b, " "));
    if (std::abs(got - expected) > 1e-12) ++mismatches;
  }
  const double identity = evaluator::rouge_l_score("the cat sat on the mat", "the cat sat on the mat");
  const double disjoint = evaluator::rouge_l_score("the cat sat", "a dog ran");
  Outcome o;
  o.pass = mismatches == 0 && identity == 1.0 && disjoint == 0.0;
  o.detail = "1000 random pairs, " + std::to_string(mismatches) + " mismatches; identity " +
             fmt("%.1f", identity) + ", disjoint " + fmt("%.1f", disjoint);
  return o;
}

// ---------------------------------------------------------------------------
// 4. Ranking

class ScaledScorer final : public Scorer {
 public:
  ScaledScorer(const Scorer& inner, double c) : inner_(inner), c_(c) {}
  ContinuationScore score(std::string_view p, std::string_view c) const override {
    auto s = inner_.score(p, c);
    s.log_prob *= c_;
    return s;
  }
  std::string generate(std::string_view p, std::size_t n) const override {
    return inner_.generate(p, n);
  }

 private:
  const Scorer& inner_;
  double c_;
};

Outcome ranking() {
  // Bigram, k = 1 over "p a p a p b p c": vocabulary {a, b, c, p} plus the
  // unknown slot, so |V'| = 5.
  //   after p: a 2, b 1, c 1 (4)     after a: p 2 (2)
  //   unigrams: p 4, a 2, b 1, c 1 (8); "c" never precedes a token.
  const std::vector<std::string> texts = {"p a p a p b p c"};
  auto model =
      std::make_shared<const ngram::NgramModel>(ngram::NgramModel::fit(texts, 2, 1.0));
  ngram::NgramScorer scorer(model);
  templates::EvalItem item;
  item.prompt_prefix = "p";
  item.candidates = {"a", "b", "a p", "c p", "z"};
  const std::vector<double> hand = {
      -std::log(3.0 / 9.0),
      -std::log(2.0 / 9.0),
      -(std::log(3.0 / 9.0) + std::log(3.0 / 7.0)) / 2.0,
      -(std::log(2.0 / 9.0) + std::log(5.0 / 13.0)) / 2.0,
      -std::log(1.0 / 9.0),
  };
  const auto hand_argmin =
      static_cast<std::size_t>(std::min_element(hand.begin(), hand.end()) - hand.begin());
  const auto r = evaluator::rank_classify(item, scorer);
  bool values = true;
  for (std::size_t i = 0; i < hand.size(); ++i) {
    values = values && std::abs(r.nll_per_token[i] - hand[i]) < 1e-12;
  }
  bool invariant = true;
  for (const double c : {1e-3, 0.5, 2.0, 37.0}) {
    invariant = invariant && evaluator::rank_classify(item, ScaledScorer(scorer, c)).choice ==
                                 hand_argmin;
  }
  Outcome o;
  o.pass = r.choice == hand_argmin && values && invariant;
  o.detail = "argmin " + std::to_string(r.choice) + " (hand " + std::to_string(hand_argmin) +
             "), per-token NLL match " + (values ? "yes" : "no") +
             ", invariant under scaling " + (invariant ? "yes" : "no");
  return o;
}

// ---------------------------------------------------------------------------
// 5. Golden templates

Outcome goldens() {
  const fs::path fixtures = fs::path(SELFSUP_FIXTURE_DIR) / "superglue";
  const fs::path golden = SELFSUP_GOLDEN_DIR;
  std::size_t matched = 0, total = 0;
  std::string failed;
  for (const char* task : {"boolq", "rte", "copa", "cb", "multirc"}) {
    for (const auto style : {templates::Style::kOurs, templates::Style::kGpt3}) {
      ++total;
      const auto& tpl = templates::TemplateSet::builtin().get(task, style);
      std::string out;
      for (const auto& rec : templates::load_records(fixtures / (std::string(task) + ".jsonl"))) {
        const auto ex = templates::render_example(rec, tpl);
        out += "== " + rec.id + "\n--- prefix\n" + ex.prefix + "\n";
        for (std::size_t i = 0; i < ex.choices.size(); ++i) {
          out += "--- choice " + std::to_string(i) + "\n" + ex.choices[i] + "\n";
        }
        out += "--- gold " + std::to_string(ex.gold.value()) + "\n";
      }
      const std::string name =
          std::string(task) + "_" + text::to_lower_ascii(templates::style_name(style));
      if (out == testing::slurp(golden / (name + ".txt"))) {
        ++matched;
      } else {
        failed += " " + name;
      }
    }
  }
  Outcome o;
  o.pass = matched == total && total == 10;
  o.detail = std::to_string(matched) + "/" + std::to_string(total) + " byte-exact" +
             (failed.empty() ? "" : "; differ:" + failed);
  return o;
}

// ---------------------------------------------------------------------------
// 6. Metrics

double round1(double x) { return std::round(x * 10.0) / 10.0; }

// The published average closes the results-table row that starts with
// `row`.
bool published_average(const std::string& row, const std::string& value) {
  std::istringstream results(testing::slurp(SELFSUP_RESULTS_FILE));
  for (std::string line; std::getline(results, line);) {
    const auto t = std::string(text::trim(line));
    if (t.starts_with(row) && t.find(value + " \\\\") != std::string::npos) return true;
  }
  return false;
}

Outcome metrics() {
  bool ok = true;
  std::ostringstream d;

  // MultiRC: 3 questions, 7 answer options; class 0 is "True".
  const std::vector<std::size_t> mp = {0, 0, 1, 1, 0, 1, 0};
  const std::vector<std::size_t> mg = {0, 1, 1, 1, 0, 0, 0};
  const std::vector<std::string> groups = {"q1", "q1", "q1", "q2", "q2", "q3", "q3"};
  // tp 3 (0,4,6), fp 1 (1), fn 1 (5): F1a = 6/8. Exact: q2 only.
  const double f1a = evaluator::multirc_f1a(mp, mg);
  const double em = evaluator::multirc_em(mp, mg, groups);
  ok = ok && std::abs(f1a - 0.75) < 1e-9 && std::abs(em - 1.0 / 3.0) < 1e-9;
  d << "MultiRC F1a " << fmt("%.4f", f1a) << " EM " << fmt("%.4f", em);

  // CB confusion (rows gold, columns predicted) [[2,0,0],[0,1,1],[0,0,1]].
  const std::vector<std::size_t> cg = {0, 0, 1, 1, 2};
  const std::vector<std::size_t> cp = {0, 0, 1, 2, 2};
  const double cb = evaluator::macro_f1(cp, cg, 3);
  const double cb_hand = (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0;
  ok = ok && std::abs(cb - cb_hand) < 1e-9 && std::abs(cb - 0.7778) < 5e-5;
  d << "; CB macro-F1 " << fmt("%.4f", cb);

  // Benchmark averages from per-task metric pairs.
  struct Row {
    const char* name;
    std::vector<evaluator::MetricMap> tasks;
    double expected_exact;
    const char* published;
    const char* table_row;
  };
  const std::vector<Row> rows = {
      {"LM",
       {{{"accuracy", 52.1}},
        {{"f1a", 5.2}, {"em", 49.5}},
        {{"accuracy", 67.6}},
        {{"accuracy", 52.0}},
        {{"accuracy", 50.7}, {"f1", 34.8}}},
       48.36,
       "48.4",
       "LM & 125M"},
      {"SelfSup",
       {{{"accuracy", 55.7}},
        {{"f1a", 7.0}, {"em", 60.2}},
        {{"accuracy", 67.6}},
        {{"accuracy", 53.0}},
        {{"accuracy", 50.0}, {"f1", 39.8}}},
       50.96,
       "51.0",
       "Self-Supervised & 125M"},
  };
  for (const auto& row : rows) {
    std::vector<double> scores;
    for (const auto& m : row.tasks) scores.push_back(evaluator::task_score(m));
    const double avg = evaluator::benchmark_average(scores);
    const bool published_ok = published_average(row.table_row, row.published);
    ok = ok && std::abs(avg - row.expected_exact) < 1e-9 &&
         fmt("%.1f", round1(avg)) == row.published && published_ok;
    d << "; " << row.name << " avg " << fmt("%.2f", avg) << " -> " << fmt("%.1f", round1(avg));
  }
  Outcome o;
  o.pass = ok;
  o.detail = d.str();
  return o;
}

// ---------------------------------------------------------------------------
// 7. End to end

Outcome end_to_end(const fs::path& work) {
  const auto t0 = Clock::now();
  testing::SyntheticCorpusOptions opts;
  opts.target_bytes = 1'000'000;
  opts.seed = 5;
  pipeline::PipelineConfig cfg;
  cfg.corpus = testing::write_synthetic_corpus(work / "corpus", opts);
  std::uintmax_t corpus_bytes = 0;
  for (const auto& c : cfg.corpus) corpus_bytes += fs::file_size(c.path);
  cfg.tasks = {pipeline::FileTask::kLpp};
  cfg.max_tokens = 512;
  cfg.heldout_fraction = 0.25;
  cfg.seed = 1;
  cfg.workers = 4;
  cfg.out_dir = work / "out";
  pipeline::synthesize(cfg);
  pipeline::pack(cfg);

  pipeline::ScorerConfig sc;
  sc.train_files = {cfg.out_dir / "instances" / "LPP.jsonl"};
  sc.cache_weight = 0.3;
  const auto scorer = pipeline::make_scorer(sc);

  auto run = [&](std::size_t shots) {
    pipeline::EvalConfig ec;
    ec.heldout = {{"LPP_CLS", cfg.out_dir / "instances" / "LPP.heldout.jsonl"}};
    ec.shots = shots;
    ec.min_examples = 5;
    ec.run.seeds = {1, 2, 3};
    ec.run.workers = 4;
    return pipeline::evaluate(ec, *scorer,
                              cfg.out_dir / "eval" / ("shots" + std::to_string(shots) + ".json"));
  };
  const auto zero = run(0);
  const auto few = run(4);
  const double elapsed = seconds_since(t0);
  const double z = 100.0 * zero.average_mean;
  const double f = 100.0 * few.average_mean;
  Outcome o;
  o.pass = corpus_bytes >= 1'000'000 && f - z >= 5.0 && elapsed < 300.0;
  o.detail = std::to_string(corpus_bytes) + " corpus bytes, " + std::to_string(few.tasks.at(0).items) + " held-out items; zero-shot " +
             fmt("%.2f", z) + ", few-shot (4) " + fmt("%.2f", f) + ", gain " +
             fmt("%.2f", f - z) + " points; " + fmt("%.1f", elapsed) + "s";
  return o;
}

}  // namespace

int main() {
  testing::TempDir work("acceptance");
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {"constructor invariants", constructor_invariants},
      {"packing", [&] { return packing(work.path() / "packing"); }},
      {"rouge-l oracle", rouge},
      {"ranking", ranking},
      {"template goldens", goldens},
      {"metrics", metrics},
      {"end-to-end held-out LPP_CLS", [&] { return end_to_end(work.path() / "e2e"); }},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
