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

#include "selfsup/taskgen.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "selfsup/error.hpp"
#include "selfsup/text.hpp"

namespace selfsup::taskgen {

using corpus::Sentence;
using corpus::SentenceWindow;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 7> kTaskNames = {
    "NSG", "MWP", "LPP_GEN", "LPP_CLS", "CL", "DAE", "GSG"};

constexpr std::array<std::string_view, 4> kClTypeNames = {
    "ORIGINAL", "SHUFFLED", "DIFFERENT_DOC", "MULTI_DOC"};

void require_sentences(const SentenceWindow& w, std::size_t min, Task task) {
  if (w.size() < min) {
    fail(ErrorKind::kConstructor,
         std::string(task_name(task)) + ": window " + w.doc_id + "@" +
             std::to_string(w.start) + " has " + std::to_string(w.size()) +
             " sentences, need " + std::to_string(min));
  }
}

json window_meta(const SentenceWindow& w) {
  return json{{"doc_id", w.doc_id}, {"domain", w.domain}, {"start", w.start}};
}

std::string join_sentences(std::span<const Sentence> sents) {
  std::string out;
  for (std::size_t i = 0; i < sents.size(); ++i) {
    if (i) out += ' ';
    out += sents[i].text;
  }
  return out;
}

bool is_alnum(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9');
}

// Lower-cased word with surrounding ASCII punctuation removed.
std::string bare_word(std::string_view w) {
  std::size_t b = 0;
  std::size_t e = w.size();
  while (b < e && !is_alnum(w[b]) && static_cast<unsigned char>(w[b]) < 0x80) ++b;
  while (e > b && !is_alnum(w[e - 1]) &&
         static_cast<unsigned char>(w[e - 1]) < 0x80) {
    --e;
  }
  return text::to_lower_ascii(w.substr(b, e - b));
}

std::string strip_final_punctuation(std::string s) {
  for (;;) {
    if (s.empty()) return s;
    const char c = s.back();
    if (c == '.' || c == ',' || c == ';' || c == ':' || c == '!' ||
        c == '?' || c == '"' || c == '\'' || c == ')' || c == ']' ||
        c == '}') {
      s.pop_back();
    } else if (s.ends_with("\xE2\x80\x9D") || s.ends_with("\xE2\x80\x99")) {
      s.resize(s.size() - 3);
    } else {
      return s;
    }
  }
}

// Mask symbols that do not already occur in `text`.
std::string pick_mask_symbol(std::string_view text, Rng& rng, Task task) {
  std::vector<std::string_view> eligible;
  for (auto sym : kMaskSymbols) {
    if (!text::contains(text, sym)) eligible.push_back(sym);
  }
  if (eligible.empty()) {
    fail(ErrorKind::kConstructor, std::string(task_name(task)) +
                                      ": every mask symbol occurs in the text");
  }
  return std::string(eligible[rng.uniform(eligible.size())]);
}

std::vector<std::string> type_names(const std::vector<ClInputType>& types) {
  std::vector<std::string> out;
  for (auto t : types) out.emplace_back(cl_type_name(t));
  return out;
}

}  // namespace

std::string_view task_name(Task task) noexcept {
  return kTaskNames[static_cast<std::size_t>(task)];
}

std::optional<Task> parse_task(std::string_view name) {
  for (std::size_t i = 0; i < kTaskNames.size(); ++i) {
    if (kTaskNames[i] == name) return static_cast<Task>(i);
  }
  return std::nullopt;
}

std::string_view cl_type_name(ClInputType t) noexcept {
  return kClTypeNames[static_cast<std::size_t>(t)];
}

std::optional<ClInputType> parse_cl_type(std::string_view name) {
  for (std::size_t i = 0; i < kClTypeNames.size(); ++i) {
    if (kClTypeNames[i] == name) return static_cast<ClInputType>(i);
  }
  return std::nullopt;
}

std::string Example::render() const {
  std::string out;
  out.reserve(input_text.size() + output_text.size() + 16);
  out += kInputMarker;
  out += ' ';
  out += input_text;
  out += '\n';
  out += kOutputMarker;
  out += ' ';
  out += output_text;
  return out;
}

json to_json(const Example& e) {
  return json{{"task", task_name(e.task)},
              {"input", e.input_text},
              {"output", e.output_text},
              {"meta", e.meta}};
}

Example example_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::kParse, "example record is not an object");
  for (const char* key : {"task", "input", "output"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      fail(ErrorKind::kParse,
           std::string("example record needs string field \"") + key + "\"");
    }
  }
  const auto task = parse_task(j["task"].get<std::string>());
  if (!task) {
    fail(ErrorKind::kParse, "unknown task: " + j["task"].get<std::string>());
  }
  Example e;
  e.task = *task;
  e.input_text = j["input"].get<std::string>();
  e.output_text = j["output"].get<std::string>();
  if (j.contains("meta")) e.meta = j["meta"];
  return e;
}

// ---------------------------------------------------------------------------
// Constants

const std::vector<LabelPool>& binary_label_pools() {
  static const std::vector<LabelPool> kPools = {
      {{"Yes", "No"}}, {{"Y", "N"}}, {{"True", "False"}}, {{"T", "F"}}};
  return kPools;
}

const std::vector<LabelPool>& ternary_label_pools() {
  static const std::vector<LabelPool> kPools = {
      {{"Positive", "Negative", "Neutral"}},
      {{"True", "False", "Neither"}},
      {{"T", "F", "N"}},
      {{"Yes", "No", "Unknown"}},
      {{"Y", "N", "U"}}};
  return kPools;
}

const std::vector<LabelPool>& label_pools(std::size_t arity) {
  if (arity == 2) return binary_label_pools();
  if (arity == 3) return ternary_label_pools();
  fail(ErrorKind::kConstructor,
       "no label pool of arity " + std::to_string(arity));
}

FunctionWordTable::FunctionWordTable(std::set<std::string, std::less<>> words)
    : words_(std::move(words)) {}

const FunctionWordTable& FunctionWordTable::standard() {
  // The source list repeats "in", "about" and "from"; the set keeps one each.
  static const FunctionWordTable kTable({
      "the",    "a",      "an",     "for",    "including", "and",    "in",
      "is",     "are",    "were",   "was",    "neither",   "or",     "nor",
      "be",     "at",     "on",     "by",     "to",        "would",  "will",
      "before", "after",  "of",     "about",  "from",      "excluding",
      "except", "during", "under",  "above",  "then",      "into",   "onto",
      "should", "shall",  "must",   "may",    "might",     "than",   "with",
      "using",  "can",    "could",  "as",     "within",    "without", "have",
      "had",    "been",
  });
  return kTable;
}

// ---------------------------------------------------------------------------
// NSG

Example build_nsg(const SentenceWindow& w, Rng& /*rng*/) {
  require_sentences(w, 3, Task::kNsg);
  const auto& s = w.sentences;
  Example e;
  e.task = Task::kNsg;
  e.input_text = join_sentences(std::span(s).first(s.size() - 1));
  e.output_text = s.back().text;
  e.meta = window_meta(w);
  return e;
}

// ---------------------------------------------------------------------------
// MWP

MaskedText mask_words(std::span<const std::string> words,
                      std::span<const std::size_t> positions,
                      std::string_view symbol) {
  MaskedText out;
  std::size_t next = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out.input += ' ';
    if (next < positions.size() && positions[next] == i) {
      out.input += symbol;
      if (next) out.output += ' ';
      out.output += words[i];
      ++next;
    } else {
      out.input += words[i];
    }
  }
  if (next != positions.size()) {
    fail(ErrorKind::kConstructor,
         "mask positions must be sorted, distinct and in range");
  }
  return out;
}

Example build_mwp(const SentenceWindow& w, Rng& rng) {
  const std::string original = w.text();
  const auto words = text::split_words_copy(original);
  if (words.empty()) {
    fail(ErrorKind::kConstructor, "MWP: window " + w.doc_id + "@" +
                                      std::to_string(w.start) + " has no words");
  }
  const std::string symbol = pick_mask_symbol(original, rng, Task::kMwp);
  const std::size_t upper = std::max<std::size_t>(
      1, std::min<std::size_t>(20, words.size() / 2));
  const std::size_t k = rng.uniform_between(1, upper);
  auto positions = rng.sample_indices(words.size(), k);
  std::sort(positions.begin(), positions.end());

  auto masked = mask_words(words, positions, symbol);
  Example e;
  e.task = Task::kMwp;
  e.input_text = std::move(masked.input);
  e.output_text = std::move(masked.output);
  e.meta = window_meta(w);
  e.meta["symbol"] = symbol;
  e.meta["positions"] = positions;
  return e;
}

// ---------------------------------------------------------------------------
// LPP

std::optional<LastPhrase> extract_last_phrase(std::string_view sentence,
                                              const FunctionWordTable& table) {
  const auto words = text::split_words(sentence);
  const std::size_t n = words.size();
  std::optional<std::size_t> last;
  for (std::size_t i = 0; i < n; ++i) {
    if (table.contains(bare_word(words[i]))) last = i;
  }
  if (!last) return std::nullopt;
  const std::size_t half = (n + 1) / 2;
  if (*last < half) return std::nullopt;

  LastPhrase lp;
  lp.position = *last;
  lp.function_word = bare_word(words[*last]);
  lp.prefix = text::join(
      std::vector<std::string_view>(words.begin(), words.begin() + *last), " ");
  lp.phrase = strip_final_punctuation(text::join(
      std::vector<std::string_view>(words.begin() + *last, words.end()), " "));
  if (lp.prefix.empty() || lp.phrase.empty()) return std::nullopt;
  return lp;
}

namespace {

struct LppParts {
  std::string context;
  LastPhrase last;
};

std::optional<LppParts> lpp_parts(const SentenceWindow& w,
                                  const FunctionWordTable& table) {
  if (w.size() < 2) return std::nullopt;
  auto last = extract_last_phrase(w.sentences.back().text, table);
  if (!last) return std::nullopt;
  LppParts p;
  p.context = join_sentences(std::span(w.sentences).first(w.size() - 1));
  p.last = std::move(*last);
  return p;
}

std::string lpp_question(const LppParts& p) {
  return p.context + " Question: " + p.last.prefix + " ?";
}

}  // namespace

std::optional<Example> build_lpp_gen(const SentenceWindow& w,
                                     const FunctionWordTable& table,
                                     Rng& /*rng*/) {
  auto parts = lpp_parts(w, table);
  if (!parts) return std::nullopt;
  Example e;
  e.task = Task::kLppGen;
  e.input_text = lpp_question(*parts);
  e.output_text = parts->last.phrase;
  e.meta = window_meta(w);
  e.meta["function_word"] = parts->last.function_word;
  return e;
}

void PhraseBank::add(std::string_view function_word, std::string phrase) {
  auto it = by_word_.find(function_word);
  if (it == by_word_.end()) {
    it = by_word_.emplace(std::string(function_word), std::vector<std::string>{})
             .first;
  }
  it->second.push_back(std::move(phrase));
  ++total_;
}

void PhraseBank::harvest(std::span<const SentenceWindow> windows,
                         const FunctionWordTable& table) {
  for (const auto& w : windows) {
    if (w.sentences.empty()) continue;
    if (auto lp = extract_last_phrase(w.sentences.back().text, table)) {
      add(lp->function_word, std::move(lp->phrase));
    }
  }
}

std::span<const std::string> PhraseBank::phrases(
    std::string_view function_word) const {
  auto it = by_word_.find(function_word);
  if (it == by_word_.end()) return {};
  return it->second;
}

std::optional<Example> build_lpp_cls(const SentenceWindow& w,
                                     const FunctionWordTable& table,
                                     const PhraseBank& bank, Rng& rng) {
  auto parts = lpp_parts(w, table);
  if (!parts) return std::nullopt;
  const std::string& truth = parts->last.phrase;
  const auto candidates = bank.phrases(parts->last.function_word);

  // Negative: uniform over bank entries that differ from the true phrase.
  std::optional<std::string> negative;
  if (!candidates.empty()) {
    for (int attempt = 0; attempt < 16 && !negative; ++attempt) {
      const auto& c = candidates[rng.uniform(candidates.size())];
      if (c != truth) negative = c;
    }
    if (!negative) {
      std::vector<std::size_t> others;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (candidates[i] != truth) others.push_back(i);
      }
      if (!others.empty()) negative = candidates[others[rng.uniform(others.size())]];
    }
  }
  if (!negative) return std::nullopt;

  const bool positive = rng.bernoulli(0.5);
  const auto& pools = binary_label_pools();
  const auto& pool = pools[rng.uniform(pools.size())];
  const int label_class = positive ? 0 : 1;
  const std::string& answer = positive ? truth : *negative;

  Example e;
  e.task = Task::kLppCls;
  e.input_text = lpp_question(*parts) + " Answer: " + answer;
  e.output_text = pool.labels[static_cast<std::size_t>(label_class)];
  e.meta = window_meta(w);
  e.meta["function_word"] = parts->last.function_word;
  e.meta["phrase"] = truth;
  e.meta["answer"] = answer;
  e.meta["label_class"] = label_class;
  e.meta["labels"] = pool.labels;
  return e;
}

// ---------------------------------------------------------------------------
// CL

ForeignWindowSampler::ForeignWindowSampler(
    std::vector<SentenceWindow> windows)
    : windows_(std::move(windows)) {}

ForeignWindowSampler::Run ForeignWindowSampler::draw(std::string_view exclude_doc,
                                                     std::size_t length,
                                                     Rng& rng) const {
  auto usable = [&](const SentenceWindow& w) {
    return w.doc_id != exclude_doc && w.size() >= length;
  };
  const SentenceWindow* pick = nullptr;
  if (!windows_.empty()) {
    for (int attempt = 0; attempt < 32 && !pick; ++attempt) {
      const auto& w = windows_[rng.uniform(windows_.size())];
      if (usable(w)) pick = &w;
    }
    if (!pick) {
      std::vector<std::size_t> ok;
      for (std::size_t i = 0; i < windows_.size(); ++i) {
        if (usable(windows_[i])) ok.push_back(i);
      }
      if (!ok.empty()) pick = &windows_[ok[rng.uniform(ok.size())]];
    }
  }
  if (!pick) {
    fail(ErrorKind::kConstructor,
         "CL: no foreign window of " + std::to_string(length) +
             " sentences outside document " + std::string(exclude_doc));
  }
  const std::size_t offset = rng.uniform(pick->size() - length + 1);
  Run run;
  run.doc_id = pick->doc_id;
  run.start = pick->sentences[offset].index;
  run.sentences.assign(
      pick->sentences.begin() + static_cast<std::ptrdiff_t>(offset),
      pick->sentences.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return run;
}

std::vector<Example> build_cl(const SentenceWindow& w,
                              const ForeignWindowSampler& foreign, Rng& rng) {
  require_sentences(w, 2, Task::kCl);
  const std::size_t n = w.size();

  constexpr std::array<ClInputType, 3> kOthers = {
      ClInputType::kShuffled, ClInputType::kDifferentDoc,
      ClInputType::kMultiDoc};
  const std::size_t extra = 1 + rng.uniform(2);
  std::vector<ClInputType> types = {ClInputType::kOriginal};
  for (auto idx : rng.sample_indices(kOthers.size(), extra)) {
    types.push_back(kOthers[idx]);
  }
  std::sort(types.begin(), types.end());
  const auto names = type_names(types);

  const auto& pools = label_pools(types.size());
  const auto& pool = pools[rng.uniform(pools.size())];
  const auto perm = rng.sample_indices(types.size(), types.size());
  json label_map = json::object();
  for (std::size_t i = 0; i < types.size(); ++i) {
    label_map[names[i]] = pool.labels[perm[i]];
  }

  const std::string group = w.doc_id + "@" + std::to_string(w.start);
  std::vector<Example> out;
  for (std::size_t i = 0; i < types.size(); ++i) {
    Example e;
    e.task = Task::kCl;
    e.meta = window_meta(w);
    std::vector<Sentence> block;
    switch (types[i]) {
      case ClInputType::kOriginal:
        block = w.sentences;
        break;
      case ClInputType::kShuffled: {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        // Rejection keeps the draw uniform over non-identity permutations.
        do {
          rng.shuffle(order);
        } while (std::is_sorted(order.begin(), order.end()));
        for (auto k : order) block.push_back(w.sentences[k]);
        e.meta["permutation"] = order;
        break;
      }
      case ClInputType::kDifferentDoc: {
        auto run = foreign.draw(w.doc_id, n, rng);
        block = std::move(run.sentences);
        e.meta["foreign_doc"] = run.doc_id;
        e.meta["foreign_start"] = run.start;
        break;
      }
      case ClInputType::kMultiDoc: {
        const std::size_t replaced = (n + 1) / 2;
        auto run = foreign.draw(w.doc_id, replaced, rng);
        const bool at_front = rng.bernoulli(0.5);
        const std::size_t lo = at_front ? 0 : n - replaced;
        block = w.sentences;
        std::copy(run.sentences.begin(), run.sentences.end(),
                  block.begin() + static_cast<std::ptrdiff_t>(lo));
        e.meta["foreign_doc"] = run.doc_id;
        e.meta["foreign_start"] = run.start;
        e.meta["replaced"] = {lo, lo + replaced};
        break;
      }
    }
    e.input_text = join_sentences(block);
    e.output_text = label_map[names[i]].get<std::string>();
    e.meta["group"] = group;
    e.meta["cl_type"] = names[i];
    e.meta["cl_types"] = names;
    e.meta["label_type"] = names[i];
    e.meta["label_map"] = label_map;
    e.meta["labels"] = pool.labels;
    out.push_back(std::move(e));
  }
  rng.shuffle(out);
  return out;
}

// ---------------------------------------------------------------------------
// DAE / GSG

Example build_dae(const SentenceWindow& w, Rng& rng, const DaeConfig& cfg) {
  require_sentences(w, 3, Task::kDae);
  const std::string original = w.text();
  const auto words = text::split_words_copy(original);

  std::vector<std::string> kept;
  for (const auto& word : words) {
    if (!rng.bernoulli(cfg.delete_prob)) kept.push_back(word);
  }
  std::size_t deleted = words.size() - kept.size();
  if (kept.empty() && !words.empty()) {
    kept.push_back(words[rng.uniform(words.size())]);
    --deleted;
  }
  std::size_t swaps = 0;
  for (std::size_t i = 0; i + 1 < kept.size(); ++i) {
    if (!rng.bernoulli(cfg.swap_prob)) continue;
    const std::size_t reach = std::min<std::size_t>(2, kept.size() - 1 - i);
    const std::size_t j = i + 1 + rng.uniform(reach);
    std::swap(kept[i], kept[j]);
    ++swaps;
  }

  Example e;
  e.task = Task::kDae;
  e.input_text = text::join(kept, " ");
  e.output_text = original;
  e.meta = window_meta(w);
  e.meta["deleted"] = deleted;
  e.meta["swaps"] = swaps;
  return e;
}

Example build_gsg(const SentenceWindow& w, Rng& rng) {
  require_sentences(w, 3, Task::kGsg);
  const std::string symbol = pick_mask_symbol(w.text(), rng, Task::kGsg);
  const std::size_t gap = rng.uniform(w.size());
  std::string input;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) input += ' ';
    input += i == gap ? symbol : w.sentences[i].text;
  }
  Example e;
  e.task = Task::kGsg;
  e.input_text = std::move(input);
  e.output_text = w.sentences[gap].text;
  e.meta = window_meta(w);
  e.meta["gap"] = gap;
  e.meta["symbol"] = symbol;
  return e;
}

// ---------------------------------------------------------------------------
// Corruption

void DonorPool::add(const Example& e) { outputs_[e.task].push_back(e.output_text); }

std::span<const std::string> DonorPool::outputs(Task task) const {
  auto it = outputs_.find(task);
  if (it == outputs_.end()) return {};
  return it->second;
}

Example corrupt_labels(const Example& e, const DonorPool& donors, Rng& rng) {
  Example out = e;
  out.meta["corrupted"] = true;
  switch (e.task) {
    case Task::kLppCls: {
      const auto& labels = e.meta.at("labels");
      const std::size_t cls = rng.uniform(labels.size());
      out.meta["label_class"] = cls;
      out.output_text = labels[cls].get<std::string>();
      return out;
    }
    case Task::kCl: {
      const auto& types = e.meta.at("cl_types");
      const auto type = types[rng.uniform(types.size())].get<std::string>();
      out.meta["label_type"] = type;
      out.output_text = e.meta.at("label_map").at(type).get<std::string>();
      return out;
    }
    default: {
      const auto pool = donors.outputs(e.task);
      if (pool.empty()) {
        fail(ErrorKind::kData, "random-label donor pool is empty for task " +
                                   std::string(task_name(e.task)));
      }
      out.output_text = pool[rng.uniform(pool.size())];
      return out;
    }
  }
}

// ---------------------------------------------------------------------------
// Label maps

bool uses_label_map(Task task) noexcept {
  return task == Task::kLppCls || task == Task::kCl;
}

std::string label_bucket(const Example& e) {
  if (e.task != Task::kCl) return {};
  std::string out;
  for (const auto& t : e.meta.at("cl_types")) {
    if (!out.empty()) out += '+';
    out += t.get<std::string>();
  }
  return out;
}

LabelAssignment draw_label_assignment(const Example& exemplar, Rng& rng) {
  LabelAssignment a;
  if (exemplar.task == Task::kLppCls) {
    const auto& pools = binary_label_pools();
    a.labels = pools[rng.uniform(pools.size())].labels;
  } else if (exemplar.task == Task::kCl) {
    const auto& types = exemplar.meta.at("cl_types");
    const auto& pools = label_pools(types.size());
    a.labels = pools[rng.uniform(pools.size())].labels;
    const auto perm = rng.sample_indices(types.size(), types.size());
    for (std::size_t i = 0; i < types.size(); ++i) {
      a.type_labels[types[i].get<std::string>()] = a.labels[perm[i]];
    }
  }
  return a;
}

void apply_label_assignment(Example& e, const LabelAssignment& a) {
  if (e.task == Task::kLppCls) {
    const auto cls = e.meta.at("label_class").get<std::size_t>();
    e.output_text = a.labels.at(cls);
    e.meta["labels"] = a.labels;
  } else if (e.task == Task::kCl) {
    const auto type = e.meta.at("label_type").get<std::string>();
    auto it = a.type_labels.find(type);
    if (it == a.type_labels.end()) {
      fail(ErrorKind::kData, "CL label assignment lacks input type " + type);
    }
    e.output_text = it->second;
    e.meta["label_map"] = a.type_labels;
    e.meta["labels"] = a.labels;
  }
}

}  // namespace selfsup::taskgen
