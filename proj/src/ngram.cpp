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

#include "selfsup/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <optional>
#include <set>
#include <sstream>

#include "selfsup/error.hpp"
#include "selfsup/text.hpp"

namespace selfsup::ngram {
namespace {

using Level = std::unordered_map<std::string, NgramModel::ContextStats>;

std::string key_of(std::span<const std::uint32_t> ids) {
  std::string key;
  key.reserve(ids.size() * 4);
  for (const auto id : ids) {
    for (int b = 0; b < 4; ++b) key.push_back(static_cast<char>((id >> (8 * b)) & 0xFF));
  }
  return key;
}

bool has_unknown(std::span<const std::uint32_t> ids) {
  return std::find(ids.begin(), ids.end(), NgramModel::kUnknown) != ids.end();
}

// Longest context suffix of `history` present in `levels`, or null when even
// the empty context is unseen.
const NgramModel::ContextStats* lookup(const std::vector<Level>& levels,
                                       std::span<const std::uint32_t> history) {
  const std::size_t max_m = std::min(levels.size() - 1, history.size());
  for (std::size_t m = max_m; m >= 1; --m) {
    const auto ctx = history.subspan(history.size() - m);
    if (has_unknown(ctx)) continue;
    const auto it = levels[m].find(key_of(ctx));
    if (it != levels[m].end() && it->second.total > 0) return &it->second;
  }
  const auto it = levels[0].find(std::string());
  if (it != levels[0].end() && it->second.total > 0) return &it->second;
  return nullptr;
}

double estimate(const NgramModel::ContextStats* stats, std::uint32_t next, double k,
                double support) {
  if (stats == nullptr) return 1.0 / support;
  std::uint64_t c = 0;
  if (const auto it = stats->next.find(next); it != stats->next.end()) c = it->second;
  return (static_cast<double>(c) + k) / (static_cast<double>(stats->total) + k * support);
}

// Adds every n-gram (n <= order) ending at the last position of `seq`.
void count_suffixes(std::vector<Level>& levels, std::span<const std::uint32_t> seq) {
  const std::size_t n = seq.size();
  const std::uint32_t next = seq[n - 1];
  for (std::size_t m = 0; m < levels.size() && m < n; ++m) {
    const auto ctx = seq.subspan(n - 1 - m, m);
    if (has_unknown(ctx)) break;
    auto& stats = levels[m][key_of(ctx)];
    ++stats.total;
    ++stats.next[next];
  }
}

std::vector<std::uint32_t> to_ids(const NgramModel& model, std::string_view text) {
  std::vector<std::uint32_t> ids;
  for (const auto w : text::split_words(text)) ids.push_back(model.id(w));
  return ids;
}

// Running cache model over the prompt seen so far.
class Cache {
 public:
  Cache(std::size_t order, std::span<const std::uint32_t> seed) : levels_(order) {
    for (std::size_t i = 1; i <= seed.size(); ++i) count_suffixes(levels_, seed.first(i));
  }
  void extend(std::span<const std::uint32_t> seq) { count_suffixes(levels_, seq); }
  const NgramModel::ContextStats* context(std::span<const std::uint32_t> history) const {
    return lookup(levels_, history);
  }

 private:
  std::vector<Level> levels_;
};

}  // namespace

std::uint32_t NgramModel::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnknown : it->second;
}

void NgramModel::add_ngram(std::span<const std::uint32_t> ids, std::uint64_t count) {
  const auto ctx = ids.first(ids.size() - 1);
  auto& stats = levels_[ctx.size()][key_of(ctx)];
  stats.total += count;
  stats.next[ids.back()] += count;
}

NgramModel NgramModel::fit(std::span<const std::string> texts, std::size_t order,
                           double k) {
  if (order < 1) fail(ErrorKind::kConfig, "n-gram order must be at least 1");
  if (!(k > 0.0)) fail(ErrorKind::kConfig, "add-k constant must be positive");

  std::set<std::string, std::less<>> words;
  for (const auto& t : texts) {
    for (const auto w : text::split_words(t)) {
      if (!words.contains(w)) words.emplace(w);
    }
  }
  if (words.empty()) fail(ErrorKind::kData, "cannot fit an n-gram model on empty text");

  NgramModel model;
  model.order_ = order;
  model.k_ = k;
  model.vocab_.assign(words.begin(), words.end());
  for (std::uint32_t i = 0; i < model.vocab_.size(); ++i) model.ids_.emplace(model.vocab_[i], i);
  model.levels_.resize(order);
  for (const auto& t : texts) {
    const auto seq = to_ids(model, t);
    for (std::size_t i = 1; i <= seq.size(); ++i) {
      count_suffixes(model.levels_, std::span(seq).first(i));
    }
  }
  return model;
}

const NgramModel::ContextStats* NgramModel::context(
    std::span<const std::uint32_t> history) const {
  return lookup(levels_, history);
}

double NgramModel::prob(std::span<const std::uint32_t> history, std::uint32_t next) const {
  return estimate(context(history), next, k_, static_cast<double>(vocab_.size() + 1));
}

double NgramModel::prob(std::span<const std::string> history, std::string_view next) const {
  std::vector<std::uint32_t> ids;
  ids.reserve(history.size());
  for (const auto& h : history) ids.push_back(id(h));
  return prob(ids, id(next));
}

void NgramModel::save(std::ostream& out) const {
  char kbuf[64];
  std::snprintf(kbuf, sizeof kbuf, "%.17g", k_);
  out << "selfsup-ngram 1\n";
  out << "order " << order_ << "\n";
  out << "k " << kbuf << "\n";
  out << "vocab " << vocab_.size() << "\n";
  for (const auto& w : vocab_) out << w << "\n";

  std::vector<std::string> lines;
  for (std::size_t m = 0; m < levels_.size(); ++m) {
    for (const auto& [key, stats] : levels_[m]) {
      std::string ctx;
      for (std::size_t i = 0; i < m; ++i) {
        std::uint32_t id = 0;
        for (int b = 0; b < 4; ++b) {
          id |= static_cast<std::uint32_t>(static_cast<unsigned char>(key[4 * i + b])) << (8 * b);
        }
        ctx += ' ';
        ctx += std::to_string(id);
      }
      for (const auto& [next, count] : stats.next) {
        lines.push_back(std::to_string(m) + ' ' + std::to_string(count) + ctx + ' ' +
                        std::to_string(next));
      }
    }
  }
  std::sort(lines.begin(), lines.end());
  out << "ngrams " << lines.size() << "\n";
  for (const auto& l : lines) out << l << "\n";
}

NgramModel NgramModel::load(std::istream& in) {
  auto bad = [](const std::string& what) -> void {
    fail(ErrorKind::kParse, "n-gram model: " + what);
  };
  std::string line;
  auto expect = [&](const std::string& label) {
    if (!std::getline(in, line)) bad("unexpected end of file");
    std::istringstream ls(line);
    std::string got;
    ls >> got;
    if (got != label) bad("expected '" + label + "', got '" + line + "'");
    std::string rest;
    std::getline(ls, rest);
    return std::string(text::trim(rest));
  };

  if (expect("selfsup-ngram") != "1") bad("unsupported version");
  NgramModel model;
  try {
    model.order_ = std::stoul(std::string(expect("order")));
    model.k_ = std::stod(std::string(expect("k")));
  } catch (const std::logic_error&) {
    bad("bad header value");
  }
  if (model.order_ < 1 || !(model.k_ > 0.0)) bad("bad order or k");
  std::size_t n_vocab = 0;
  try {
    n_vocab = std::stoul(std::string(expect("vocab")));
  } catch (const std::logic_error&) {
    bad("bad vocabulary size");
  }
  for (std::size_t i = 0; i < n_vocab; ++i) {
    if (!std::getline(in, line) || line.empty()) bad("truncated vocabulary");
    model.ids_.emplace(line, static_cast<std::uint32_t>(i));
    model.vocab_.push_back(line);
  }
  if (model.ids_.size() != n_vocab) bad("duplicate vocabulary entry");
  model.levels_.resize(model.order_);

  std::size_t n_lines = 0;
  try {
    n_lines = std::stoul(std::string(expect("ngrams")));
  } catch (const std::logic_error&) {
    bad("bad n-gram count");
  }
  std::vector<std::uint32_t> ids;
  for (std::size_t i = 0; i < n_lines; ++i) {
    if (!std::getline(in, line)) bad("truncated n-gram table");
    std::istringstream ls(line);
    std::size_t m = 0;
    std::uint64_t count = 0;
    if (!(ls >> m >> count) || m >= model.order_ || count == 0) bad("bad n-gram line: " + line);
    ids.assign(m + 1, 0);
    for (auto& id : ids) {
      if (!(ls >> id) || id >= n_vocab) bad("bad n-gram line: " + line);
    }
    model.add_ngram(ids, count);
  }
  return model;
}

NgramScorer::NgramScorer(std::shared_ptr<const NgramModel> model,
                         NgramScorerOptions options)
    : model_(std::move(model)), options_(std::move(options)) {
  if (!model_) fail(ErrorKind::kConfig, "n-gram scorer needs a model");
  if (options_.cache_weight < 0.0 || options_.cache_weight >= 1.0) {
    fail(ErrorKind::kConfig, "cache weight must be in [0, 1)");
  }
}

ContinuationScore NgramScorer::score(std::string_view prefix,
                                     std::string_view continuation) const {
  auto seq = to_ids(*model_, prefix);
  const auto cont = to_ids(*model_, continuation);
  if (cont.empty()) fail(ErrorKind::kScorer, "empty continuation");

  const double w = options_.cache_weight;
  const double support = static_cast<double>(model_->vocab_size() + 1);
  std::optional<Cache> cache;
  if (w > 0.0) cache.emplace(model_->order(), seq);

  ContinuationScore out;
  for (const auto t : cont) {
    double p = model_->prob(seq, t);
    if (cache) p = (1.0 - w) * p + w * estimate(cache->context(seq), t, model_->k(), support);
    out.log_prob += std::log(p);
    ++out.tokens;
    seq.push_back(t);
    if (cache) cache->extend(seq);
  }
  return out;
}

std::string NgramScorer::generate(std::string_view prefix,
                                  std::size_t max_new_tokens) const {
  if (max_new_tokens == 0) fail(ErrorKind::kConfig, "max_new_tokens must be at least 1");
  auto seq = to_ids(*model_, prefix);
  const double w = options_.cache_weight;
  const double k = model_->k();
  const double support = static_cast<double>(model_->vocab_size() + 1);
  std::optional<Cache> cache;
  if (w > 0.0) cache.emplace(model_->order(), seq);
  const std::uint32_t stop = model_->id(options_.stop_token);

  std::vector<std::string> produced;
  std::vector<std::uint32_t> candidates;
  for (std::size_t step = 0; step < max_new_tokens; ++step) {
    const auto* base = model_->context(seq);
    const NgramModel::ContextStats* local = cache ? cache->context(seq) : nullptr;
    // Tokens never seen after either chosen context share the minimum
    // probability, so the argmax lies among observed followers.
    candidates.clear();
    for (const auto& [id, c] : base->next) candidates.push_back(id);
    if (local != nullptr) {
      for (const auto& [id, c] : local->next) candidates.push_back(id);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    std::uint32_t best = NgramModel::kUnknown;
    double best_p = -1.0;
    for (const auto id : candidates) {
      if (id == NgramModel::kUnknown) continue;
      double p = estimate(base, id, k, support);
      if (cache) p = (1.0 - w) * p + w * estimate(local, id, k, support);
      // Ids follow lexicographic token order, so the first maximum wins ties.
      if (p > best_p) {
        best_p = p;
        best = id;
      }
    }
    if (best == NgramModel::kUnknown || best == stop) break;
    produced.push_back(model_->token(best));
    seq.push_back(best);
    if (cache) cache->extend(seq);
  }
  return text::join(produced, " ");
}

}  // namespace selfsup::ngram
