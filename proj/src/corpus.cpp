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

#include "selfsup/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

#include "selfsup/error.hpp"
#include "selfsup/rng.hpp"
#include "selfsup/text.hpp"

namespace selfsup::corpus {

namespace {

// UTF-8 curly quotes.
constexpr std::string_view kRightDouble = "\xE2\x80\x9D";
constexpr std::string_view kRightSingle = "\xE2\x80\x99";
constexpr std::string_view kLeftDouble = "\xE2\x80\x9C";
constexpr std::string_view kLeftSingle = "\xE2\x80\x98";

std::string_view strip_closers(std::string_view w) {
  for (;;) {
    if (w.empty()) return w;
    const char c = w.back();
    if (c == '"' || c == '\'' || c == ')' || c == ']' || c == '}') {
      w.remove_suffix(1);
    } else if (w.ends_with(kRightDouble) || w.ends_with(kRightSingle)) {
      w.remove_suffix(3);
    } else {
      return w;
    }
  }
}

std::string_view strip_openers(std::string_view w) {
  for (;;) {
    if (w.empty()) return w;
    const char c = w.front();
    if (c == '"' || c == '\'' || c == '(' || c == '[' || c == '{') {
      w.remove_prefix(1);
    } else if (w.starts_with(kLeftDouble) || w.starts_with(kLeftSingle)) {
      w.remove_prefix(3);
    } else {
      return w;
    }
  }
}

bool ends_sentence(std::string_view word) {
  const auto core = strip_closers(word);
  if (core.empty()) return false;
  const char c = core.back();
  return c == '.' || c == '!' || c == '?';
}

bool starts_sentence(std::string_view word) {
  if (word.empty()) return false;
  const char c = word.front();
  if ((c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')) return true;
  if (c == '"' || c == '\'' || c == '(' || c == '[') return true;
  return word.starts_with(kLeftDouble) || word.starts_with(kLeftSingle);
}

}  // namespace

std::string SentenceWindow::text() const {
  std::string out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (i) out += ' ';
    out += sentences[i].text;
  }
  return out;
}

std::size_t SentenceWindow::word_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : sentences) n += s.word_count;
  return n;
}

void CorpusSampleConfig::validate() const {
  if (min_window_sentences < 3) {
    fail(ErrorKind::kConfig, "min_window_sentences must be >= 3, got " +
                                 std::to_string(min_window_sentences));
  }
  if (min_sentence_words < 1) {
    fail(ErrorKind::kConfig, "min_sentence_words must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Segmentation

const std::set<std::string, std::less<>>& RuleSegmenter::default_abbreviations() {
  static const std::set<std::string, std::less<>> kAbbreviations = {
      "Dr",  "Mr",   "Mrs",  "Ms",  "Prof", "Sr",  "Jr",  "St",  "Mt",
      "vs",  "etc",  "e.g",  "i.e", "Inc",  "Ltd", "Co",  "Corp", "No",
      "Gen", "Col",  "Lt",   "Sgt", "Capt", "Rep", "Sen", "Gov", "Rev",
      "Fig", "Jan",  "Feb",  "Mar", "Apr",  "Jun", "Jul", "Aug", "Sep",
      "Sept", "Oct", "Nov",  "Dec", "U.S",  "U.K", "a.m", "p.m", "approx",
  };
  return kAbbreviations;
}

RuleSegmenter::RuleSegmenter() : abbreviations_(default_abbreviations()) {}

RuleSegmenter::RuleSegmenter(std::set<std::string, std::less<>> abbreviations)
    : abbreviations_(std::move(abbreviations)) {}

bool RuleSegmenter::is_abbreviation(std::string_view word) const {
  auto core = strip_openers(strip_closers(word));
  if (!core.ends_with('.')) return false;
  core.remove_suffix(1);
  // Single-letter initials such as "J." in "J. Smith".
  if (core.size() == 1 && core[0] >= 'A' && core[0] <= 'Z') return true;
  return abbreviations_.contains(core);
}

std::vector<std::string> RuleSegmenter::split(std::string_view text) const {
  const auto words = text::split_words(text);
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!current.empty()) current += ' ';
    current += words[i];
    const bool last = i + 1 == words.size();
    if (last || (ends_sentence(words[i]) && starts_sentence(words[i + 1]) &&
                 !is_abbreviation(words[i]))) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  return out;
}

const Segmenter& default_segmenter() {
  static const RuleSegmenter kDefault;
  return kDefault;
}

std::vector<Sentence> segment(std::string_view text,
                              const Segmenter& segmenter) {
  std::vector<Sentence> out;
  for (auto& piece : segmenter.split(text)) {
    const auto trimmed = text::trim(piece);
    if (trimmed.empty()) continue;
    Sentence s;
    s.text = std::string(trimmed);
    s.index = out.size();
    s.word_count = text::count_words(s.text);
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ingestion

namespace {

InputFormat resolve_format(const std::filesystem::path& path,
                           InputFormat format) {
  if (format != InputFormat::kAuto) return format;
  const auto ext = text::to_lower_ascii(path.extension().string());
  if (ext == ".jsonl" || ext == ".ndjson") return InputFormat::kJsonLines;
  return InputFormat::kPlainText;
}

std::string doc_id(std::string_view domain, const std::filesystem::path& path,
                   std::size_t ordinal) {
  std::string id(domain);
  id += '/';
  id += path.filename().string();
  id += '#';
  id += std::to_string(ordinal);
  return id;
}

}  // namespace

IngestStats ingest(const std::filesystem::path& path, std::string_view domain,
                   const std::function<void(Document&&)>& sink,
                   InputFormat format, const Segmenter& segmenter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open corpus file: " + path.string());

  IngestStats stats;
  auto emit = [&](std::string_view body, std::size_t ordinal,
                  std::string_view where) {
    Document doc;
    doc.id = doc_id(domain, path, ordinal);
    doc.domain = std::string(domain);
    doc.sentences = segment(body, segmenter);
    if (doc.sentences.empty()) {
      ++stats.skipped_empty;
      stats.warnings.push_back("empty document skipped: " + std::string(where));
      return;
    }
    ++stats.documents;
    sink(std::move(doc));
  };

  if (resolve_format(path, format) == InputFormat::kPlainText) {
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) fail(ErrorKind::kIo, "read failed: " + path.string());
    emit(buf.str(), 0, path.string());
    return stats;
  }

  std::string line;
  std::size_t line_no = 0;
  std::size_t ordinal = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::kParse, where + ": malformed record: " + e.what());
    }
    if (!rec.is_object() || !rec.contains("text") || !rec["text"].is_string()) {
      fail(ErrorKind::kParse, where + ": record needs a string \"text\" field");
    }
    if (rec.contains("id") && !rec["id"].is_string()) {
      fail(ErrorKind::kParse, where + ": \"id\" must be a string");
    }
    emit(rec["text"].get_ref<const std::string&>(), ordinal++, where);
  }
  if (in.bad()) fail(ErrorKind::kIo, "read failed: " + path.string());
  if (line_no == 0) {
    stats.warnings.push_back("empty file: " + path.string());
  }
  return stats;
}

std::vector<Document> ingest_all(const std::filesystem::path& path,
                                 std::string_view domain, IngestStats* stats,
                                 InputFormat format) {
  std::vector<Document> docs;
  auto s = ingest(
      path, domain, [&](Document&& d) { docs.push_back(std::move(d)); },
      format);
  if (stats) *stats = std::move(s);
  return docs;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

bool entry_less(std::uint64_t pa, std::size_t aa, std::uint64_t pb,
                std::size_t ab) {
  return pa != pb ? pa < pb : aa < ab;
}

}  // namespace

DocumentSampler::DocumentSampler(const CorpusSampleConfig& cfg)
    : seed_(derive_seed(cfg.seed, "corpus/sample")) {
  cfg.validate();
  for (const auto& [domain, count] : cfg.docs_per_domain) {
    reservoirs_[domain].capacity = count;
  }
}

void DocumentSampler::add(Document doc) {
  auto it = reservoirs_.find(doc.domain);
  if (it == reservoirs_.end()) {
    fail(ErrorKind::kConfig, "no sample size configured for domain '" +
                                 doc.domain + "' (document " + doc.id + ")");
  }
  auto& res = it->second;
  const std::size_t arrival = arrivals_++;
  if (res.capacity == 0) return;
  const std::uint64_t priority = derive_seed(seed_, doc.id);
  auto cmp = [](const Entry& a, const Entry& b) {
    return entry_less(a.priority, a.arrival, b.priority, b.arrival);
  };
  if (res.heap.size() < res.capacity) {
    res.heap.push_back(Entry{priority, arrival, std::move(doc)});
    std::push_heap(res.heap.begin(), res.heap.end(), cmp);
    return;
  }
  const Entry& top = res.heap.front();
  if (!entry_less(priority, arrival, top.priority, top.arrival)) return;
  std::pop_heap(res.heap.begin(), res.heap.end(), cmp);
  res.heap.back() = Entry{priority, arrival, std::move(doc)};
  std::push_heap(res.heap.begin(), res.heap.end(), cmp);
}

std::vector<Document> DocumentSampler::finish() && {
  std::vector<Document> out;
  for (auto& [domain, res] : reservoirs_) {
    std::sort(res.heap.begin(), res.heap.end(),
              [](const Entry& a, const Entry& b) { return a.arrival < b.arrival; });
    for (auto& e : res.heap) out.push_back(std::move(e.doc));
  }
  return out;
}

std::vector<Document> sample_documents(std::span<const Document> docs,
                                       const CorpusSampleConfig& cfg) {
  DocumentSampler sampler(cfg);
  for (const auto& d : docs) sampler.add(d);
  return std::move(sampler).finish();
}

// ---------------------------------------------------------------------------
// Windows

std::vector<SentenceWindow> windows(const Document& doc,
                                    const CorpusSampleConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.min_window_sentences;
  const auto& sents = doc.sentences;
  std::vector<SentenceWindow> out;
  std::size_t i = 0;
  while (i + n <= sents.size()) {
    std::size_t bad = n;  // offset of the last too-short sentence
    for (std::size_t j = 0; j < n; ++j) {
      if (sents[i + j].word_count < cfg.min_sentence_words) bad = j;
    }
    if (bad != n) {
      i += bad + 1;
      continue;
    }
    SentenceWindow w;
    w.doc_id = doc.id;
    w.domain = doc.domain;
    w.start = sents[i].index;
    w.sentences.assign(sents.begin() + static_cast<std::ptrdiff_t>(i),
                       sents.begin() + static_cast<std::ptrdiff_t>(i + n));
    out.push_back(std::move(w));
    i += n;
  }
  return out;
}

}  // namespace selfsup::corpus
