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
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Corpus ingestion: raw files -> Documents -> sampled Documents ->
// consecutive-sentence windows consumed by the task constructors.
namespace selfsup::corpus {

struct Sentence {
  std::string text;
  std::size_t index = 0;       // position within the document
  std::size_t word_count = 0;  // whitespace-delimited tokens, >= 1
};

struct Document {
  std::string id;  // "<domain>/<file>#<ordinal>"
  std::string domain;
  std::vector<Sentence> sentences;  // non-empty, in document order
};

/// A run of consecutive sentences taken from one document.
struct SentenceWindow {
  std::string doc_id;
  std::string domain;
  std::size_t start = 0;
  std::vector<Sentence> sentences;

  std::size_t size() const noexcept { return sentences.size(); }
  /// Sentences joined by single spaces.
  std::string text() const;
  std::size_t word_count() const noexcept;
};

struct CorpusSampleConfig {
  static constexpr std::size_t kDefaultDocsPerDomain = 100'000;
  /// Long-document domains (e.g. stories) are sampled ten times more sparsely.
  static constexpr std::size_t kLongDocumentDocs = 10'000;

  std::map<std::string, std::size_t> docs_per_domain;
  std::uint64_t seed = 0;
  std::size_t min_sentence_words = 4;
  std::size_t min_window_sentences = 3;

  /// Throws Error(kConfig) when min_window_sentences < 3 or
  /// min_sentence_words < 1.
  void validate() const;
};

/// Splits normalized text into sentence strings. Implementations must be
/// deterministic and return non-empty, trimmed pieces.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::vector<std::string> split(std::string_view text) const = 0;
};

/// Rule-based splitter: a boundary follows a word ending in . ! or ?
/// (optionally followed by closing quotes or brackets) when the next word
/// starts with an uppercase ASCII letter, a digit, or an opening quote, and
/// the word is not on the abbreviation stop-list or a single-letter initial.
class RuleSegmenter final : public Segmenter {
 public:
  RuleSegmenter();
  explicit RuleSegmenter(std::set<std::string, std::less<>> abbreviations);

  std::vector<std::string> split(std::string_view text) const override;

  static const std::set<std::string, std::less<>>& default_abbreviations();

 private:
  bool is_abbreviation(std::string_view word) const;

  std::set<std::string, std::less<>> abbreviations_;
};

const Segmenter& default_segmenter();

std::vector<Sentence> segment(std::string_view text,
                              const Segmenter& segmenter = default_segmenter());

enum class InputFormat { kAuto, kPlainText, kJsonLines };

struct IngestStats {
  std::size_t documents = 0;
  std::size_t skipped_empty = 0;
  std::vector<std::string> warnings;
};

/// Streams Documents from one file into `sink`. Plain text files hold a
/// single document; JSON-lines files hold {"id": string, "text": string}
/// records, one per line. kAuto picks JSON lines for .jsonl/.ndjson.
IngestStats ingest(const std::filesystem::path& path, std::string_view domain,
                   const std::function<void(Document&&)>& sink,
                   InputFormat format = InputFormat::kAuto,
                   const Segmenter& segmenter = default_segmenter());

std::vector<Document> ingest_all(const std::filesystem::path& path,
                                 std::string_view domain,
                                 IngestStats* stats = nullptr,
                                 InputFormat format = InputFormat::kAuto);

/// Streaming per-domain sampler. Each document gets a priority derived from
/// (seed, doc id); the k smallest priorities per domain are kept. The result
/// is a uniform sample without replacement that does not depend on arrival
/// order or on how documents are split across workers.
class DocumentSampler {
 public:
  explicit DocumentSampler(const CorpusSampleConfig& cfg);

  /// Throws Error(kConfig) when the document's domain has no configured count.
  void add(Document doc);

  /// Domains in lexicographic order; within a domain, arrival order.
  std::vector<Document> finish() &&;

 private:
  struct Entry {
    std::uint64_t priority;
    std::size_t arrival;
    Document doc;
  };
  struct Reservoir {
    std::size_t capacity = 0;
    std::vector<Entry> heap;  // max-heap on (priority, arrival)
  };

  std::uint64_t seed_;
  std::map<std::string, Reservoir, std::less<>> reservoirs_;
  std::size_t arrivals_ = 0;
};

std::vector<Document> sample_documents(std::span<const Document> docs,
                                       const CorpusSampleConfig& cfg);

/// Greedy non-overlapping tiling into windows of exactly
/// cfg.min_window_sentences sentences. A window containing a sentence with
/// fewer than cfg.min_sentence_words words is discarded and tiling restarts
/// after the offending sentence.
std::vector<SentenceWindow> windows(const Document& doc,
                                    const CorpusSampleConfig& cfg);

}  // namespace selfsup::corpus
