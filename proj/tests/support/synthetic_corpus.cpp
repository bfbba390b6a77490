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


#include "synthetic_corpus.hpp"

#include <array>
#include <atomic>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <nlohmann/json.hpp>

namespace selfsup::testing {
namespace {

constexpr std::array<const char*, 24> kAdjectives = {
    "quiet", "old",   "red",    "small",  "bright", "heavy", "young",  "cold",
    "green", "tired", "famous", "narrow", "wooden", "busy",  "gentle", "broken",
    "empty", "proud", "silver", "rough",  "warm",   "dark",  "clever", "strange"};

constexpr std::array<const char*, 48> kNouns = {
    "farmer",  "teacher", "river",   "market",  "basket", "village", "bridge", "window",
    "letter",  "garden",  "captain", "engine",  "forest", "museum",  "doctor", "station",
    "harbor",  "lantern", "painter", "road",    "school", "tower",   "wagon",  "valley",
    "kitchen", "soldier", "library", "island",  "mirror", "blanket", "sailor", "chapel",
    "meadow",  "baker",   "council", "factory", "fence",  "horse",   "ladder", "castle",
    "singer",  "orchard", "parcel",  "student", "tunnel", "ship",    "clock",  "hill"};

constexpr std::array<const char*, 24> kVerbs = {
    "carried", "found",    "visited", "painted", "repaired", "opened",  "described", "built",
    "watched", "followed", "cleaned", "moved",   "sold",     "covered", "measured",  "noticed",
    "guarded", "crossed",  "lifted",  "shared",  "studied",  "marked",  "reached",   "counted"};

constexpr std::array<const char*, 16> kNames = {
    "Anna",  "Tomas", "Mira",  "Jonas", "Elena", "Pavel", "Irene",  "Oskar",
    "Sofia", "Lukas", "Clara", "Felix", "Marta", "Hugo",  "Greta",  "Nils"};

constexpr std::array<const char*, 12> kPrepositions = {
    "into", "under", "near", "beside", "behind", "across",
    "along", "toward", "past", "around", "over", "through"};

constexpr std::array<const char*, 8> kTimes = {"dawn",     "noon",      "the storm", "the harvest",
                                               "the fair", "midnight", "the winter", "the meeting"};

template <std::size_t N>
const char* pick(const std::array<const char*, N>& a, Rng& rng) {
  return a[rng.uniform(N)];
}

std::string noun_phrase(Rng& rng) {
  switch (rng.uniform(3)) {
    case 0:
      return std::string("the ") + pick(kNouns, rng);
    case 1:
      return std::string("a ") + pick(kAdjectives, rng) + " " + pick(kNouns, rng);
    default:
      return std::string("the ") + pick(kAdjectives, rng) + " " + pick(kNouns, rng);
  }
}

std::string ending(Rng& rng) {
  switch (rng.uniform(6)) {
    case 0:
    case 1:
    case 2:
      return std::string(pick(kPrepositions, rng)) + " " + noun_phrase(rng);
    case 3:
      return std::string(rng.bernoulli(0.5) ? "before " : "after ") + pick(kTimes, rng);
    case 4:
      return "with " + noun_phrase(rng);
    default:
      return std::string("for ") + pick(kNames, rng);
  }
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

}  // namespace

std::string synthetic_sentence(Rng& rng) {
  std::string subject =
      rng.bernoulli(0.3) ? std::string(pick(kNames, rng)) : capitalize(noun_phrase(rng));
  std::string s = subject + " " + pick(kVerbs, rng) + " " + noun_phrase(rng);
  if (rng.bernoulli(0.25)) s += std::string(" and then ") + pick(kVerbs, rng) + " " + noun_phrase(rng);
  s += " " + ending(rng) + ".";
  return s;
}

std::vector<pipeline::CorpusInput> write_synthetic_corpus(const std::filesystem::path& dir,
                                                          const SyntheticCorpusOptions& opts) {
  std::filesystem::create_directories(dir);
  Rng rng(opts.seed);
  const std::size_t per_domain = opts.target_bytes / opts.domains.size();
  std::vector<pipeline::CorpusInput> inputs;
  for (const auto& domain : opts.domains) {
    const auto path = dir / (domain + ".jsonl");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    std::size_t bytes = 0;
    std::size_t doc = 0;
    while (bytes < per_domain) {
      const std::size_t n = rng.uniform_between(opts.min_sentences, opts.max_sentences);
      std::string text;
      for (std::size_t i = 0; i < n; ++i) {
        if (i) text += ' ';
        if (rng.bernoulli(opts.short_sentence_prob)) {
          text += std::string(pick(kNames, rng)) + " waited.";
        } else {
          text += synthetic_sentence(rng);
        }
      }
      const nlohmann::json rec = {{"id", domain + "-" + std::to_string(doc++)}, {"text", text}};
      const auto line = rec.dump();
      out << line << '\n';
      bytes += text.size() + 1;
    }
    inputs.push_back({path, domain});
  }
  return inputs;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("selfsup-" + tag + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace selfsup::testing
