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
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "selfsup/rng.hpp"

// Downstream prompt templates.
//
// A pattern is plain text with ${Name} placeholders. The marker ${|} splits
// it into the conditioning prefix and the scored segment; "\n" in the
// template file stands for a newline. Classification templates bind one
// placeholder (the answer slot) to each candidate in turn; that slot may
// only appear after the marker, so every candidate shares the prefix.
namespace selfsup::templates {

enum class Style { kOurs, kGpt3 };

std::string_view style_name(Style s) noexcept;
/// Accepts "OURS"/"ours" and "GPT3"/"gpt3".
std::optional<Style> parse_style(std::string_view name);

inline constexpr std::string_view kSplitMarker = "${|}";

struct TaskTemplate {
  std::string name;  // section name in the template file
  std::string task;  // benchmark task, e.g. "boolq"
  Style style = Style::kOurs;
  std::string pattern;
  std::string answer;                   // answer-slot placeholder
  std::vector<std::string> candidates;  // "@field" reads the record
  std::map<std::string, std::string> label_aliases;  // gold alias -> candidate
  std::vector<std::string> metrics;

  bool generative() const { return candidates.empty(); }
  /// Placeholder names in pattern order, without duplicates.
  std::vector<std::string> placeholders() const;
};

using Fields = std::map<std::string, std::string, std::less<>>;

struct Rendered {
  std::string prefix;
  std::string scored;
  std::string text() const { return prefix + scored; }
};

/// Substitutes every placeholder. Throws Error(kRender) naming the first
/// unbound placeholder.
Rendered render(const Fields& fields, const TaskTemplate& tpl);

/// Templates loaded from an INI-style file; see data/superglue_templates.ini
/// for the format.
class TemplateSet {
 public:
  static TemplateSet load(const std::filesystem::path& path);
  /// Throws Error(kParse) on malformed input and Error(kConfig) on invalid
  /// templates.
  static TemplateSet parse(std::string_view ini, std::string_view source = "<string>");
  /// Bundled SuperGLUE templates.
  static const TemplateSet& builtin();

  const TaskTemplate& get(std::string_view task, Style style) const;
  const TaskTemplate* find(std::string_view task, Style style) const;
  const std::vector<TaskTemplate>& all() const { return templates_; }

 private:
  std::vector<TaskTemplate> templates_;
};

/// One benchmark record: string fields bound to placeholders, plus the gold
/// label and an optional group key (MultiRC question).
struct Record {
  std::string id;
  Fields fields;
  nlohmann::json label;  // null for unlabeled records
  std::string group;
};

/// String members become fields; "label", "idx" and "group" are reserved.
Record record_from_json(const nlohmann::json& j);
/// Line-delimited records. Throws Error(kIo) / Error(kParse) with the line.
std::vector<Record> load_records(const std::filesystem::path& path);

/// Candidate strings with "@field" references resolved.
std::vector<std::string> resolve_candidates(const TaskTemplate& tpl, const Fields& fields);

/// Gold candidate index. Accepts an index, a candidate string (or alias,
/// compared case-insensitively), or a boolean (true selects the first
/// candidate). Throws Error(kData) when the label cannot be mapped.
std::size_t gold_index(const TaskTemplate& tpl, const Record& rec,
                       std::span<const std::string> candidates);

struct RenderedExample {
  std::string prefix;
  std::vector<std::string> choices;  // scored segment per candidate
  std::optional<std::size_t> gold;
  std::optional<std::string> reference;  // generative templates

  /// The example as a demonstration: prefix plus gold (or reference).
  std::string demo_text() const;
};

RenderedExample render_example(const Record& rec, const TaskTemplate& tpl);

struct EvalItem {
  std::string id;
  std::string task;
  std::string prompt_prefix;
  std::vector<std::string> candidates;
  std::optional<std::string> reference;
  std::optional<std::size_t> gold;
  std::string group;
  std::size_t shots = 0;
  std::vector<std::size_t> demo_ids;  // indices into the demonstration pool
};

nlohmann::json to_json(const EvalItem& item);
EvalItem eval_item_from_json(const nlohmann::json& j);

/// Draws `shots` demonstrations uniformly without replacement, skipping
/// index `exclude` when set, and prepends them to the test prefix, one per
/// line. Throws Error(kConfig) when the pool is too small.
EvalItem assemble_prompt(std::span<const std::string> demos, const RenderedExample& test,
                         std::size_t shots, Rng& rng,
                         std::optional<std::size_t> exclude = std::nullopt);

}  // namespace selfsup::templates
