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

#include "selfsup/templates.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "selfsup/error.hpp"
#include "selfsup/text.hpp"

namespace selfsup::templates {

extern const char* const kBuiltinTemplates;  // generated from data/

namespace {

using nlohmann::json;

struct Piece {
  bool placeholder = false;
  std::string value;  // literal text or placeholder name
};

std::vector<Piece> tokenize(std::string_view pattern, std::string_view name) {
  std::vector<Piece> out;
  std::string literal;
  for (std::size_t i = 0; i < pattern.size();) {
    if (pattern.compare(i, 2, "${") == 0) {
      const auto close = pattern.find('}', i + 2);
      if (close == std::string_view::npos) {
        fail(ErrorKind::kConfig, "template " + std::string(name) + ": unterminated placeholder");
      }
      const auto ph = pattern.substr(i + 2, close - i - 2);
      if (ph.empty()) {
        fail(ErrorKind::kConfig, "template " + std::string(name) + ": empty placeholder");
      }
      if (!literal.empty()) out.push_back({false, std::move(literal)});
      literal.clear();
      out.push_back({true, std::string(ph)});
      i = close + 1;
    } else {
      literal.push_back(pattern[i++]);
    }
  }
  if (!literal.empty()) out.push_back({false, std::move(literal)});
  return out;
}

std::string unescape(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      if (s[i + 1] == 'n') {
        out.push_back('\n');
        ++i;
        continue;
      }
      if (s[i + 1] == '\\') {
        out.push_back('\\');
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  if (text::trim(s).empty()) return out;
  std::size_t start = 0;
  for (;;) {
    const auto bar = s.find('|', start);
    out.emplace_back(text::trim(s.substr(start, bar - start)));
    if (bar == std::string_view::npos) break;
    start = bar + 1;
  }
  return out;
}

const std::set<std::string, std::less<>>& known_metrics() {
  static const std::set<std::string, std::less<>> kMetrics = {"accuracy", "f1", "f1a",
                                                             "em", "rouge_l"};
  return kMetrics;
}

void validate(const TaskTemplate& t) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::kConfig, "template " + t.name + ": " + what);
  };
  if (t.task.empty()) bad("missing task");
  if (t.answer.empty()) bad("missing answer placeholder");
  const auto pieces = tokenize(t.pattern, t.name);
  std::size_t markers = 0;
  bool answer_before = false;
  bool answer_after = false;
  for (const auto& p : pieces) {
    if (!p.placeholder) continue;
    if (p.value == "|") {
      ++markers;
    } else if (p.value == t.answer) {
      (markers == 0 ? answer_before : answer_after) = true;
    }
  }
  if (markers != 1) bad("pattern needs exactly one ${|} marker");
  if (answer_before) bad("answer placeholder ${" + t.answer + "} precedes ${|}");
  if (!answer_after) bad("answer placeholder ${" + t.answer + "} missing from scored segment");
  if (!t.generative() && t.candidates.size() < 2) bad("needs at least two candidates");
  if (t.metrics.empty()) bad("no metrics");
  for (const auto& m : t.metrics) {
    if (!known_metrics().contains(m)) bad("unknown metric '" + m + "'");
  }
  for (const auto& [alias, target] : t.label_aliases) {
    if (std::find(t.candidates.begin(), t.candidates.end(), target) == t.candidates.end()) {
      bad("label alias '" + alias + "' maps to unknown candidate '" + target + "'");
    }
  }
}

}  // namespace

std::string_view style_name(Style s) noexcept {
  return s == Style::kOurs ? "OURS" : "GPT3";
}

std::optional<Style> parse_style(std::string_view name) {
  const auto lower = text::to_lower_ascii(name);
  if (lower == "ours") return Style::kOurs;
  if (lower == "gpt3") return Style::kGpt3;
  return std::nullopt;
}

std::vector<std::string> TaskTemplate::placeholders() const {
  std::vector<std::string> out;
  for (const auto& p : tokenize(pattern, name)) {
    if (p.placeholder && p.value != "|" &&
        std::find(out.begin(), out.end(), p.value) == out.end()) {
      out.push_back(p.value);
    }
  }
  return out;
}

Rendered render(const Fields& fields, const TaskTemplate& tpl) {
  Rendered out;
  std::string* target = &out.prefix;
  for (const auto& p : tokenize(tpl.pattern, tpl.name)) {
    if (!p.placeholder) {
      *target += p.value;
    } else if (p.value == "|") {
      target = &out.scored;
    } else {
      const auto it = fields.find(p.value);
      if (it == fields.end()) {
        fail(ErrorKind::kRender,
             "template " + tpl.name + ": unbound placeholder ${" + p.value + "}");
      }
      *target += it->second;
    }
  }
  return out;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open template file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

TemplateSet TemplateSet::parse(std::string_view ini, std::string_view source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(ini)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::kParse, std::string(source) + ":" + std::to_string(e.line()) + ": " +
                                e.message());
  }
  TemplateSet set;
  for (const auto& [section, node] : tree) {
    if (node.empty()) {
      fail(ErrorKind::kParse, std::string(source) + ": key '" + section + "' outside a section");
    }
    TaskTemplate t;
    t.name = section;
    auto get = [&](const char* key) {
      const auto v = node.get_optional<std::string>(pt::ptree::path_type(key, '\0'));
      return v ? *v : std::string();
    };
    t.task = get("task");
    const auto style = parse_style(get("style"));
    if (!style) fail(ErrorKind::kConfig, "template " + t.name + ": style must be OURS or GPT3");
    t.style = *style;
    t.pattern = unescape(get("pattern"));
    t.answer = get("answer");
    t.candidates = split_list(get("candidates"));
    for (const auto& entry : split_list(get("labels"))) {
      const auto colon = entry.find(':');
      if (colon == std::string::npos) {
        fail(ErrorKind::kConfig, "template " + t.name + ": label alias needs alias:candidate");
      }
      t.label_aliases.emplace(entry.substr(0, colon), entry.substr(colon + 1));
    }
    t.metrics = split_list(get("metrics"));
    if (t.metrics.empty()) t.metrics = {t.generative() ? "rouge_l" : "accuracy"};
    validate(t);
    if (set.find(t.task, t.style) != nullptr) {
      fail(ErrorKind::kConfig, "duplicate template for " + t.task + "/" +
                                   std::string(style_name(t.style)));
    }
    set.templates_.push_back(std::move(t));
  }
  return set;
}

const TemplateSet& TemplateSet::builtin() {
  static const TemplateSet kSet = parse(kBuiltinTemplates, "builtin templates");
  return kSet;
}

const TaskTemplate* TemplateSet::find(std::string_view task, Style style) const {
  for (const auto& t : templates_) {
    if (t.task == task && t.style == style) return &t;
  }
  return nullptr;
}

const TaskTemplate& TemplateSet::get(std::string_view task, Style style) const {
  const auto* t = find(task, style);
  if (t == nullptr) {
    fail(ErrorKind::kConfig, "no " + std::string(style_name(style)) + " template for task '" +
                                 std::string(task) + "'");
  }
  return *t;
}

Record record_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorKind::kParse, "benchmark record must be an object");
  Record r;
  for (const auto& [key, value] : j.items()) {
    if (key == "label") {
      r.label = value;
    } else if (key == "idx") {
      r.id = value.is_string() ? value.get<std::string>() : value.dump();
    } else if (key == "group") {
      r.group = value.is_string() ? value.get<std::string>() : value.dump();
    } else if (value.is_string()) {
      r.fields.emplace(key, value.get<std::string>());
    }
  }
  return r;
}

std::vector<Record> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, "cannot open benchmark file: " + path.string());
  std::vector<Record> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const Error& e) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (out.back().id.empty()) out.back().id = std::to_string(out.size() - 1);
  }
  return out;
}

std::vector<std::string> resolve_candidates(const TaskTemplate& tpl, const Fields& fields) {
  std::vector<std::string> out;
  out.reserve(tpl.candidates.size());
  for (const auto& c : tpl.candidates) {
    if (c.starts_with('@')) {
      const auto it = fields.find(std::string_view(c).substr(1));
      if (it == fields.end()) {
        fail(ErrorKind::kRender, "template " + tpl.name + ": candidate field '" +
                                     c.substr(1) + "' missing from record");
      }
      out.push_back(it->second);
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::size_t gold_index(const TaskTemplate& tpl, const Record& rec,
                       std::span<const std::string> candidates) {
  const auto& l = rec.label;
  const auto where = "record " + rec.id + ": ";
  if (l.is_boolean()) return l.get<bool>() ? 0 : 1;
  if (l.is_number_integer()) {
    const auto v = l.get<long long>();
    if (v < 0 || static_cast<std::size_t>(v) >= candidates.size()) {
      fail(ErrorKind::kData, where + "label index out of range");
    }
    return static_cast<std::size_t>(v);
  }
  if (l.is_string()) {
    std::string s = l.get<std::string>();
    if (const auto it = tpl.label_aliases.find(s); it != tpl.label_aliases.end()) {
      s = it->second;
    } else {
      const auto lower = text::to_lower_ascii(s);
      for (const auto& [alias, target] : tpl.label_aliases) {
        if (text::to_lower_ascii(alias) == lower) {
          s = target;
          break;
        }
      }
    }
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (candidates[i] == s) return i;
    }
    const auto lower = text::to_lower_ascii(s);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (text::to_lower_ascii(candidates[i]) == lower) return i;
    }
    fail(ErrorKind::kData, where + "label '" + s + "' is not a candidate");
  }
  fail(ErrorKind::kData, where + "missing or unsupported label");
}

std::string RenderedExample::demo_text() const {
  if (reference) return prefix + *reference;
  return prefix + choices.at(gold.value_or(0));
}

RenderedExample render_example(const Record& rec, const TaskTemplate& tpl) {
  RenderedExample out;
  if (tpl.generative()) {
    const auto r = render(rec.fields, tpl);
    out.prefix = r.prefix;
    out.reference = r.scored;
    return out;
  }
  const auto candidates = resolve_candidates(tpl, rec.fields);
  Fields fields = rec.fields;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    fields.insert_or_assign(tpl.answer, candidates[i]);
    auto r = render(fields, tpl);
    if (i == 0) out.prefix = std::move(r.prefix);
    out.choices.push_back(std::move(r.scored));
  }
  if (!rec.label.is_null()) out.gold = gold_index(tpl, rec, candidates);
  return out;
}

json to_json(const EvalItem& item) {
  json j = {{"id", item.id},
            {"task", item.task},
            {"prompt", item.prompt_prefix},
            {"shots", item.shots},
            {"demo_ids", item.demo_ids}};
  if (!item.candidates.empty()) j["candidates"] = item.candidates;
  if (item.reference) j["reference"] = *item.reference;
  if (item.gold) j["gold"] = *item.gold;
  if (!item.group.empty()) j["group"] = item.group;
  return j;
}

EvalItem eval_item_from_json(const json& j) {
  EvalItem item;
  try {
    item.id = j.value("id", std::string());
    item.task = j.value("task", std::string());
    item.prompt_prefix = j.at("prompt").get<std::string>();
    item.shots = j.value("shots", std::size_t{0});
    item.demo_ids = j.value("demo_ids", std::vector<std::size_t>{});
    item.candidates = j.value("candidates", std::vector<std::string>{});
    if (j.contains("reference")) item.reference = j["reference"].get<std::string>();
    if (j.contains("gold")) item.gold = j["gold"].get<std::size_t>();
    item.group = j.value("group", std::string());
  } catch (const json::exception& e) {
    fail(ErrorKind::kParse, std::string("eval item: ") + e.what());
  }
  if (item.candidates.empty() == !item.reference.has_value()) {
    fail(ErrorKind::kParse, "eval item " + item.id + ": needs exactly one of candidates/reference");
  }
  return item;
}

EvalItem assemble_prompt(std::span<const std::string> demos, const RenderedExample& test,
                         std::size_t shots, Rng& rng, std::optional<std::size_t> exclude) {
  const std::size_t available = demos.size() - (exclude && *exclude < demos.size() ? 1 : 0);
  if (shots > available) {
    fail(ErrorKind::kConfig, "requested " + std::to_string(shots) + " demonstrations but only " +
                                 std::to_string(available) + " are available");
  }
  EvalItem item;
  item.shots = shots;
  item.candidates = test.choices;
  item.reference = test.reference;
  item.gold = test.gold;
  for (auto idx : rng.sample_indices(available, shots)) {
    if (exclude && idx >= *exclude) ++idx;
    item.demo_ids.push_back(idx);
    item.prompt_prefix += demos[idx];
    item.prompt_prefix += '\n';
  }
  item.prompt_prefix += test.prefix;
  return item;
}

}  // namespace selfsup::templates
