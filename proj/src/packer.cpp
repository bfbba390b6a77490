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

#include "selfsup/packer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_map>

#include "selfsup/error.hpp"
#include "selfsup/text.hpp"

namespace selfsup::packer {

using nlohmann::json;
using taskgen::Example;

// ---------------------------------------------------------------------------
// Counters

std::size_t WhitespaceCounter::count(std::string_view text) const {
  return text::count_words(text);
}

namespace {

std::vector<std::string> utf8_chars(std::string_view word) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < word.size();) {
    std::size_t len = 1;
    const auto c = static_cast<unsigned char>(word[i]);
    if (c >= 0xF0) {
      len = 4;
    } else if (c >= 0xE0) {
      len = 3;
    } else if (c >= 0xC0) {
      len = 2;
    }
    len = std::min(len, word.size() - i);
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

BpeCounter::BpeCounter(const std::filesystem::path& merges) {
  std::ifstream in(merges);
  if (!in) fail(ErrorKind::kIo, "cannot open BPE merges file: " + merges.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.starts_with('#')) continue;
    const auto parts = text::split_words(line);
    if (parts.size() != 2) {
      fail(ErrorKind::kParse, merges.string() + ":" + std::to_string(line_no) +
                                  ": expected two symbols");
    }
    ranks_.emplace(std::make_pair(std::string(parts[0]), std::string(parts[1])),
                   ranks_.size());
  }
}

BpeCounter::BpeCounter(std::vector<std::pair<std::string, std::string>> merges) {
  for (auto& m : merges) ranks_.emplace(std::move(m), ranks_.size());
}

std::size_t BpeCounter::count_word(std::string_view word) const {
  auto symbols = utf8_chars(word);
  for (;;) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    std::size_t best = 0;
    for (std::size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = ranks_.find({symbols[i], symbols[i + 1]});
      if (it != ranks_.end() && it->second < best_rank) {
        best_rank = it->second;
        best = i;
      }
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const std::string left = symbols[best];
    const std::string right = symbols[best + 1];
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == left && symbols[i + 1] == right) {
        merged.push_back(left + right);
        i += 2;
      } else {
        merged.push_back(std::move(symbols[i]));
        ++i;
      }
    }
    symbols = std::move(merged);
  }
  return symbols.size();
}

std::size_t BpeCounter::count(std::string_view text) const {
  std::size_t n = 0;
  for (auto w : text::split_words(text)) n += count_word(w);
  return n;
}

std::shared_ptr<const TokenCounter> make_counter(std::string_view spec) {
  if (spec == "whitespace") return std::make_shared<WhitespaceCounter>();
  if (spec == "bytes") return std::make_shared<ByteCounter>();
  if (spec.starts_with("bpe:")) {
    return std::make_shared<BpeCounter>(std::filesystem::path(spec.substr(4)));
  }
  fail(ErrorKind::kConfig, "unknown token counter: " + std::string(spec));
}

void TokenBudget::validate() const {
  if (max_tokens < 8) {
    fail(ErrorKind::kConfig,
         "max_tokens must be >= 8, got " + std::to_string(max_tokens));
  }
  if (!counter) fail(ErrorKind::kConfig, "token budget has no counter");
}

// ---------------------------------------------------------------------------
// Serialization

json to_json(const Instance& inst) {
  json spans = json::array();
  for (const auto& s : inst.spans) spans.push_back({s.start, s.end});
  return json{{"task", taskgen::task_name(inst.task)},
              {"domain", inst.domain},
              {"text", inst.text},
              {"loss_spans", std::move(spans)},
              {"example_count", inst.example_count},
              {"seed_trace", inst.seed_trace}};
}

Instance instance_from_json(const json& j) {
  if (!j.is_object() || !j.contains("task") || !j.contains("text") ||
      !j.contains("loss_spans")) {
    fail(ErrorKind::kParse, "instance record needs task, text and loss_spans");
  }
  Instance inst;
  const auto task = taskgen::parse_task(j.at("task").get<std::string>());
  if (!task) fail(ErrorKind::kParse, "unknown task in instance record");
  inst.task = *task;
  inst.text = j.at("text").get<std::string>();
  if (j.contains("domain")) inst.domain = j.at("domain").get<std::string>();
  for (const auto& s : j.at("loss_spans")) {
    inst.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  }
  inst.example_count = j.value("example_count", inst.spans.size());
  if (j.contains("seed_trace")) {
    inst.seed_trace = j.at("seed_trace").get<std::vector<std::uint64_t>>();
  }
  return inst;
}

std::string span_text(std::string_view text, Span span) {
  std::size_t scalar = 0;
  std::size_t begin = text.size();
  std::size_t end = text.size();
  for (std::size_t i = 0; i <= text.size(); ++i) {
    const bool boundary =
        i == text.size() || (static_cast<unsigned char>(text[i]) & 0xC0) != 0x80;
    if (!boundary) continue;
    if (scalar == span.start) begin = std::min(begin, i);
    if (scalar == span.end) {
      end = i;
      break;
    }
    ++scalar;
  }
  if (begin > end) return {};
  return std::string(text.substr(begin, end - begin));
}

std::vector<PackedExample> unpack(const Instance& inst) {
  std::vector<std::size_t> offsets;  // byte offset of each scalar, plus end
  for (std::size_t i = 0; i < inst.text.size(); ++i) {
    if ((static_cast<unsigned char>(inst.text[i]) & 0xC0) != 0x80) offsets.push_back(i);
  }
  offsets.push_back(inst.text.size());

  std::vector<PackedExample> out;
  std::size_t begin = 0;
  for (const auto& s : inst.spans) {
    if (s.start > s.end || s.end >= offsets.size()) {
      fail(ErrorKind::kData, "loss span out of range");
    }
    const std::size_t a = offsets[s.start];
    const std::size_t b = offsets[s.end];
    if (a < begin) fail(ErrorKind::kData, "loss spans overlap or are out of order");
    out.push_back({inst.text.substr(begin, a - begin), inst.text.substr(a, b - a)});
    begin = b + 1;  // skip the separating newline
  }
  return out;
}

// ---------------------------------------------------------------------------
// Packing

namespace {

struct Unit {
  std::vector<std::size_t> members;  // indices into the example span
};

struct Bucket {
  std::string key;
  std::vector<Unit> units;
};

// Buckets in key order; units in first-appearance order.
std::vector<Bucket> make_buckets(std::span<const Example> examples) {
  std::map<std::string, Bucket> buckets;
  std::map<std::string, std::pair<std::string, std::size_t>> group_slot;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& e = examples[i];
    const std::string key = taskgen::label_bucket(e);
    auto& bucket = buckets[key];
    bucket.key = key;
    if (e.task == taskgen::Task::kCl && e.meta.contains("group")) {
      const auto group = e.meta.at("group").get<std::string>();
      auto it = group_slot.find(group);
      if (it != group_slot.end()) {
        if (it->second.first != key) {
          fail(ErrorKind::kData, "CL group " + group + " spans several type sets");
        }
        bucket.units[it->second.second].members.push_back(i);
        continue;
      }
      group_slot.emplace(group, std::make_pair(key, bucket.units.size()));
    }
    bucket.units.push_back(Unit{{i}});
  }
  std::vector<Bucket> out;
  for (auto& [key, b] : buckets) out.push_back(std::move(b));
  return out;
}

struct RenderedUnit {
  std::vector<Example> examples;
  std::vector<std::string> rendered;
  std::size_t tokens = 0;
};

class InstanceBuilder {
 public:
  InstanceBuilder(taskgen::Task task, const TokenBudget& budget)
      : task_(task), budget_(&budget) {}

  bool empty() const { return count_ == 0; }
  std::size_t tokens() const { return tokens_; }

  std::size_t tokens_with(const RenderedUnit& u) const {
    return empty() ? u.tokens : tokens_ + budget_->counter->separator_cost() + u.tokens;
  }

  void append(const RenderedUnit& u) {
    tokens_ = tokens_with(u);
    for (std::size_t i = 0; i < u.examples.size(); ++i) {
      const auto& e = u.examples[i];
      if (count_ > 0) {
        text_ += '\n';
        ++chars_;
      }
      const std::size_t out_start =
          chars_ + text::utf8_length(taskgen::kInputMarker) + 1 +
          text::utf8_length(e.input_text) + 1 +
          text::utf8_length(taskgen::kOutputMarker) + 1;
      const std::size_t out_end = out_start + text::utf8_length(e.output_text);
      spans_.push_back({out_start, out_end});
      text_ += u.rendered[i];
      chars_ += text::utf8_length(u.rendered[i]);
      ++count_;
      const auto dom = e.meta.value("domain", std::string{});
      if (count_ == 1) {
        domain_ = dom;
      } else if (domain_ != dom) {
        domain_.clear();
      }
    }
  }

  Instance finish(std::vector<std::uint64_t> trace) {
    Instance inst;
    inst.task = task_;
    inst.domain = std::move(domain_);
    inst.text = std::move(text_);
    inst.spans = std::move(spans_);
    inst.example_count = count_;
    inst.tokens = tokens_;
    inst.seed_trace = std::move(trace);
    *this = InstanceBuilder(task_, *budget_);
    return inst;
  }

 private:
  taskgen::Task task_;
  const TokenBudget* budget_;
  std::string text_;
  std::string domain_;
  std::vector<Span> spans_;
  std::size_t count_ = 0;
  std::size_t chars_ = 0;
  std::size_t tokens_ = 0;
};

RenderedUnit render_unit(std::span<const Example> examples, const Unit& unit,
                         const taskgen::LabelAssignment* labels,
                         const TokenBudget& budget) {
  RenderedUnit r;
  const std::size_t sep = budget.counter->separator_cost();
  for (std::size_t idx : unit.members) {
    Example e = examples[idx];
    if (labels) taskgen::apply_label_assignment(e, *labels);
    r.rendered.push_back(e.render());
    if (r.examples.size() > 0) r.tokens += sep;
    r.tokens += budget.counter->count(r.rendered.back());
    r.examples.push_back(std::move(e));
  }
  return r;
}

std::string join_rendered(const RenderedUnit& u) {
  return text::join(u.rendered, "\n");
}

}  // namespace

PackResult pack(std::span<const Example> examples, const TokenBudget& budget,
                Rng& rng) {
  budget.validate();
  PackResult result;
  if (examples.empty()) return result;
  const taskgen::Task task = examples.front().task;
  for (const auto& e : examples) {
    if (e.task != task) {
      fail(ErrorKind::kData, "pack: mixed tasks " +
                                 std::string(taskgen::task_name(task)) + " and " +
                                 std::string(taskgen::task_name(e.task)));
    }
  }
  const bool labelled = taskgen::uses_label_map(task);

  for (auto& bucket : make_buckets(examples)) {
    const std::uint64_t bucket_seed = rng.next();
    Rng brng(bucket_seed);
    brng.shuffle(bucket.units);

    InstanceBuilder builder(task, budget);
    taskgen::LabelAssignment labels;
    std::uint64_t ordinal = 0;

    auto open = [&](const Unit& unit) {
      if (labelled) {
        labels = taskgen::draw_label_assignment(examples[unit.members.front()], brng);
      }
      auto r = render_unit(examples, unit, labelled ? &labels : nullptr, budget);
      if (r.tokens > budget.max_tokens) {
        result.dropped += unit.members.size();
        result.warnings.push_back(
            "dropped unit of " + std::to_string(r.tokens) +
            " tokens (budget " + std::to_string(budget.max_tokens) + ")");
        return;
      }
      builder.append(r);
    };

    for (const auto& unit : bucket.units) {
      if (builder.empty()) {
        open(unit);
        continue;
      }
      auto r = render_unit(examples, unit, labelled ? &labels : nullptr, budget);
      if (builder.tokens_with(r) <= budget.max_tokens) {
        builder.append(r);
        continue;
      }
      PackDecision d;
      d.instance = result.instances.size();
      d.reason = StopReason::kOverflow;
      d.instance_tokens = builder.tokens();
      d.candidate_tokens = r.tokens;
      d.candidate = join_rendered(r);
      result.log.push_back(std::move(d));
      result.instances.push_back(builder.finish({bucket_seed, ordinal++}));
      open(unit);
    }
    if (!builder.empty()) {
      PackDecision d;
      d.instance = result.instances.size();
      d.reason = StopReason::kExhausted;
      d.instance_tokens = builder.tokens();
      result.log.push_back(std::move(d));
      result.instances.push_back(builder.finish({bucket_seed, ordinal++}));
    }
  }
  return result;
}

bool replay_overflows(const Instance& inst, const PackDecision& decision,
                      const TokenCounter& counter, std::size_t max_tokens) {
  if (decision.reason != StopReason::kOverflow) return false;
  const std::size_t total = counter.count(inst.text) + counter.separator_cost() +
                            counter.count(decision.candidate);
  return total > max_tokens;
}

std::vector<Instance> subsample(std::span<const Instance> instances,
                                double ratio, Rng& rng) {
  if (!(ratio > 0.0)) {
    fail(ErrorKind::kConfig, "data ratio must be > 0, got " + std::to_string(ratio));
  }
  const std::size_t n = instances.size();
  const auto target =
      static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  std::vector<Instance> out;
  out.reserve(target);
  if (target <= n) {
    for (auto i : rng.sample_indices(n, target)) out.push_back(instances[i]);
    return out;
  }
  out.assign(instances.begin(), instances.end());
  for (std::size_t i = n; i < target; ++i) out.push_back(instances[rng.uniform(n)]);
  rng.shuffle(out);
  return out;
}

}  // namespace selfsup::packer
