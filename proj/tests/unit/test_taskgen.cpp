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

#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "selfsup/error.hpp"
#include "selfsup/taskgen.hpp"
#include "selfsup/text.hpp"
#include "synthetic_corpus.hpp"

namespace selfsup::taskgen {
namespace {

using corpus::Sentence;
using corpus::SentenceWindow;

SentenceWindow make_window(const std::string& doc, std::size_t start,
                           const std::vector<std::string>& sentences) {
  SentenceWindow w;
  w.doc_id = doc;
  w.domain = "news";
  w.start = start;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    w.sentences.push_back(
        Sentence{sentences[i], start + i, text::count_words(sentences[i])});
  }
  return w;
}

SentenceWindow random_window(Rng& rng, const std::string& doc, std::size_t n) {
  std::vector<std::string> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(testing::synthetic_sentence(rng));
  return make_window(doc, rng.uniform(50), s);
}

const SentenceWindow kWindow = make_window(
    "news/a#0", 4,
    {"The farmer carried a basket.", "It was heavy and old.",
     "She walked to the market in spring."});

TEST(Names, RoundTrip) {
  for (auto t : kAllTasks) EXPECT_EQ(parse_task(task_name(t)), t);
  EXPECT_EQ(task_name(Task::kLppCls), "LPP_CLS");
  EXPECT_FALSE(parse_task("nope"));
  EXPECT_EQ(parse_cl_type("MULTI_DOC"), ClInputType::kMultiDoc);
}

TEST(Example, RenderAndJson) {
  Example e{Task::kNsg, "a b", "c", {{"k", 1}}};
  EXPECT_EQ(e.render(), "Input: a b\nOutput: c");
  const auto back = example_from_json(to_json(e));
  EXPECT_EQ(back.task, e.task);
  EXPECT_EQ(back.input_text, "a b");
  EXPECT_EQ(back.output_text, "c");
  EXPECT_EQ(back.meta, e.meta);
  EXPECT_THROW(example_from_json(nlohmann::json{{"task", "XX"}}), Error);
}

TEST(Nsg, LastSentenceIsOutput) {
  Rng rng(1);
  const auto e = build_nsg(kWindow, rng);
  EXPECT_EQ(e.input_text, "The farmer carried a basket. It was heavy and old.");
  EXPECT_EQ(e.output_text, "She walked to the market in spring.");
  EXPECT_EQ(e.meta["start"], 4);
  auto short_w = kWindow;
  short_w.sentences.pop_back();
  EXPECT_THROW(build_nsg(short_w, rng), Error);
}

TEST(MaskWords, ReplacesSelectedPositions) {
  const std::vector<std::string> words = {"a", "b", "c", "d"};
  const std::vector<std::size_t> pos = {0, 2};
  const auto m = mask_words(words, pos, "___");
  EXPECT_EQ(m.input, "___ b ___ d");
  EXPECT_EQ(m.output, "a c");
  const std::vector<std::size_t> unsorted = {2, 0};
  EXPECT_THROW(mask_words(words, unsorted, "___"), Error);
}

TEST(Mwp, PropertyMaskCountMatchesOutput) {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const auto w = random_window(rng, "d", 3);
    const auto e = build_mwp(w, rng);
    const std::string symbol = e.meta["symbol"];
    const auto in_words = text::split_words(e.input_text);
    const auto masks = std::count(in_words.begin(), in_words.end(), symbol);
    const auto words = text::count_words(w.text());
    ASSERT_GE(masks, 1);
    ASSERT_LE(masks, 20);
    ASSERT_LE(static_cast<std::size_t>(masks), std::max<std::size_t>(1, words / 2));
    ASSERT_EQ(static_cast<std::size_t>(masks), text::count_words(e.output_text));
    ASSERT_EQ(in_words.size(), words);
  }
}

TEST(Mwp, AvoidsSymbolsAlreadyInText) {
  Rng rng(2);
  auto w = make_window("d", 0, {"a ___ b c d.", "e f @@@ g.", "h i j k."});
  for (int i = 0; i < 200; ++i) {
    const auto e = build_mwp(w, rng);
    EXPECT_NE(e.meta["symbol"], "___");
    EXPECT_NE(e.meta["symbol"], "@@@");
  }
}

TEST(LastPhrase, FindsLastFunctionWordInSecondHalf) {
  const auto& t = FunctionWordTable::standard();
  EXPECT_EQ(t.size(), 50u);
  const auto lp = extract_last_phrase("She walked to the market in spring.", t);
  ASSERT_TRUE(lp);
  EXPECT_EQ(lp->function_word, "in");
  EXPECT_EQ(lp->prefix, "She walked to the market");
  EXPECT_EQ(lp->phrase, "in spring");
  EXPECT_EQ(lp->position, 5u);
  // "The" at position 0 only: not in the second half.
  EXPECT_FALSE(extract_last_phrase("The cat sat quietly.", t));
  EXPECT_FALSE(extract_last_phrase("Nothing here matches.", t));
  // The last table word wins even when an earlier one starts the phrase.
  const auto store = extract_last_phrase("He went to the store.", t);
  ASSERT_TRUE(store);
  EXPECT_EQ(store->prefix, "He went to");
  EXPECT_EQ(store->phrase, "the store");
}

TEST(LppGen, QuestionShape) {
  Rng rng(1);
  const auto e = build_lpp_gen(kWindow, FunctionWordTable::standard(), rng);
  ASSERT_TRUE(e);
  EXPECT_EQ(e->input_text,
            "The farmer carried a basket. It was heavy and old. Question: She walked to the "
            "market ?");
  EXPECT_EQ(e->output_text, "in spring");
}

TEST(LppCls, NegativeSharesFunctionWord) {
  const auto& table = FunctionWordTable::standard();
  PhraseBank bank;
  bank.add("in", "in spring");
  bank.add("in", "in the rain");
  bank.add("on", "on the hill");
  Rng rng(3);
  int positives = 0;
  for (int i = 0; i < 400; ++i) {
    const auto e = build_lpp_cls(kWindow, table, bank, rng);
    ASSERT_TRUE(e);
    const int cls = e->meta["label_class"];
    const std::string answer = e->meta["answer"];
    const auto labels = e->meta["labels"];
    EXPECT_EQ(e->output_text, labels[cls].get<std::string>());
    EXPECT_EQ(answer, cls == 0 ? "in spring" : "in the rain");
    EXPECT_TRUE(e->input_text.ends_with(" Answer: " + answer));
    positives += cls == 0;
  }
  EXPECT_GT(positives, 150);
  EXPECT_LT(positives, 250);

  PhraseBank lonely;
  lonely.add("in", "in spring");
  EXPECT_FALSE(build_lpp_cls(kWindow, table, lonely, rng));
}

TEST(PhraseBank, HarvestsByFunctionWord) {
  PhraseBank bank;
  bank.harvest(std::vector<SentenceWindow>{kWindow}, FunctionWordTable::standard());
  ASSERT_EQ(bank.phrases("in").size(), 1u);
  EXPECT_EQ(bank.phrases("in")[0], "in spring");
  EXPECT_TRUE(bank.phrases("zzz").empty());
}

TEST(Cl, GroupStructure) {
  Rng rng(4);
  std::vector<SentenceWindow> pool;
  for (int d = 0; d < 5; ++d) pool.push_back(random_window(rng, "other" + std::to_string(d), 3));
  ForeignWindowSampler foreign(pool);
  for (int i = 0; i < 500; ++i) {
    const auto w = random_window(rng, "self", 3);
    const auto group = build_cl(w, foreign, rng);
    ASSERT_GE(group.size(), 2u);
    ASSERT_LE(group.size(), 3u);
    std::set<std::string> types, outputs;
    for (const auto& e : group) {
      types.insert(e.meta["cl_type"].get<std::string>());
      outputs.insert(e.output_text);
      EXPECT_EQ(e.meta["label_map"][e.meta["cl_type"].get<std::string>()], e.output_text);
      EXPECT_EQ(label_bucket(e), label_bucket(group[0]));
      const auto type = *parse_cl_type(e.meta["cl_type"].get<std::string>());
      if (type == ClInputType::kOriginal) EXPECT_EQ(e.input_text, w.text());
      if (type == ClInputType::kShuffled) {
        std::vector<std::size_t> perm = e.meta["permutation"];
        EXPECT_FALSE(std::is_sorted(perm.begin(), perm.end()));
      }
      if (type == ClInputType::kDifferentDoc || type == ClInputType::kMultiDoc) {
        EXPECT_NE(e.meta["foreign_doc"], "self");
      }
    }
    EXPECT_TRUE(types.contains("ORIGINAL"));
    EXPECT_EQ(types.size(), group.size());
    EXPECT_EQ(outputs.size(), group.size());
  }
}

TEST(Cl, NoForeignWindowIsConstructorError) {
  Rng rng(1);
  ForeignWindowSampler foreign({kWindow});
  bool threw = false;
  for (int i = 0; i < 50 && !threw; ++i) {
    try {
      build_cl(kWindow, foreign, rng);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kConstructor);
      threw = true;
    }
  }
  EXPECT_TRUE(threw);
}

TEST(Dae, OutputIsOriginalAndInputIsCorrupted) {
  Rng rng(8);
  const auto e = build_dae(kWindow, rng, DaeConfig{0.0, 0.0});
  EXPECT_EQ(e.input_text, kWindow.text());
  EXPECT_EQ(e.output_text, kWindow.text());
  const auto d = build_dae(kWindow, rng, DaeConfig{1.0, 0.0});
  EXPECT_EQ(text::count_words(d.input_text), 1u);
  for (int i = 0; i < 100; ++i) {
    const auto x = build_dae(kWindow, rng);
    const std::size_t deleted = x.meta["deleted"];
    EXPECT_EQ(text::count_words(x.input_text) + deleted, text::count_words(kWindow.text()));
  }
}

TEST(Gsg, OneSentenceMasked) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto e = build_gsg(kWindow, rng);
    const std::size_t gap = e.meta["gap"];
    EXPECT_EQ(e.output_text, kWindow.sentences[gap].text);
    EXPECT_TRUE(text::contains(e.input_text, e.meta["symbol"].get<std::string>()));
    EXPECT_FALSE(text::contains(e.input_text, e.output_text));
  }
}

TEST(Corruption, LabelTasksStayInPool) {
  const auto& table = FunctionWordTable::standard();
  PhraseBank bank;
  bank.add("in", "in spring");
  bank.add("in", "in the rain");
  Rng rng(10);
  DonorPool donors;
  const auto e = *build_lpp_cls(kWindow, table, bank, rng);
  for (int i = 0; i < 50; ++i) {
    const auto c = corrupt_labels(e, donors, rng);
    const auto labels = c.meta["labels"];
    EXPECT_EQ(labels[c.meta["label_class"].get<std::size_t>()], c.output_text);
  }
  const auto nsg = build_nsg(kWindow, rng);
  EXPECT_THROW(corrupt_labels(nsg, donors, rng), Error);
  donors.add(Example{Task::kNsg, "x", "donor", {}});
  EXPECT_EQ(corrupt_labels(nsg, donors, rng).output_text, "donor");
}

TEST(LabelAssignment, KeepsClassAndType) {
  const auto& table = FunctionWordTable::standard();
  PhraseBank bank;
  bank.add("in", "in spring");
  bank.add("in", "in the rain");
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    auto e = *build_lpp_cls(kWindow, table, bank, rng);
    const auto cls = e.meta["label_class"].get<std::size_t>();
    const auto a = draw_label_assignment(e, rng);
    apply_label_assignment(e, a);
    EXPECT_EQ(e.output_text, a.labels[cls]);
  }
  std::vector<SentenceWindow> pool = {make_window("o", 0, {"A b c d.", "E f g h.", "I j k l."})};
  ForeignWindowSampler foreign(pool);
  auto group = build_cl(kWindow, foreign, rng);
  const auto a = draw_label_assignment(group[0], rng);
  std::set<std::string> seen;
  for (auto& e : group) {
    apply_label_assignment(e, a);
    EXPECT_EQ(e.output_text, a.type_labels.at(e.meta["cl_type"].get<std::string>()));
    seen.insert(e.output_text);
  }
  EXPECT_EQ(seen.size(), group.size());
}

TEST(LabelPools, Shapes) {
  EXPECT_EQ(binary_label_pools().size(), 4u);
  EXPECT_EQ(ternary_label_pools().size(), 5u);
  for (const auto& p : binary_label_pools()) EXPECT_EQ(p.labels.size(), 2u);
  for (const auto& p : ternary_label_pools()) EXPECT_EQ(p.labels.size(), 3u);
  EXPECT_EQ(binary_label_pools()[0].labels[0], "Yes");
}

}  // namespace
}  // namespace selfsup::taskgen
