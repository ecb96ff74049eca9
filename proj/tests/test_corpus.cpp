// tests/test_corpus.cpp

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.


#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "frameforge/corpus.hpp"

using namespace frameforge;
using Units = std::vector<std::string>;

namespace {

const std::vector<std::string> kTable1{"zwArt@", "dri", "Op", "roj@", "vir"};

std::string record(int ordinal, const std::string &fills,
                   const std::string &type = "movecard") {
  const std::string frame =
      "{\"type\":\"" + type + "\",\"fills\":{" + fills + "}}";
  return "{\"id\":\"u" + std::to_string(ordinal) +
         "\",\"speaker\":\"s1\",\"ordinal\":" + std::to_string(ordinal) +
         ",\"ortho\":\"twee\",\"phon\":[\"twe\"],\"auto_frame\":" + frame +
         ",\"oracle_frame\":" + frame + "}\n";
}

// `kinds` holds one letter per utterance: m(ovecard) or d(ealcard).
Corpus corpus_of(const std::string &kinds) {
  std::string text;
  for (std::size_t i = 0; i < kinds.size(); ++i)
    text += kinds[i] == 'm' ? record(int(i), "\"FV\":[\"2\"]")
                            : record(int(i), "", "dealcard");
  std::istringstream in(text);
  return read_corpus(in);
}

}  // namespace

TEST_CASE("word unigrams keep the words") {
  CHECK(segment(kTable1, Granularity::kWordUnigram).units == kTable1);
}

TEST_CASE("word bigrams add boundary units") {
  const Units expected{"+_zwArt@", "zwArt@_dri", "dri_Op",
                       "Op_roj@",  "roj@_vir",   "vir_+"};
  CHECK(segment(kTable1, Granularity::kWordBigram).units == expected);
}

TEST_CASE("phoneme bigrams ignore word boundaries") {
  const auto units = segment(kTable1, Granularity::kPhonemeBigram).units;
  REQUIRE(units.size() == 19);
  CHECK(units.front() == "+z");
  CHECK(units[1] == "zw");
  CHECK(units[2] == "wA");
  CHECK(units[18] == "r+");
  CHECK(units[17] == "ir");
  // "t@" then "@d": the word boundary between zwArt@ and dri is not marked.
  CHECK(units[6] == "@d");
}

TEST_CASE("phoneme unigrams split characters") {
  const Units dri{"dri"};
  CHECK(segment(dri, Granularity::kPhonemeUnigram).units == Units{"d", "r", "i"});
  CHECK_THROWS_AS(segment(Units{}, Granularity::kWordUnigram), ValidationError);
}

TEST_CASE("bigram unit counts") {
  const Units words{"twe", "Op", "dri"};
  CHECK(segment(words, Granularity::kWordBigram).units.size() == words.size() + 1);
  CHECK(segment(words, Granularity::kPhonemeBigram).units.size() == 8 + 1);
}

TEST_CASE("granularity names round trip") {
  for (auto g : {Granularity::kWordUnigram, Granularity::kWordBigram,
                 Granularity::kPhonemeUnigram, Granularity::kPhonemeBigram})
    CHECK(granularity_from_string(to_string(g)) == g);
  CHECK_THROWS(granularity_from_string("syllable"));
}

TEST_CASE("corpus ingestion") {
  std::istringstream in(record(3, "\"FS\":[\"h\"]") + record(1, "\"FV\":[\"2\"]") +
                        "\n" + record(2, "", "dealcard"));
  const auto corpus = read_corpus(in);
  REQUIRE(corpus.size() == 3);
  const auto &e = corpus.speaker("s1");
  CHECK(e[0].utterance.ordinal == 1);
  CHECK(e[1].automatic_frame.type == "dealcard");
  CHECK(e[2].automatic_frame.fills.at("FS") == std::set<std::string>{"h"});

  std::ostringstream out;
  write_corpus(out, corpus);
  std::istringstream again(out.str());
  const auto back = read_corpus(again);
  CHECK(back.speaker("s1").size() == 3);
  CHECK(back.speaker("s1")[2].oracle_frame == e[2].oracle_frame);
}

TEST_CASE("corpus errors name the line and slot") {
  auto message = [](const std::string &text) {
    std::istringstream in(text);
    try {
      read_corpus(in);
    } catch (const ValidationError &e) {
      return std::string(e.what());
    }
    return std::string();
  };
  const auto bad_value = message(record(1, "\"FV\":[\"2\"]") + record(2, "\"FS\":[\"x\"]"));
  CHECK(bad_value.find("line 2") != std::string::npos);
  CHECK(bad_value.find("FS") != std::string::npos);
  CHECK(message("{not json\n").find("line 1") != std::string::npos);
  CHECK(message(record(1, "") + record(1, "")).find("duplicate") != std::string::npos);
}

TEST_CASE("split: 70 utterances before the test boundary") {
  const auto corpus = corpus_of(std::string(70, 'm') + std::string(20, 'm'));
  const auto split = split_experiment(corpus, "s1");
  CHECK(split.partitions.size() == 2);
  CHECK(split.partitions[0].size() == 25);
  CHECK(split.dropped.size() == 20);
  CHECK(split.test.size() == 20);
  CHECK(split.training_prefix(2).size() == 50);
  CHECK(split.training_prefix(5).size() == 50);
}

TEST_CASE("split: exactly the test set") {
  const auto split = split_experiment(corpus_of(std::string(20, 'm')), "s1");
  CHECK(split.partitions.empty());
  CHECK(split.dropped.empty());
  CHECK(split.test.size() == 20);
  CHECK_THROWS_AS(split_experiment(corpus_of(std::string(19, 'm')), "s1"),
                  ValidationError);
  CHECK_THROWS(split_experiment(corpus_of(std::string(20, 'm')), "nobody"));
}

TEST_CASE("split: surrounding dealcard utterances join the test set") {
  // 30 training movecards with 2 dealcards among them, then 20 test
  // movecards with dealcards interleaved and trailing.
  std::string kinds = std::string(15, 'm') + "dd" + std::string(15, 'm');
  kinds += "d" + std::string(10, 'm') + "dd" + std::string(10, 'm') + "d";
  const auto corpus = corpus_of(kinds);
  const auto split = split_experiment(corpus, "s1");
  // The test set starts at the 20th-from-last movecard: 20 movecards plus the
  // 3 dealcards after it; the dealcard right before it stays in training.
  CHECK(split.test.size() == 23);
  CHECK(split.test.front().automatic_frame.type == "movecard");
  CHECK(split.partitions.size() == 1);
  CHECK(split.dropped.size() == 33 - 25);

  // Partitions, dropped remainder and test set concatenate to the original.
  std::vector<std::int64_t> all;
  for (const auto &p : split.partitions)
    for (const auto &e : p) all.push_back(e.utterance.ordinal);
  for (const auto &e : split.dropped) all.push_back(e.utterance.ordinal);
  for (const auto &e : split.test) all.push_back(e.utterance.ordinal);
  REQUIRE(all.size() == kinds.size());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == std::int64_t(i));
}
