// tests/test_synthetic.cpp

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


#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <doctest.h>

#include "frameforge/corpus.hpp"
#include "frameforge/synthetic.hpp"

using namespace frameforge;

namespace {

std::string dump(const Corpus &c) {
  std::ostringstream out;
  write_corpus(out, c);
  return out.str();
}

}  // namespace

TEST_CASE("generation is deterministic and validates n") {
  const auto &s = patience_schema();
  const auto &g = patience_grammar();
  CHECK_THROWS_AS(generate_synthetic(s, g, 0, 7), ValidationError);
  CHECK(dump(generate_synthetic(s, g, 1, 7)) == dump(generate_synthetic(s, g, 1, 7)));
  CHECK(dump(generate_synthetic(s, g, 50, 7)) != dump(generate_synthetic(s, g, 50, 8)));
}

TEST_CASE("generated corpus passes ingestion") {
  const auto corpus = generate_synthetic(patience_schema(), patience_grammar(), 120, 3);
  std::istringstream in(dump(corpus));
  const auto back = read_corpus(in);
  CHECK(back.size() == 120);
  CHECK(dump(back) == dump(corpus));
}

TEST_CASE("automatic frames cover the oracle frames") {
  const auto corpus = generate_synthetic(patience_schema(), patience_grammar(), 300, 11);
  for (const auto &e : corpus.speakers.begin()->second) {
    CHECK(e.automatic_frame.type == e.oracle_frame.type);
    for (const auto &[slot, values] : e.oracle_frame.fills) {
      REQUIRE(e.automatic_frame.fills.count(slot) == 1);
      const auto &v = *e.automatic_frame.fills.at(slot).begin();
      CHECK(values.count(v) == 1);
    }
    if (e.automatic_frame.type == "movecard")
      CHECK(e.automatic_frame.filled_slots() >= e.oracle_frame.filled_slots());
  }
}

TEST_CASE("unknown template slots are rejected") {
  auto g = patience_grammar();
  g.templates.push_back({"movecard", 1.0, "{XX} op {TV}", "any", "card", {}});
  CHECK_THROWS_AS(generate_synthetic(patience_schema(), g, 5, 1), ValidationError);
}

TEST_CASE("oracle slot mentions follow the template weights") {
  // Multinomial oracle: a slot is mentioned with the summed weight of the
  // templates naming it; frame types likewise.
  const auto &g = patience_grammar();
  double total = 0;
  std::map<std::string, double> slot_p, type_p;
  for (const auto &t : g.templates) total += t.weight;
  for (const auto &t : g.templates) {
    type_p[t.frame_type] += t.weight / total;
    for (const auto &slot : template_slots(t)) slot_p[slot] += t.weight / total;
  }

  const int n = 200;
  const auto corpus = generate_synthetic(patience_schema(), g, n, 5);
  std::map<std::string, int> slot_n, type_n;
  for (const auto &e : corpus.speakers.begin()->second) {
    ++type_n[e.oracle_frame.type];
    for (const auto &[slot, _] : e.oracle_frame.fills) ++slot_n[slot];
  }
  auto within = [n](int observed, double p) {
    const double sigma = std::sqrt(n * p * (1 - p));
    return std::abs(observed - n * p) <= 3 * sigma + 1e-9;
  };
  for (const auto &[slot, p] : slot_p) {
    INFO("slot " << slot);
    CHECK(within(slot_n[slot], p));
  }
  for (const auto &[slot, count] : slot_n) CHECK(slot_p.count(slot) == 1);
  for (const auto &[type, p] : type_p) {
    INFO("type " << type);
    CHECK(within(type_n[type], p));
  }
}

TEST_CASE("grammar json round trip") {
  const auto &g = patience_grammar();
  const auto back = TemplateGrammar::from_json(g.to_json());
  CHECK(back.to_json() == g.to_json());
  CHECK(dump(generate_synthetic(patience_schema(), back, 40, 2)) ==
        dump(generate_synthetic(patience_schema(), g, 40, 2)));
}
