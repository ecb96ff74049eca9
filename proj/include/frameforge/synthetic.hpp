// include/frameforge/synthetic.hpp

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

// Template-driven generator of (command, automatic frame, oracle frame)
// corpora. Template text is a space separated token list:
//
//   word        literal word (must have a pronunciation)
//   [word]      optional literal, kept with probability 1/2
//   {SLOT}      expression of SLOT's value through the slot's class
//   {SLOT:cls}  expression through an explicit class (e.g. colours for suits)
//
// The oracle frame holds exactly the slots that a placeholder expresses; its
// value set is every value of the class sharing the chosen surface phrase.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "frameforge/corpus.hpp"
#include "frameforge/schema.hpp"

namespace frameforge {

struct CommandTemplate {
  std::string frame_type;
  double weight = 1.0;
  std::string text;
  // Patience move constraints: source in {any, column, hand, foundation},
  // target in {card, column, foundation}.
  std::string source = "any";
  std::string target = "card";
  std::map<std::string, std::string> fixed;  // slot -> value
};

/// Replaces one phrase of a class value by another from a corpus position on.
struct SynonymShift {
  std::string cls;
  std::string value;
  std::string before;
  std::string after;
  double at = 0.5;  // fraction of the generated sequence
};

struct TemplateGrammar {
  std::map<std::string, std::string> pronunciations;  // word -> phonemes
  // class -> value -> surface phrases (space separated words)
  std::map<std::string, std::map<std::string, std::vector<std::string>>>
      expressions;
  std::map<std::string, std::string> slot_classes;  // slot -> class
  std::vector<CommandTemplate> templates;
  std::vector<SynonymShift> shifts;
  std::vector<std::string> interjections;
  double interjection_rate = 0.0;
  std::string move_model = "patience";  // or "uniform"
  std::string speaker = "synthetic";

  nlohmann::json to_json() const;
  static TemplateGrammar from_json(const nlohmann::json &j);
};

/// Dutch Patience commands with colour ambiguity, optional determiners,
/// interjections and a koning -> heer synonym shift.
const TemplateGrammar &patience_grammar();

/// Throws ValidationError for n < 1 or templates that reference unknown
/// slots, classes or words. Deterministic in `seed`.
Corpus generate_synthetic(const FrameSchema &schema,
                          const TemplateGrammar &grammar, int n,
                          std::uint64_t seed);

/// Slots a template mentions (the oracle fills it produces).
std::vector<std::string> template_slots(const CommandTemplate &t);

}  // namespace frameforge
