// src/synthetic.cpp

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

#include "frameforge/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <sstream>

namespace frameforge {

using nlohmann::json;

namespace {

struct Placeholder {
  std::string slot;
  std::string cls;  // empty: slot's default class
};

bool parse_placeholder(const std::string &tok, Placeholder *out) {
  if (tok.size() < 3 || tok.front() != '{' || tok.back() != '}') return false;
  std::string body = tok.substr(1, tok.size() - 2);
  auto colon = body.find(':');
  out->slot = body.substr(0, colon);
  out->cls = colon == std::string::npos ? "" : body.substr(colon + 1);
  return true;
}

std::vector<std::string> tokens_of(const std::string &text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

bool is_red(const std::string &suit) { return suit == "h" || suit == "d"; }

class Generator {
 public:
  Generator(const FrameSchema &schema, const TemplateGrammar &grammar,
            std::uint64_t seed)
      : schema_(schema), grammar_(grammar), rng_(seed) {}

  void validate() const;
  CorpusEntry make(int index, int n);

 private:
  double uniform() { return std::uniform_real_distribution<double>(0, 1)(rng_); }
  int pick(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  template <typename T>
  const T &choose(const std::vector<T> &v) {
    return v[static_cast<std::size_t>(pick(0, static_cast<int>(v.size()) - 1))];
  }

  const CommandTemplate &choose_template();
  Frame patience_move(const CommandTemplate &t);
  Frame uniform_move(const CommandTemplate &t);
  std::vector<std::string> phrases(const std::string &cls,
                                   const std::string &value, double pos) const;
  std::string class_of(const Placeholder &p) const {
    if (!p.cls.empty()) return p.cls;
    auto it = grammar_.slot_classes.find(p.slot);
    return it == grammar_.slot_classes.end() ? "" : it->second;
  }

  const FrameSchema &schema_;
  const TemplateGrammar &grammar_;
  std::mt19937_64 rng_;
};

void Generator::validate() const {
  if (grammar_.templates.empty())
    throw ValidationError("template grammar has no templates");
  for (const auto &t : grammar_.templates) {
    auto ft = schema_.frame_type_index(t.frame_type);
    if (!ft)
      throw ValidationError("template refers to unknown frame type '" +
                            t.frame_type + "'");
    if (!(t.weight >= 0)) throw ValidationError("negative template weight");
    for (const auto &tok : tokens_of(t.text)) {
      Placeholder p;
      if (parse_placeholder(tok, &p)) {
        if (!schema_.slot_index(*ft, p.slot))
          throw ValidationError("template '" + t.text +
                                "' references unknown slot '" + p.slot + "'");
        auto cls = class_of(p);
        if (!grammar_.expressions.count(cls))
          throw ValidationError("slot '" + p.slot +
                                "' has no expression class '" + cls + "'");
        continue;
      }
      std::string word = tok;
      if (word.size() > 2 && word.front() == '[' && word.back() == ']')
        word = word.substr(1, word.size() - 2);
      if (!grammar_.pronunciations.count(word))
        throw ValidationError("word '" + word + "' has no pronunciation");
    }
    for (const auto &[slot, value] : t.fixed) {
      auto si = schema_.slot_index(*ft, slot);
      if (!si || !schema_.value_index(*ft, *si, value))
        throw ValidationError("template fixes illegal value " + slot + "=" +
                              value);
    }
  }
  for (const auto &[cls, values] : grammar_.expressions)
    for (const auto &[value, list] : values)
      for (const auto &phrase : list)
        for (const auto &w : tokens_of(phrase))
          if (!grammar_.pronunciations.count(w))
            throw ValidationError("word '" + w + "' has no pronunciation");
  for (const auto &w : grammar_.interjections)
    if (!grammar_.pronunciations.count(w))
      throw ValidationError("word '" + w + "' has no pronunciation");
  if (grammar_.move_model == "patience") {
    auto ft = schema_.frame_type_index("movecard");
    if (!ft) throw ValidationError("patience move model needs 'movecard'");
    for (const char *s : {"FS", "FV", "FF", "FC", "FH", "TS", "TV", "TF", "TC"})
      if (!schema_.slot_index(*ft, s))
        throw ValidationError(std::string("patience move model needs slot ") +
                              s);
  } else if (grammar_.move_model != "uniform") {
    throw ValidationError("unknown move model '" + grammar_.move_model + "'");
  }
}

const CommandTemplate &Generator::choose_template() {
  double total = 0;
  for (const auto &t : grammar_.templates) total += t.weight;
  double r = uniform() * total;
  for (const auto &t : grammar_.templates) {
    if (r < t.weight) return t;
    r -= t.weight;
  }
  return grammar_.templates.back();
}

Frame Generator::patience_move(const CommandTemplate &t) {
  Frame f{t.frame_type, {}};
  auto set = [&f](const std::string &slot, const std::string &v) {
    f.fills[slot] = {v};
  };
  std::string source = t.source;
  std::string target = t.target;
  for (const auto &tok : tokens_of(t.text)) {
    Placeholder p;
    if (!parse_placeholder(tok, &p)) continue;
    if (p.slot == "FC") source = "column";
    if (p.slot == "FH") source = "hand";
    if (p.slot == "FF") source = "foundation";
    if (p.slot == "TF") target = "foundation";
  }
  if (source == "any") {
    double r = uniform();
    source = r < 0.65 ? "column" : r < 0.95 ? "hand" : "foundation";
  }

  static const std::vector<std::string> suits{"h", "d", "s", "c"};
  std::string suit = choose(suits);
  int value = target == "card" ? pick(1, 12) : pick(1, 13);
  if (auto it = t.fixed.find("FV"); it != t.fixed.end())
    value = std::stoi(it->second);
  set("FS", suit);
  set("FV", std::to_string(value));

  int from_column = 0;
  if (source == "column") {
    from_column = pick(1, 7);
    set("FC", std::to_string(from_column));
  } else if (source == "hand") {
    set("FH", "1");
  } else {
    set("FF", std::to_string(pick(1, 4)));
  }
  auto other_column = [&] {
    int c = pick(1, 6);
    return from_column != 0 && c >= from_column ? c + 1 : c;
  };
  if (target == "card") {
    std::vector<std::string> opposite;
    for (const auto &s : suits)
      if (is_red(s) != is_red(suit)) opposite.push_back(s);
    set("TS", choose(opposite));
    set("TV", std::to_string(std::min(value + 1, 13)));
    set("TC", std::to_string(other_column()));
  } else if (target == "foundation") {
    set("TF", std::to_string(pick(1, 4)));
    if (value > 1) {
      set("TS", suit);
      set("TV", std::to_string(value - 1));
    }
  } else {
    set("TC", std::to_string(other_column()));
  }
  for (const auto &[slot, v] : t.fixed) set(slot, v);
  return f;
}

Frame Generator::uniform_move(const CommandTemplate &t) {
  Frame f{t.frame_type, {}};
  int ft = *schema_.frame_type_index(t.frame_type);
  for (const auto &tok : tokens_of(t.text)) {
    Placeholder p;
    if (!parse_placeholder(tok, &p)) continue;
    const auto &values = schema_.slot(ft, *schema_.slot_index(ft, p.slot)).values;
    if (!f.fills.count(p.slot)) f.fills[p.slot] = {choose(values)};
  }
  for (const auto &[slot, v] : t.fixed) f.fills[slot] = {v};
  return f;
}

std::vector<std::string> Generator::phrases(const std::string &cls,
                                            const std::string &value,
                                            double pos) const {
  const auto &by_value = grammar_.expressions.at(cls);
  auto it = by_value.find(value);
  std::vector<std::string> out =
      it == by_value.end() ? std::vector<std::string>{} : it->second;
  for (const auto &shift : grammar_.shifts) {
    if (shift.cls != cls || shift.value != value) continue;
    const auto &drop = pos < shift.at ? shift.after : shift.before;
    out.erase(std::remove(out.begin(), out.end(), drop), out.end());
  }
  return out;
}

CorpusEntry Generator::make(int index, int n) {
  const auto &t = choose_template();
  int ft = *schema_.frame_type_index(t.frame_type);
  Frame automatic = schema_.frame_type(ft).slots.empty()
                        ? Frame{t.frame_type, {}}
                        : grammar_.move_model == "patience" ? patience_move(t)
                                                            : uniform_move(t);
  Frame oracle{t.frame_type, {}};
  const double pos = n > 1 ? static_cast<double>(index) / n : 0.0;

  std::vector<std::string> words;
  for (const auto &tok : tokens_of(t.text)) {
    Placeholder p;
    if (parse_placeholder(tok, &p)) {
      auto filled = automatic.fills.find(p.slot);
      if (filled == automatic.fills.end())
        throw ValidationError("template '" + t.text + "' mentions slot '" +
                              p.slot + "' that its move does not fill");
      const std::string &value = *filled->second.begin();
      const std::string cls = class_of(p);
      auto options = phrases(cls, value, pos);
      if (options.empty())
        throw ValidationError("class '" + cls + "' cannot express value '" +
                              value + "'");
      const std::string phrase = choose(options);
      int si = *schema_.slot_index(ft, p.slot);
      auto &oracle_values = oracle.fills[p.slot];
      for (const auto &[v, _] : grammar_.expressions.at(cls)) {
        auto alts = phrases(cls, v, pos);
        if (std::find(alts.begin(), alts.end(), phrase) != alts.end() &&
            schema_.value_index(ft, si, v))
          oracle_values.insert(v);
      }
      for (const auto &w : tokens_of(phrase)) words.push_back(w);
      continue;
    }
    if (tok.size() > 2 && tok.front() == '[' && tok.back() == ']') {
      if (uniform() < 0.5) words.push_back(tok.substr(1, tok.size() - 2));
      continue;
    }
    words.push_back(tok);
  }
  if (!grammar_.interjections.empty() && uniform() < grammar_.interjection_rate) {
    auto at = static_cast<std::size_t>(pick(0, static_cast<int>(words.size())));
    words.insert(words.begin() + static_cast<std::ptrdiff_t>(at),
                 choose(grammar_.interjections));
  }

  CorpusEntry e;
  char id[64];
  std::snprintf(id, sizeof id, "%s-%05d", grammar_.speaker.c_str(), index + 1);
  e.utterance.id = id;
  e.utterance.speaker = grammar_.speaker;
  e.utterance.ordinal = index + 1;
  e.utterance.orthographic = words;
  for (const auto &w : words)
    e.utterance.phonemic.push_back(grammar_.pronunciations.at(w));
  e.automatic_frame = std::move(automatic);
  e.oracle_frame = std::move(oracle);
  return e;
}

}  // namespace

std::vector<std::string> template_slots(const CommandTemplate &t) {
  std::vector<std::string> out;
  for (const auto &tok : tokens_of(t.text)) {
    Placeholder p;
    if (parse_placeholder(tok, &p) &&
        std::find(out.begin(), out.end(), p.slot) == out.end())
      out.push_back(p.slot);
  }
  return out;
}

Corpus generate_synthetic(const FrameSchema &schema,
                          const TemplateGrammar &grammar, int n,
                          std::uint64_t seed) {
  if (n < 1) throw ValidationError("synthetic corpus size must be >= 1");
  Generator gen(schema, grammar, seed);
  gen.validate();
  Corpus corpus;
  auto &entries = corpus.speakers[grammar.speaker];
  for (int i = 0; i < n; ++i) entries.push_back(gen.make(i, n));
  return corpus;
}

// ---------------------------------------------------------------------------

json TemplateGrammar::to_json() const {
  json templates_j = json::array();
  for (const auto &t : templates)
    templates_j.push_back({{"frame_type", t.frame_type},
                           {"weight", t.weight},
                           {"text", t.text},
                           {"source", t.source},
                           {"target", t.target},
                           {"fixed", t.fixed}});
  json shifts_j = json::array();
  for (const auto &s : shifts)
    shifts_j.push_back({{"class", s.cls},
                        {"value", s.value},
                        {"before", s.before},
                        {"after", s.after},
                        {"at", s.at}});
  return {{"pronunciations", pronunciations},
          {"expressions", expressions},
          {"slot_classes", slot_classes},
          {"templates", templates_j},
          {"shifts", shifts_j},
          {"interjections", interjections},
          {"interjection_rate", interjection_rate},
          {"move_model", move_model},
          {"speaker", speaker}};
}

TemplateGrammar TemplateGrammar::from_json(const json &j) {
  try {
    TemplateGrammar g;
    g.pronunciations =
        j.at("pronunciations").get<std::map<std::string, std::string>>();
    g.expressions = j.at("expressions")
                        .get<std::map<std::string,
                                      std::map<std::string,
                                               std::vector<std::string>>>>();
    g.slot_classes =
        j.value("slot_classes", std::map<std::string, std::string>{});
    for (const auto &jt : j.at("templates")) {
      CommandTemplate t;
      t.frame_type = jt.at("frame_type").get<std::string>();
      t.weight = jt.value("weight", 1.0);
      t.text = jt.value("text", "");
      t.source = jt.value("source", "any");
      t.target = jt.value("target", "card");
      t.fixed = jt.value("fixed", std::map<std::string, std::string>{});
      g.templates.push_back(std::move(t));
    }
    for (const auto &js : j.value("shifts", json::array()))
      g.shifts.push_back({js.at("class").get<std::string>(),
                          js.at("value").get<std::string>(),
                          js.at("before").get<std::string>(),
                          js.at("after").get<std::string>(),
                          js.value("at", 0.5)});
    g.interjections =
        j.value("interjections", std::vector<std::string>{});
    g.interjection_rate = j.value("interjection_rate", 0.0);
    g.move_model = j.value("move_model", "patience");
    g.speaker = j.value("speaker", "synthetic");
    return g;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("malformed template grammar: ") +
                          e.what());
  }
}

const TemplateGrammar &patience_grammar() {
  static const TemplateGrammar grammar = [] {
    TemplateGrammar g;
    g.pronunciations = {
        {"harten", "hArt@"},  {"ruiten", "r9yt@"},  {"schoppen", "sXOp@"},
        {"klaveren", "klav@r@"}, {"rode", "rod@"},  {"rooie", "roj@"},
        {"zwarte", "zwArt@"}, {"aas", "as"},        {"twee", "twe"},
        {"drie", "dri"},      {"vier", "vir"},      {"vijf", "vEif"},
        {"zes", "zEs"},       {"zeven", "zev@"},    {"acht", "Axt"},
        {"negen", "nex@"},    {"tien", "tin"},      {"boer", "bur"},
        {"vrouw", "vrMw"},    {"koning", "konIN"},  {"heer", "her"},
        {"een", "en"},        {"op", "Op"},         {"de", "d@"},
        {"leg", "lEx"},       {"naar", "nar"},      {"boven", "bov@"},
        {"kolom", "kolOm"},   {"stapel", "stap@l"}, {"hand", "hAnt"},
        {"uit", "9yt"},       {"van", "vAn"},       {"nieuwe", "niw@"},
        {"kaarten", "kart@"}, {"omdraaien", "Omdraj@"},
        {"volgende", "vOlG@nd@"}, {"uh", "@"},      {"ja", "ja"},
        {"nee", "ne"},
    };
    g.expressions["suit"] = {{"h", {"harten"}},
                             {"d", {"ruiten"}},
                             {"s", {"schoppen"}},
                             {"c", {"klaveren"}}};
    g.expressions["colour"] = {{"h", {"rode", "rooie"}},
                               {"d", {"rode", "rooie"}},
                               {"s", {"zwarte"}},
                               {"c", {"zwarte"}}};
    g.expressions["value"] = {
        {"1", {"aas"}},   {"2", {"twee"}},   {"3", {"drie"}},
        {"4", {"vier"}},  {"5", {"vijf"}},   {"6", {"zes"}},
        {"7", {"zeven"}}, {"8", {"acht"}},   {"9", {"negen"}},
        {"10", {"tien"}}, {"11", {"boer"}},  {"12", {"vrouw"}},
        {"13", {"koning", "heer"}}};
    g.expressions["number"] = {{"1", {"een"}},  {"2", {"twee"}},
                               {"3", {"drie"}}, {"4", {"vier"}},
                               {"5", {"vijf"}}, {"6", {"zes"}},
                               {"7", {"zeven"}}};
    g.expressions["hand"] = {{"1", {"hand"}}};
    g.slot_classes = {{"FS", "suit"},   {"TS", "suit"},   {"FV", "value"},
                      {"TV", "value"},  {"FF", "number"}, {"TF", "number"},
                      {"FC", "number"}, {"TC", "number"}, {"FH", "hand"}};
    g.templates = {
        {"movecard", 4.0, "{FS} {FV} op {TS} {TV}", "any", "card", {}},
        {"movecard", 3.0, "[de] {FV} op [de] {TV}", "any", "card", {}},
        {"movecard", 2.0, "[leg] [de] {FS} {FV} op [de] {TS:colour} {TV}",
         "any", "card", {}},
        {"movecard", 1.0, "{FV} {FS} op {TV} {TS}", "any", "card", {}},
        {"movecard", 1.5, "{FS} {FV} naar boven", "any", "foundation", {}},
        {"movecard", 1.0, "{FV} naar boven", "any", "foundation",
         {{"FV", "1"}}},
        {"movecard", 1.0, "kolom {FC} naar kolom {TC}", "column", "card", {}},
        {"movecard", 1.0, "{FS} {FV} uit de {FH} op {TS} {TV}", "hand", "card",
         {}},
        {"movecard", 0.7, "{FV} naar kolom {TC}", "any", "column",
         {{"FV", "13"}}},
        {"movecard", 0.3, "{FS} {FV} van stapel {FF} op {TS} {TV}",
         "foundation", "card", {}},
        {"dealcard", 1.2, "nieuwe kaarten", "any", "card", {}},
        {"dealcard", 0.5, "[nieuwe] kaarten omdraaien", "any", "card", {}},
        {"dealcard", 0.3, "volgende", "any", "card", {}},
    };
    g.shifts = {{"value", "13", "koning", "heer", 0.6}};
    g.interjections = {"uh", "ja", "nee"};
    g.interjection_rate = 0.08;
    g.move_model = "patience";
    g.speaker = "synthetic";
    return g;
  }();
  return grammar;
}

}  // namespace frameforge
