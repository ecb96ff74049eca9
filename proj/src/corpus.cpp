// src/corpus.cpp

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

#include "frameforge/corpus.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace frameforge {

using nlohmann::json;

std::size_t Corpus::size() const {
  std::size_t n = 0;
  for (const auto &[_, entries] : speakers) n += entries.size();
  return n;
}

const std::vector<CorpusEntry> &Corpus::speaker(const std::string &name) const {
  auto it = speakers.find(name);
  if (it == speakers.end())
    throw ValidationError("unknown speaker '" + name + "'");
  return it->second;
}

ParseError::ParseError(std::size_t line, const std::string &what)
    : ValidationError("line " + std::to_string(line) + ": " + what),
      line_(line) {}

namespace {

std::vector<std::string> split_whitespace(const std::string &s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

std::string join(const std::vector<std::string> &parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

CorpusEntry entry_from_json(const json &j) {
  CorpusEntry e;
  auto &u = e.utterance;
  u.id = j.at("id").get<std::string>();
  u.speaker = j.at("speaker").is_string() ? j.at("speaker").get<std::string>()
                                          : j.at("speaker").dump();
  u.ordinal = j.at("ordinal").get<std::int64_t>();
  u.orthographic = split_whitespace(j.at("ortho").get<std::string>());
  u.phonemic = j.at("phon").get<std::vector<std::string>>();
  e.automatic_frame = frame_from_json(j.at("auto_frame"));
  e.oracle_frame = frame_from_json(j.at("oracle_frame"));
  return e;
}

json entry_to_json(const CorpusEntry &e) {
  const auto &u = e.utterance;
  return {{"id", u.id},
          {"speaker", u.speaker},
          {"ordinal", u.ordinal},
          {"ortho", join(u.orthographic, " ")},
          {"phon", u.phonemic},
          {"auto_frame", frame_to_json(e.automatic_frame)},
          {"oracle_frame", frame_to_json(e.oracle_frame)}};
}

Corpus read_corpus(std::istream &in, const FrameSchema &schema) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    CorpusEntry entry;
    try {
      entry = entry_from_json(json::parse(line));
    } catch (const json::exception &e) {
      throw ParseError(lineno, std::string("malformed record: ") + e.what());
    }
    const auto &u = entry.utterance;
    try {
      if (u.orthographic.size() != u.phonemic.size())
        throw ValidationError("orthographic and phonemic word counts differ");
      for (const auto &w : u.phonemic)
        if (w.empty()) throw ValidationError("empty phonemic word");
      validate_frame(entry.automatic_frame, schema, /*single_valued=*/true);
      validate_frame(entry.oracle_frame, schema, /*single_valued=*/false);
      if (entry.automatic_frame.type != entry.oracle_frame.type)
        throw ValidationError("automatic and oracle frame types differ");
    } catch (const ParseError &) {
      throw;
    } catch (const ValidationError &e) {
      throw ParseError(lineno, "record '" + u.id + "': " + e.what());
    }
    if (!ids.insert(u.id).second)
      throw ParseError(lineno, "duplicate id '" + u.id + "'");
    corpus.speakers[u.speaker].push_back(std::move(entry));
  }
  for (auto &[speaker, entries] : corpus.speakers) {
    std::stable_sort(entries.begin(), entries.end(),
                     [](const CorpusEntry &a, const CorpusEntry &b) {
                       return a.utterance.ordinal < b.utterance.ordinal;
                     });
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (entries[i].utterance.ordinal == entries[i - 1].utterance.ordinal)
        throw ValidationError("speaker '" + speaker + "' repeats ordinal " +
                              std::to_string(entries[i].utterance.ordinal));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path &path,
                   const FrameSchema &schema) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open corpus '" + path.string() + "'");
  return read_corpus(in, schema);
}

void write_corpus(std::ostream &out, const Corpus &corpus) {
  for (const auto &[_, entries] : corpus.speakers)
    for (const auto &e : entries) out << entry_to_json(e).dump() << '\n';
}

// ---------------------------------------------------------------------------

std::string to_string(Granularity g) {
  switch (g) {
    case Granularity::kWordUnigram: return "word-unigram";
    case Granularity::kWordBigram: return "word-bigram";
    case Granularity::kPhonemeUnigram: return "phoneme-unigram";
    case Granularity::kPhonemeBigram: return "phoneme-bigram";
  }
  return "?";
}

Granularity granularity_from_string(std::string_view s) {
  for (auto g : {Granularity::kWordUnigram, Granularity::kWordBigram,
                 Granularity::kPhonemeUnigram, Granularity::kPhonemeBigram})
    if (to_string(g) == s) return g;
  throw ValidationError("unknown granularity '" + std::string(s) + "'");
}

namespace {

// Multi-character phoneme symbols (length and nasality marks).
constexpr std::array<std::string_view, 14> kMultiSymbols = {
    "E:", "O:", "9:", "2:", "a:", "e:", "i:",
    "o:", "u:", "y:", "E~", "A~", "O~", "Y~"};

}  // namespace

std::vector<std::string> phoneme_symbols(std::string_view word) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t len = 1;
    for (auto sym : kMultiSymbols)
      if (sym.size() > len && word.substr(i, sym.size()) == sym)
        len = sym.size();
    // Keep UTF-8 sequences intact.
    if (len == 1) {
      auto lead = static_cast<unsigned char>(word[i]);
      if (lead >= 0xF0) len = 4;
      else if (lead >= 0xE0) len = 3;
      else if (lead >= 0xC0) len = 2;
      len = std::min(len, word.size() - i);
    }
    out.emplace_back(word.substr(i, len));
    i += len;
  }
  return out;
}

SegmentedCommand segment(std::span<const std::string> words,
                         Granularity granularity) {
  if (words.empty()) throw ValidationError("empty phonemic transcription");
  for (const auto &w : words)
    if (w.empty()) throw ValidationError("empty phonemic word");

  SegmentedCommand cmd{granularity, {}};
  const std::string boundary(kBoundary);
  switch (granularity) {
    case Granularity::kWordUnigram:
      cmd.units.assign(words.begin(), words.end());
      break;
    case Granularity::kWordBigram: {
      std::string prev = boundary;
      for (const auto &w : words) {
        cmd.units.push_back(prev + "_" + w);
        prev = w;
      }
      cmd.units.push_back(prev + "_" + boundary);
      break;
    }
    case Granularity::kPhonemeUnigram:
    case Granularity::kPhonemeBigram: {
      std::vector<std::string> symbols;
      for (const auto &w : words) {
        auto s = phoneme_symbols(w);
        symbols.insert(symbols.end(), s.begin(), s.end());
      }
      if (granularity == Granularity::kPhonemeUnigram) {
        cmd.units = std::move(symbols);
        break;
      }
      std::string prev = boundary;
      for (const auto &s : symbols) {
        cmd.units.push_back(prev + s);
        prev = s;
      }
      cmd.units.push_back(prev + boundary);
      break;
    }
  }
  return cmd;
}

SegmentedCommand segment(const Utterance &utterance, Granularity granularity) {
  return segment(std::span<const std::string>(utterance.phonemic),
                 granularity);
}

// ---------------------------------------------------------------------------

std::vector<CorpusEntry> ExperimentSplit::training_prefix(std::size_t k) const {
  std::vector<CorpusEntry> out;
  for (std::size_t i = 0; i < k && i < partitions.size(); ++i)
    out.insert(out.end(), partitions[i].begin(), partitions[i].end());
  return out;
}

ExperimentSplit split_experiment(const Corpus &corpus,
                                 const std::string &speaker,
                                 const SplitOptions &options) {
  if (options.partition_size == 0)
    throw ValidationError("partition size must be positive");
  const auto &entries = corpus.speaker(speaker);

  std::vector<std::size_t> anchors;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].automatic_frame.type == options.anchor_frame_type)
      anchors.push_back(i);
  if (anchors.size() < options.test_anchor_count)
    throw ValidationError("speaker '" + speaker + "' has " +
                          std::to_string(anchors.size()) + " " +
                          options.anchor_frame_type + " utterances; " +
                          std::to_string(options.test_anchor_count) +
                          " are needed for the test set");

  // Entries are ordinal-sorted, so the index boundary is the ordinal boundary.
  std::size_t boundary = options.test_anchor_count == 0
                             ? entries.size()
                             : anchors[anchors.size() - options.test_anchor_count];

  ExperimentSplit split;
  split.test.assign(entries.begin() + boundary, entries.end());
  std::size_t full = boundary / options.partition_size;
  for (std::size_t p = 0; p < full; ++p) {
    auto first = entries.begin() + p * options.partition_size;
    split.partitions.emplace_back(first, first + options.partition_size);
  }
  split.dropped.assign(entries.begin() + full * options.partition_size,
                       entries.begin() + boundary);
  return split;
}

}  // namespace frameforge
