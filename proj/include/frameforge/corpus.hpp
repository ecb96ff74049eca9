// include/frameforge/corpus.hpp

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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frameforge/schema.hpp"

namespace frameforge {

struct Utterance {
  std::string id;
  std::string speaker;
  std::int64_t ordinal = 0;
  std::vector<std::string> orthographic;
  std::vector<std::string> phonemic;  // one phoneme-symbol string per word
};

struct CorpusEntry {
  Utterance utterance;
  Frame automatic_frame;
  Frame oracle_frame;
};

/// Per-speaker entry lists in recording order. Immutable once loaded.
struct Corpus {
  std::map<std::string, std::vector<CorpusEntry>> speakers;

  std::size_t size() const;
  const std::vector<CorpusEntry> &speaker(const std::string &name) const;
};

/// Thrown by load_corpus for lines that are not valid corpus records.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string &what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads a JSONL corpus; every record is validated against `schema`.
Corpus load_corpus(const std::filesystem::path &path,
                   const FrameSchema &schema = patience_schema());
Corpus read_corpus(std::istream &in,
                   const FrameSchema &schema = patience_schema());

nlohmann::json entry_to_json(const CorpusEntry &entry);
CorpusEntry entry_from_json(const nlohmann::json &j);
void write_corpus(std::ostream &out, const Corpus &corpus);

// ---------------------------------------------------------------------------
// Segmentation

enum class Granularity { kWordUnigram, kWordBigram, kPhonemeUnigram, kPhonemeBigram };

std::string to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

struct SegmentedCommand {
  Granularity granularity = Granularity::kWordUnigram;
  std::vector<std::string> units;
};

inline constexpr std::string_view kBoundary = "+";

/// Splits a phonemic word into phoneme symbols. Symbols are single
/// characters except for the multi-character entries of the bundled symbol
/// table (longest match wins).
std::vector<std::string> phoneme_symbols(std::string_view word);

SegmentedCommand segment(std::span<const std::string> phonemic_words,
                         Granularity granularity);
SegmentedCommand segment(const Utterance &utterance, Granularity granularity);

// ---------------------------------------------------------------------------
// Experiment splits

struct ExperimentSplit {
  std::vector<std::vector<CorpusEntry>> partitions;
  std::vector<CorpusEntry> dropped;  // ragged tail of the training portion
  std::vector<CorpusEntry> test;

  /// Concatenation of the first k partitions.
  std::vector<CorpusEntry> training_prefix(std::size_t k) const;
};

struct SplitOptions {
  std::size_t partition_size = 25;
  std::size_t test_anchor_count = 20;
  std::string anchor_frame_type = "movecard";
};

/// Test set: the last `test_anchor_count` anchor-type utterances plus every
/// other utterance recorded at or after the first of them. Everything earlier
/// is cut into consecutive partitions; an incomplete final partition is
/// dropped.
ExperimentSplit split_experiment(const Corpus &corpus,
                                 const std::string &speaker,
                                 const SplitOptions &options = {});

}  // namespace frameforge
