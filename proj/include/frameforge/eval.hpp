// include/frameforge/eval.hpp

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

// Scoring, system pipeline and learning-curve experiments.

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frameforge/corpus.hpp"
#include "frameforge/decode.hpp"
#include "frameforge/hmm.hpp"
#include "frameforge/nmf.hpp"
#include "frameforge/schema.hpp"

namespace frameforge {

// ---------------------------------------------------------------------------
// Scoring

struct SlotCounts {
  long correct = 0;
  long induced_filled = 0;
  long oracle_filled = 0;

  SlotCounts &operator+=(const SlotCounts &o) {
    correct += o.correct;
    induced_filled += o.induced_filled;
    oracle_filled += o.oracle_filled;
    return *this;
  }
  bool operator==(const SlotCounts &) const = default;
};

struct Prf {
  double precision = 0;
  double recall = 0;
  double f = 0;
};

/// An induced slot is correct when the oracle frame has the same type and its
/// value set for that slot contains the induced value.
SlotCounts score_pair(const Frame &induced, const Frame &oracle);

/// Frame-type detection counts for `frame_type`: each frame contributes at
/// most one "slot".
SlotCounts frame_type_counts(const Frame &induced, const Frame &oracle,
                             std::string_view frame_type);

Prf prf(const SlotCounts &counts);
Prf micro_average(std::span<const SlotCounts> counts);

struct RandomizationResult {
  double observed = 0;  // |F(a) - F(b)|
  double p_value = 1;
  bool significant = false;
};

/// Approximate randomization over aligned per-instance counts. Each shuffle
/// swaps every aligned pair with probability 1/2.
RandomizationResult approx_randomization_test(std::span<const SlotCounts> a,
                                              std::span<const SlotCounts> b,
                                              int shuffles, std::uint64_t seed,
                                              double alpha = 0.05);

// ---------------------------------------------------------------------------
// Configuration

enum class Decoder { kHmm, kNmf };

std::string to_string(Decoder d);
Decoder decoder_from_string(std::string_view s);

nlohmann::json nmf_options_to_json(const NmfOptions &o);
NmfOptions nmf_options_from_json(const nlohmann::json &j);

struct ExperimentConfig {
  Granularity granularity = Granularity::kWordUnigram;
  Decoder decoder = Decoder::kHmm;
  SharingConfig sharing;
  bool nmf_filler_column = false;  // NMF decoder only
  double nmf_threshold = 0.5;
  DecodeOptions decode;
  HmmOptions hmm;
  NmfOptions nmf;  // seed is derived per run
  int iterations = 20;
  int runs = 10;
  std::uint64_t seed = 1;
  std::size_t partition_size = 25;
  std::size_t test_anchor_count = 20;
  std::size_t max_partitions = 0;  // 0: all available

  /// Whether the NMF stage gets a filler row.
  bool filler_row() const;

  nlohmann::json to_json() const;
  /// Rejects unknown keys. Missing keys keep their defaults.
  static ExperimentConfig from_json(const nlohmann::json &j);
  /// Short digest of the canonical JSON form.
  std::string hash() const;
};

// ---------------------------------------------------------------------------
// Seeds and digests

/// SHA-256 of `data`, lowercase hex.
std::string sha256_hex(std::string_view data);
std::string file_sha256(const std::string &path);

/// First eight bytes (big-endian) of SHA-256("component|speaker|k|run|base").
std::uint64_t derive_seed(std::uint64_t base, std::string_view component,
                          std::string_view speaker, std::size_t k, int run);

// ---------------------------------------------------------------------------
// Systems

struct TrainedSystem {
  FrameSchema schema;
  Granularity granularity = Granularity::kWordUnigram;
  Decoder decoder = Decoder::kHmm;
  AssociationMap map;
  std::optional<HmmModel> hmm;
  DecodeOptions decode;
  double nmf_threshold = 0.5;
  TrainingTrace trace;

  const std::vector<std::string> &vocabulary() const { return map.units; }

  nlohmann::json to_json() const;
  static TrainedSystem from_json(const nlohmann::json &j);
};

TrainedSystem train_system(const FrameSchema &schema,
                           std::span<const CorpusEntry> train,
                           const ExperimentConfig &config,
                           std::uint64_t nmf_seed);

struct SystemOutput {
  Frame frame;
  std::optional<DecodeResult> detail;  // HMM decoder only
};

SystemOutput run_system(const TrainedSystem &system,
                        const SegmentedCommand &command);
Frame run_system(const TrainedSystem &system, const Utterance &utterance);

// ---------------------------------------------------------------------------
// Learning curves

struct RunResult {
  std::size_t training_size = 0;
  int run = 0;
  SlotCounts counts;
  SlotCounts dealcard;  // frame-type detection of the slotless type
  std::vector<SlotCounts> per_instance;
  int skipped = 0;  // unexplainable training utterances, summed over EM
};

struct CurvePoint {
  std::size_t training_size = 0;
  SlotCounts counts;
  Prf score;
  Prf dealcard;
};

struct LearningCurve {
  std::string speaker;
  ExperimentConfig config;
  std::vector<RunResult> runs;  // ordered by (training size, run)
  std::vector<CurvePoint> points;
  std::size_t test_size = 0;
  int skipped = 0;
};

/// Calls fn(0) .. fn(n - 1) on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)> &fn);

LearningCurve run_learning_curve(const Corpus &corpus,
                                 const std::string &speaker,
                                 const ExperimentConfig &config,
                                 const FrameSchema &schema = patience_schema(),
                                 int jobs = 1);

void write_results_header(std::ostream &out);
void write_results_csv(std::ostream &out, const LearningCurve &curve);
void write_summary_header(std::ostream &out);
void write_summary_csv(std::ostream &out, const LearningCurve &curve);

// ---------------------------------------------------------------------------
// Grids

struct GridCell {
  std::string name;  // directory-safe cell identifier
  ExperimentConfig config;
};

/// Expands a grid document: list-valued keys "granularities", "decoders",
/// "fillers", "t_sharing", "e_sharing_nmf", "e_sharing_hmm",
/// "nmf_filler_column"; everything under "base" is an ExperimentConfig.
/// HMM cells vary the four sharing variables; NMF cells vary expression
/// sharing and the filler column.
std::vector<GridCell> expand_grid(const nlohmann::json &grid);

std::string cell_name(const ExperimentConfig &config);

}  // namespace frameforge
