// include/frameforge/decode.hpp

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

#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "frameforge/corpus.hpp"
#include "frameforge/hmm.hpp"
#include "frameforge/schema.hpp"

namespace frameforge {

class DecodeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// ---------------------------------------------------------------------------
// Unknown units

using UnitDistance = std::function<double(std::string_view, std::string_view)>;

/// Levenshtein distance over phoneme symbols (unit cost per edit).
double symbol_edit_distance(std::string_view a, std::string_view b);

/// Edit distance whose substitution cost is the fraction of articulatory
/// features on which the two symbols differ; insertions and deletions cost 1.
double feature_edit_distance(std::string_view a, std::string_view b);

/// Fraction of differing features, 1 when either symbol has no entry.
double feature_substitution_cost(std::string_view a, std::string_view b);

enum class UnknownUnits { kMapEdit, kMapFeature, kIgnore };

std::string to_string(UnknownUnits mode);
UnknownUnits unknown_units_from_string(std::string_view s);

/// Replaces every out-of-vocabulary unit by its nearest vocabulary unit;
/// ties go to the lowest vocabulary index. `vocabulary` must be sorted.
SegmentedCommand map_unknown_units(const SegmentedCommand &command,
                                   std::span<const std::string> vocabulary,
                                   const UnitDistance &distance);

/// Drops out-of-vocabulary units. When nothing is left the command is mapped
/// with `fallback` instead.
SegmentedCommand drop_unknown_units(const SegmentedCommand &command,
                                    std::span<const std::string> vocabulary,
                                    const UnitDistance &fallback);

// ---------------------------------------------------------------------------
// Decoding

enum class PosteriorMode {
  kEmission,         // p(state | unit) from the emission column
  kForwardBackward,  // lattice occupancy within the selected frame type
};

enum class Accumulation {
  kAllPositions,
  kPathRestricted,  // only positions whose path state fills the slot
};

struct DecodeOptions {
  double threshold = 0.0;
  UnknownUnits unknown = UnknownUnits::kMapEdit;
  PosteriorMode posterior = PosteriorMode::kEmission;
  Accumulation accumulation = Accumulation::kAllPositions;

  nlohmann::json to_json() const;
  static DecodeOptions from_json(const nlohmann::json &j);
};

struct DecodeResult {
  std::vector<std::string> units;  // after unknown-unit handling
  std::vector<int> path;
  std::vector<std::string> path_labels;
  std::string frame_type;
  std::map<std::string, double> totals;  // slot-value label -> accumulated
  Frame frame;

  nlohmann::json to_json(bool explain) const;
};

/// Log-space Viterbi over encoded units. Throws DecodeError when no path has
/// non-zero probability or the path leaves a frame type.
std::vector<int> viterbi(const HmmModel &model, std::span<const int> units);

struct FillResult {
  Frame frame;
  std::map<std::string, double> totals;
};

/// Selects, for each slot of the path's frame type, the path value of that
/// slot with the largest accumulated posterior, and fills it when the total
/// reaches `options.threshold`.
FillResult fill_frame(const HmmModel &model, std::span<const int> units,
                      std::span<const int> path, const DecodeOptions &options);

DecodeResult decode(const HmmModel &model, const SegmentedCommand &command,
                    const DecodeOptions &options = {});

}  // namespace frameforge
