// include/frameforge/hmm.hpp

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

// Frame-supervised HMM over slot values.
//
// Each frame type is a block of states that never transitions into another
// block: one emitting state per slot value seen in training, an optional
// filler state in front of each of them, and a single state for slotless
// frame types. Transitions between distinct values of the same slot are
// structurally zero. The hierarchical (slot level) layer is expressed as
// parameter tying over this flat state space.

#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "frameforge/corpus.hpp"
#include "frameforge/nmf.hpp"
#include "frameforge/schema.hpp"

namespace frameforge {

enum class FillerMode { kNone, kNonShared, kAllShared, kSlotShared };

std::string to_string(FillerMode mode);
FillerMode filler_mode_from_string(std::string_view s);

struct SharingConfig {
  FillerMode fillers = FillerMode::kNone;
  bool t_sharing = false;
  bool e_sharing_nmf = false;
  bool e_sharing_hmm = false;

  bool operator==(const SharingConfig &) const = default;
  nlohmann::json to_json() const;
  static SharingConfig from_json(const nlohmann::json &j);
};

enum class MaskingMode {
  kPosteriorZeroing,  // zero unsupported posteriors after forward-backward
  kMaskedForward,     // run forward-backward over supported states only
};

struct HmmOptions {
  double floor = 1e-12;
  double filler_entry = 0.5;  // initial share of entering mass via the filler
  bool filler_self_loop = false;
  bool mask_fillers = false;  // zero a filler together with its owner
  MaskingMode masking = MaskingMode::kPosteriorZeroing;

  bool operator==(const HmmOptions &) const = default;
  nlohmann::json to_json() const;
  static HmmOptions from_json(const nlohmann::json &j);
};

enum class StateKind { kSlotValue, kFiller, kFrameType };

struct HmmState {
  StateKind kind = StateKind::kSlotValue;
  int frame_type = -1;
  SlotValueRef ref;  // slot-value states and fillers (the owner's value)
  int owner = -1;    // fillers: index of the owning slot-value state
  bool observed = false;  // value occurs in some training automatic frame
  std::string label;
};

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Matrix<bool, Eigen::Dynamic, 1>;

struct HmmModel {
  FrameSchema schema;
  SharingConfig config;
  HmmOptions options;
  std::vector<std::string> vocabulary;  // sorted
  std::vector<HmmState> states;
  Eigen::VectorXd initial;
  Eigen::MatrixXd transitions;  // row-stochastic, from x to
  Eigen::MatrixXd emissions;    // states x vocabulary, row-stochastic
  BoolMatrix allowed;           // structurally permitted transitions
  BoolVector initial_allowed;

  Eigen::Index num_states() const {
    return static_cast<Eigen::Index>(states.size());
  }
  std::optional<int> unit_index(const std::string &unit) const;
  std::optional<int> state_index(std::string_view label) const;
  std::optional<int> filler_of(int state) const;

  /// Unit indices of a command; throws ValidationError on unknown units.
  std::vector<int> encode(const SegmentedCommand &command) const;

  nlohmann::json to_json() const;
  static HmmModel from_json(const nlohmann::json &j);
};

/// Sets `allowed` / `initial_allowed` from the state list.
void derive_structure(HmmModel &model);

/// Emissions come from the association map columns (filler states share
/// the filler column); transitions start uniform over the permitted
/// successors, with entering mass split between a state and its filler.
HmmModel build_model(const FrameSchema &schema, const AssociationMap &map,
                     const SharingConfig &config,
                     std::span<const CorpusEntry> train,
                     const HmmOptions &options = {});

// ---------------------------------------------------------------------------
// Forward-backward kernels

template <typename Scalar>
struct Lattice {
  MatrixX<Scalar> alpha;  // states x time, each column scaled to sum 1
  MatrixX<Scalar> beta;   // states x time, scaled by the same factors
  VectorX<Scalar> scale;
  Scalar log_likelihood = -std::numeric_limits<Scalar>::infinity();

  bool valid() const { return std::isfinite(log_likelihood); }
};

/// Scaled forward-backward. With `mask`, paths are restricted to states whose
/// mask entry is true. An impossible observation sequence yields an invalid
/// lattice (log likelihood -inf).
template <typename DI, typename DA, typename DB>
Lattice<typename DA::Scalar> forward_backward(
    const Eigen::MatrixBase<DI> &initial, const Eigen::MatrixBase<DA> &trans,
    const Eigen::MatrixBase<DB> &emis, std::span<const int> obs,
    const BoolVector *mask = nullptr) {
  using Scalar = typename DA::Scalar;
  const Eigen::Index n = trans.rows();
  const auto len = static_cast<Eigen::Index>(obs.size());
  Lattice<Scalar> lat;
  if (len == 0) return lat;
  lat.alpha.resize(n, len);
  lat.beta.resize(n, len);
  lat.scale.resize(len);

  VectorX<Scalar> keep = VectorX<Scalar>::Ones(n);
  if (mask != nullptr)
    for (Eigen::Index i = 0; i < n; ++i) keep(i) = (*mask)(i) ? 1 : 0;

  auto emit = [&](Eigen::Index t) -> VectorX<Scalar> {
    return emis.col(obs[static_cast<std::size_t>(t)]).cwiseProduct(keep);
  };

  Scalar ll = 0;
  for (Eigen::Index t = 0; t < len; ++t) {
    VectorX<Scalar> a = t == 0 ? VectorX<Scalar>(initial.cwiseProduct(emit(0)))
                               : VectorX<Scalar>((trans.transpose() *
                                                  lat.alpha.col(t - 1))
                                                     .cwiseProduct(emit(t)));
    const Scalar c = a.sum();
    if (!(c > 0)) return lat;
    lat.scale(t) = c;
    lat.alpha.col(t) = a / c;
    ll += std::log(c);
  }
  lat.beta.col(len - 1) = keep;
  for (Eigen::Index t = len - 2; t >= 0; --t)
    lat.beta.col(t) = (trans * emit(t + 1).cwiseProduct(lat.beta.col(t + 1))) /
                      lat.scale(t + 1);
  lat.log_likelihood = ll;
  return lat;
}

/// Most probable state sequence in log space. Returns an empty path when no
/// sequence has non-zero probability.
template <typename DI, typename DA, typename DB>
std::vector<int> viterbi_path(const Eigen::MatrixBase<DI> &initial,
                              const Eigen::MatrixBase<DA> &trans,
                              const Eigen::MatrixBase<DB> &emis,
                              std::span<const int> obs,
                              typename DA::Scalar *score = nullptr) {
  using Scalar = typename DA::Scalar;
  const Eigen::Index n = trans.rows();
  const auto len = static_cast<Eigen::Index>(obs.size());
  if (len == 0) return {};
  const MatrixX<Scalar> log_a = trans.array().log().matrix();
  const MatrixX<Scalar> log_b = emis.array().log().matrix();
  VectorX<Scalar> delta = initial.array().log().matrix() + log_b.col(obs[0]);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(n, len);
  back.col(0).setConstant(-1);
  for (Eigen::Index t = 1; t < len; ++t) {
    VectorX<Scalar> next(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index arg = 0;
      // First maximum on ties.
      (delta + log_a.col(j)).maxCoeff(&arg);
      next(j) = delta(arg) + log_a(arg, j) +
                log_b(j, obs[static_cast<std::size_t>(t)]);
      back(j, t) = static_cast<int>(arg);
    }
    delta = next;
  }
  Eigen::Index last = 0;
  const Scalar best = delta.maxCoeff(&last);
  if (!(best > -std::numeric_limits<Scalar>::infinity())) return {};
  if (score != nullptr) *score = best;
  std::vector<int> path(static_cast<std::size_t>(len));
  path.back() = static_cast<int>(last);
  for (Eigen::Index t = len - 1; t > 0; --t)
    path[static_cast<std::size_t>(t - 1)] =
        back(path[static_cast<std::size_t>(t)], t);
  return path;
}

// ---------------------------------------------------------------------------
// Training

struct ExpectedCounts {
  Eigen::VectorXd initial;
  Eigen::MatrixXd transitions;
  Eigen::MatrixXd emissions;
  double log_likelihood = 0;  // supervised, summed over used utterances
  int utterances = 0;
  int skipped = 0;

  static ExpectedCounts zeros(const HmmModel &model);
  ExpectedCounts &operator+=(const ExpectedCounts &other);
};

/// States an utterance with this automatic frame may occupy: its own frame
/// type's slot-value states whose value is in the frame, every filler of
/// that frame type (only those of permitted owners with `mask_fillers`), and
/// its slotless frame-type state.
BoolVector supervision_mask(const HmmModel &model, const Frame &frame);

/// log P(command, every state supported by `frame`).
double supervised_log_likelihood(const HmmModel &model,
                                 std::span<const int> units,
                                 const Frame &frame);

/// Occupancy and transition expectations for one utterance. An utterance
/// that cannot be explained after masking is reported as skipped.
ExpectedCounts e_step(const HmmModel &model, std::span<const int> units,
                      const Frame &frame);
ExpectedCounts e_step(const HmmModel &model, const SegmentedCommand &command,
                      const Frame &frame);

/// Maximum-likelihood re-estimation followed by the configured sharing
/// passes. Rows without counts keep their previous distribution.
HmmModel m_step(const ExpectedCounts &counts, HmmModel model);

/// Ties every permitted transition to the mean of
/// its (source slot, target slot) group, then renormalizes. The initial
/// distribution is tied per target slot.
void apply_transition_sharing(HmmModel &model);

enum class EmissionSharing { kSlotValues, kFillersAll, kFillersSlot };

void apply_emission_sharing(HmmModel &model, EmissionSharing mode);

struct TrainingTrace {
  std::vector<double> log_likelihood;  // per iteration, before its update
  int iterations = 0;
  int skipped = 0;  // utterance skips summed over iterations
};

std::pair<HmmModel, TrainingTrace> train(HmmModel model,
                                         std::span<const CorpusEntry> train,
                                         Granularity granularity,
                                         int iterations = 20);

}  // namespace frameforge
