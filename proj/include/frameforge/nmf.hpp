// include/frameforge/nmf.hpp

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

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "frameforge/corpus.hpp"
#include "frameforge/schema.hpp"

namespace frameforge {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Supervision rows

enum class FrameRowKind { kSlotValue, kFrameType, kFiller };

/// One row of the frame-supervision matrix (one column of an AssociationMap).
struct FrameRow {
  FrameRowKind kind = FrameRowKind::kSlotValue;
  int frame_type = -1;  // -1 for the filler row
  SlotValueRef ref;     // valid for kSlotValue only
  std::string label;
};

inline constexpr const char *kFillerLabel = "<filler>";

struct FrameMatrix {
  Eigen::MatrixXd matrix;  // rows x commands, entries in {0, 1}
  std::vector<FrameRow> rows;
};

struct CommandMatrix {
  Eigen::MatrixXd matrix;           // units x commands, occurrence counts
  std::vector<std::string> units;   // sorted; row i <-> units[i]
};

/// Rows, in order: every slot value active in some training frame (directly
/// or, with expression sharing, through a partner slot) in schema order; one
/// indicator row per slotless frame type seen in training; the filler row.
FrameMatrix build_frame_matrix(std::span<const CorpusEntry> train,
                               const FrameSchema &schema,
                               bool expression_sharing, bool filler_row);

CommandMatrix build_command_matrix(std::span<const SegmentedCommand> commands);

struct ActivationMatrices {
  FrameMatrix frames;
  CommandMatrix commands;

  /// [v_frames; v_commands]
  Eigen::MatrixXd stacked() const;
};

// ---------------------------------------------------------------------------
// Factorization

struct NmfOptions {
  int rank = 0;  // 0: number of frame rows, clamped to the matrix dimensions
  int iterations = 200;
  double tolerance = 1e-6;  // relative objective change; 0 disables
  double floor = 1e-12;
  std::uint64_t seed = 0;
};

template <typename Scalar>
struct Factorization {
  MatrixX<Scalar> w;
  MatrixX<Scalar> h;
  Scalar initial_objective = 0;
  std::vector<Scalar> objective;  // after each iteration
};

/// Generalized Kullback-Leibler divergence D(V || WH), with 0 log 0 = 0.
template <typename DV, typename DR>
typename DV::Scalar generalized_kl(const Eigen::MatrixBase<DV> &v,
                                   const Eigen::MatrixBase<DR> &reconstruction) {
  using Scalar = typename DV::Scalar;
  Scalar d = 0;
  for (Eigen::Index j = 0; j < v.cols(); ++j)
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      const Scalar x = v(i, j);
      const Scalar y = reconstruction(i, j);
      if (x > 0) d += x * std::log(x / y);
      d += y - x;
    }
  return d;
}

/// Lee-Seung multiplicative updates for the generalized KL divergence.
/// Factors start uniform in (0.1, 1.1) from a generator seeded with
/// `options.seed`; every entry is floored at `options.floor` after each update.
template <typename Derived>
Factorization<typename Derived::Scalar> factorize(
    const Eigen::MatrixBase<Derived> &v, const NmfOptions &options) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index m = v.rows(), n = v.cols();
  const Eigen::Index rank = options.rank;
  if (rank < 1) throw ValidationError("NMF rank must be >= 1");
  if (options.iterations < 1)
    throw ValidationError("NMF needs at least one iteration");
  if (rank > std::min(m, n))
    throw ValidationError("NMF rank " + std::to_string(rank) +
                          " exceeds the smaller matrix dimension " +
                          std::to_string(std::min(m, n)));
  if ((v.array() < 0).any())
    throw ValidationError("NMF input must be non-negative");

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> init(0.1, 1.1);
  Factorization<Scalar> f;
  f.w.resize(m, rank);
  f.h.resize(rank, n);
  for (Eigen::Index j = 0; j < rank; ++j)
    for (Eigen::Index i = 0; i < m; ++i) f.w(i, j) = Scalar(init(rng));
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < rank; ++i) f.h(i, j) = Scalar(init(rng));

  const Scalar floor = Scalar(options.floor);
  MatrixX<Scalar> wh = f.w * f.h;
  f.initial_objective = generalized_kl(v, wh);
  Scalar previous = f.initial_objective;
  for (int it = 0; it < options.iterations; ++it) {
    MatrixX<Scalar> ratio = v.cwiseQuotient(wh);
    VectorX<Scalar> w_mass = f.w.colwise().sum().transpose();
    f.h.array() *= (f.w.transpose() * ratio).array().colwise() / w_mass.array();
    f.h = f.h.cwiseMax(floor);

    wh.noalias() = f.w * f.h;
    ratio = v.cwiseQuotient(wh);
    VectorX<Scalar> h_mass = f.h.rowwise().sum();
    f.w.array() *=
        (ratio * f.h.transpose()).array().rowwise() / h_mass.transpose().array();
    f.w = f.w.cwiseMax(floor);

    wh.noalias() = f.w * f.h;
    const Scalar current = generalized_kl(v, wh);
    f.objective.push_back(current);
    const Scalar scale = std::max(std::abs(previous), Scalar(1e-300));
    if (options.tolerance > 0 &&
        std::abs(previous - current) / scale < Scalar(options.tolerance))
      break;
    previous = current;
  }
  return f;
}

struct FactorizationResult {
  Eigen::MatrixXd w_frames;
  Eigen::MatrixXd w_commands;
  Eigen::MatrixXd h;
  double initial_objective = 0;
  std::vector<double> objective;
};

/// Rank used when options.rank == 0.
int default_rank(const ActivationMatrices &activations);

/// Factorizes the stacked matrix and splits W by row blocks.
FactorizationResult factorize(const ActivationMatrices &activations,
                              NmfOptions options);

// ---------------------------------------------------------------------------
// Association map

/// Unit x frame-row association strengths, W_commands * W_frames^T.
template <typename DC, typename DF>
auto associate(const Eigen::MatrixBase<DC> &w_commands,
               const Eigen::MatrixBase<DF> &w_frames) {
  return w_commands * w_frames.transpose();
}

struct AssociationMap {
  Eigen::MatrixXd matrix;  // units x columns
  std::vector<std::string> units;  // sorted
  std::vector<FrameRow> columns;

  std::optional<Eigen::Index> unit_index(const std::string &unit) const;
  std::optional<Eigen::Index> column_index(FrameRowKind kind,
                                           int frame_type,
                                           const SlotValueRef &ref = {}) const;

  void write_tsv(std::ostream &out) const;
  nlohmann::json to_json(const FrameSchema &schema) const;
  static AssociationMap from_json(const nlohmann::json &j,
                                  const FrameSchema &schema);
};

AssociationMap association_map(const FactorizationResult &result,
                               const ActivationMatrices &activations);

/// Bag-of-units decoding straight from the association map. Each unit's row
/// is L1-normalized and accumulated; the frame type with the largest summed
/// mass wins; within it each slot takes its argmax value when that value's
/// accumulated mass exceeds `threshold`. Ties go to the lowest index.
Frame nmf_decode(const SegmentedCommand &command, const AssociationMap &map,
                 const FrameSchema &schema, double threshold);

}  // namespace frameforge
