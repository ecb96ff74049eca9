// src/nmf.cpp

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

#include "frameforge/nmf.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>

namespace frameforge {

using nlohmann::json;

namespace {

std::set<SlotValueRef> active_values(const Frame &frame,
                                     const FrameSchema &schema,
                                     bool expression_sharing) {
  std::set<SlotValueRef> out;
  int ft = *schema.frame_type_index(frame.type);
  for (const auto &[slot, values] : frame.fills) {
    int si = *schema.slot_index(ft, slot);
    for (const auto &v : values) {
      SlotValueRef ref{ft, si, *schema.value_index(ft, si, v)};
      if (expression_sharing) {
        for (const auto &r : schema.shared_closure(ref)) out.insert(r);
      } else {
        out.insert(ref);
      }
    }
  }
  return out;
}

}  // namespace

FrameMatrix build_frame_matrix(std::span<const CorpusEntry> train,
                               const FrameSchema &schema,
                               bool expression_sharing, bool filler_row) {
  if (train.empty()) throw ValidationError("empty training slice");

  std::vector<std::set<SlotValueRef>> per_command;
  std::vector<int> command_type;
  std::set<SlotValueRef> all_values;
  std::set<int> slotless_types;
  for (const auto &e : train) {
    validate_frame(e.automatic_frame, schema, /*single_valued=*/true);
    int ft = *schema.frame_type_index(e.automatic_frame.type);
    command_type.push_back(ft);
    if (schema.frame_type(ft).slots.empty()) slotless_types.insert(ft);
    per_command.push_back(
        active_values(e.automatic_frame, schema, expression_sharing));
    all_values.insert(per_command.back().begin(), per_command.back().end());
  }

  FrameMatrix fm;
  std::map<SlotValueRef, Eigen::Index> row_of;
  for (const auto &ref : all_values) {
    row_of[ref] = static_cast<Eigen::Index>(fm.rows.size());
    fm.rows.push_back({FrameRowKind::kSlotValue, ref.frame_type, ref,
                       schema.label(ref)});
  }
  std::map<int, Eigen::Index> type_row;
  for (int ft : slotless_types) {
    type_row[ft] = static_cast<Eigen::Index>(fm.rows.size());
    fm.rows.push_back({FrameRowKind::kFrameType, ft, {}, schema.frame_type(ft).name});
  }
  if (filler_row) fm.rows.push_back({FrameRowKind::kFiller, -1, {}, kFillerLabel});

  const auto n = static_cast<Eigen::Index>(train.size());
  fm.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(fm.rows.size()), n);
  for (Eigen::Index c = 0; c < n; ++c) {
    for (const auto &ref : per_command[c]) fm.matrix(row_of.at(ref), c) = 1.0;
    if (auto it = type_row.find(command_type[c]); it != type_row.end())
      fm.matrix(it->second, c) = 1.0;
  }
  if (filler_row) fm.matrix.row(fm.matrix.rows() - 1).setOnes();
  return fm;
}

CommandMatrix build_command_matrix(std::span<const SegmentedCommand> commands) {
  std::set<std::string> vocab;
  for (const auto &c : commands) vocab.insert(c.units.begin(), c.units.end());
  CommandMatrix cm;
  cm.units.assign(vocab.begin(), vocab.end());
  std::map<std::string, Eigen::Index> row_of;
  for (std::size_t i = 0; i < cm.units.size(); ++i)
    row_of[cm.units[i]] = static_cast<Eigen::Index>(i);
  cm.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cm.units.size()),
                                    static_cast<Eigen::Index>(commands.size()));
  for (std::size_t c = 0; c < commands.size(); ++c)
    for (const auto &u : commands[c].units)
      cm.matrix(row_of.at(u), static_cast<Eigen::Index>(c)) += 1.0;
  return cm;
}

Eigen::MatrixXd ActivationMatrices::stacked() const {
  if (frames.matrix.cols() != commands.matrix.cols())
    throw ValidationError("frame and command matrices differ in column count");
  Eigen::MatrixXd v(frames.matrix.rows() + commands.matrix.rows(),
                    frames.matrix.cols());
  v << frames.matrix, commands.matrix;
  return v;
}

int default_rank(const ActivationMatrices &activations) {
  const auto rows = activations.frames.matrix.rows() +
                    activations.commands.matrix.rows();
  const auto cols = activations.frames.matrix.cols();
  return static_cast<int>(std::max<Eigen::Index>(
      1, std::min({activations.frames.matrix.rows(), rows, cols})));
}

FactorizationResult factorize(const ActivationMatrices &activations,
                              NmfOptions options) {
  if (options.rank == 0) options.rank = default_rank(activations);
  auto f = factorize(activations.stacked(), options);
  const auto frame_rows = activations.frames.matrix.rows();
  FactorizationResult r;
  r.w_frames = f.w.topRows(frame_rows);
  r.w_commands = f.w.bottomRows(f.w.rows() - frame_rows);
  r.h = std::move(f.h);
  r.initial_objective = f.initial_objective;
  r.objective = std::move(f.objective);
  return r;
}

// ---------------------------------------------------------------------------

std::optional<Eigen::Index> AssociationMap::unit_index(
    const std::string &unit) const {
  auto it = std::lower_bound(units.begin(), units.end(), unit);
  if (it == units.end() || *it != unit) return std::nullopt;
  return static_cast<Eigen::Index>(it - units.begin());
}

std::optional<Eigen::Index> AssociationMap::column_index(
    FrameRowKind kind, int frame_type, const SlotValueRef &ref) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    const auto &c = columns[i];
    if (c.kind != kind) continue;
    if (kind == FrameRowKind::kFiller ||
        (kind == FrameRowKind::kFrameType && c.frame_type == frame_type) ||
        (kind == FrameRowKind::kSlotValue && c.ref == ref))
      return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

void AssociationMap::write_tsv(std::ostream &out) const {
  out << "unit";
  for (const auto &c : columns) out << '\t' << c.label;
  out << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    out << units[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", matrix(i, j));
      out << '\t' << buf;
    }
    out << '\n';
  }
}

json AssociationMap::to_json(const FrameSchema &schema) const {
  json cols = json::array();
  for (const auto &c : columns) {
    switch (c.kind) {
      case FrameRowKind::kSlotValue:
        cols.push_back({{"kind", "slot_value"},
                        {"frame_type", schema.frame_type(c.frame_type).name},
                        {"slot", schema.slot(c.ref.frame_type, c.ref.slot).name},
                        {"value", schema.value(c.ref)}});
        break;
      case FrameRowKind::kFrameType:
        cols.push_back({{"kind", "frame_type"},
                        {"frame_type", schema.frame_type(c.frame_type).name}});
        break;
      case FrameRowKind::kFiller:
        cols.push_back({{"kind", "filler"}});
        break;
    }
  }
  json rows = json::array();
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < matrix.cols(); ++j) r.push_back(matrix(i, j));
    rows.push_back(std::move(r));
  }
  return {{"units", units}, {"columns", cols}, {"matrix", rows}};
}

AssociationMap AssociationMap::from_json(const json &j,
                                         const FrameSchema &schema) {
  AssociationMap m;
  m.units = j.at("units").get<std::vector<std::string>>();
  if (!std::is_sorted(m.units.begin(), m.units.end()))
    throw ValidationError("association map units must be sorted");
  for (const auto &c : j.at("columns")) {
    const auto kind = c.at("kind").get<std::string>();
    if (kind == "filler") {
      m.columns.push_back({FrameRowKind::kFiller, -1, {}, kFillerLabel});
      continue;
    }
    auto ft = schema.frame_type_index(c.at("frame_type").get<std::string>());
    if (!ft) throw ValidationError("association map: unknown frame type");
    if (kind == "frame_type") {
      m.columns.push_back(
          {FrameRowKind::kFrameType, *ft, {}, schema.frame_type(*ft).name});
      continue;
    }
    auto si = schema.slot_index(*ft, c.at("slot").get<std::string>());
    if (!si) throw ValidationError("association map: unknown slot");
    auto vi = schema.value_index(*ft, *si, c.at("value").get<std::string>());
    if (!vi) throw ValidationError("association map: unknown value");
    SlotValueRef ref{*ft, *si, *vi};
    m.columns.push_back({FrameRowKind::kSlotValue, *ft, ref, schema.label(ref)});
  }
  const auto &rows = j.at("matrix");
  m.matrix.resize(static_cast<Eigen::Index>(m.units.size()),
                  static_cast<Eigen::Index>(m.columns.size()));
  if (rows.size() != m.units.size())
    throw ValidationError("association map: row count mismatch");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.columns.size())
      throw ValidationError("association map: column count mismatch");
    for (std::size_t k = 0; k < m.columns.size(); ++k)
      m.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          rows[i][k].get<double>();
  }
  return m;
}

AssociationMap association_map(const FactorizationResult &result,
                               const ActivationMatrices &activations) {
  AssociationMap m;
  m.matrix = associate(result.w_commands, result.w_frames);
  m.units = activations.commands.units;
  m.columns = activations.frames.rows;
  return m;
}

// ---------------------------------------------------------------------------

Frame nmf_decode(const SegmentedCommand &command, const AssociationMap &map,
                 const FrameSchema &schema, double threshold) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(map.matrix.cols());
  for (const auto &unit : command.units) {
    auto row = map.unit_index(unit);
    if (!row) throw ValidationError("unit '" + unit + "' is not in the map");
    const double mass = map.matrix.row(*row).sum();
    if (mass > 0) acc += map.matrix.row(*row).transpose() / mass;
  }

  const int types = static_cast<int>(schema.frame_types().size());
  Eigen::VectorXd type_mass = Eigen::VectorXd::Zero(types);
  for (std::size_t c = 0; c < map.columns.size(); ++c) {
    const auto &col = map.columns[c];
    if (col.kind != FrameRowKind::kFiller)
      type_mass(col.frame_type) += acc(static_cast<Eigen::Index>(c));
  }
  Eigen::Index best_type = 0;
  type_mass.maxCoeff(&best_type);  // first maximum on ties

  Frame frame{schema.frame_type(static_cast<int>(best_type)).name, {}};
  const auto &slots = schema.frame_type(static_cast<int>(best_type)).slots;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    Eigen::Index best = -1;
    for (std::size_t c = 0; c < map.columns.size(); ++c) {
      const auto &col = map.columns[c];
      if (col.kind != FrameRowKind::kSlotValue || col.frame_type != best_type ||
          col.ref.slot != static_cast<int>(s))
        continue;
      const auto ci = static_cast<Eigen::Index>(c);
      if (best < 0 || acc(ci) > acc(best)) best = ci;
    }
    if (best >= 0 && acc(best) > threshold)
      frame.fills[slots[s].name] = {schema.value(map.columns[best].ref)};
  }
  return frame;
}

}  // namespace frameforge
