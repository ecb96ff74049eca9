// src/hmm.cpp

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

#include "frameforge/hmm.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

namespace frameforge {

using nlohmann::json;

std::string to_string(FillerMode mode) {
  switch (mode) {
    case FillerMode::kNone: return "none";
    case FillerMode::kNonShared: return "non-shared";
    case FillerMode::kAllShared: return "all-shared";
    case FillerMode::kSlotShared: return "slot-shared";
  }
  return "?";
}

FillerMode filler_mode_from_string(std::string_view s) {
  if (s == "none") return FillerMode::kNone;
  if (s == "non-shared" || s == "non") return FillerMode::kNonShared;
  if (s == "all-shared" || s == "all") return FillerMode::kAllShared;
  if (s == "slot-shared" || s == "slot") return FillerMode::kSlotShared;
  throw ValidationError("unknown filler mode '" + std::string(s) + "'");
}

json SharingConfig::to_json() const {
  return {{"fillers", to_string(fillers)},
          {"t_sharing", t_sharing},
          {"e_sharing_nmf", e_sharing_nmf},
          {"e_sharing_hmm", e_sharing_hmm}};
}

SharingConfig SharingConfig::from_json(const json &j) {
  SharingConfig c;
  c.fillers = filler_mode_from_string(j.value("fillers", std::string("none")));
  c.t_sharing = j.value("t_sharing", false);
  c.e_sharing_nmf = j.value("e_sharing_nmf", false);
  c.e_sharing_hmm = j.value("e_sharing_hmm", false);
  return c;
}

json HmmOptions::to_json() const {
  return {{"floor", floor},
          {"filler_entry", filler_entry},
          {"filler_self_loop", filler_self_loop},
          {"mask_fillers", mask_fillers},
          {"masking", masking == MaskingMode::kPosteriorZeroing
                          ? "posterior-zeroing"
                          : "masked-forward"}};
}

HmmOptions HmmOptions::from_json(const json &j) {
  HmmOptions o;
  o.floor = j.value("floor", o.floor);
  o.filler_entry = j.value("filler_entry", o.filler_entry);
  o.filler_self_loop = j.value("filler_self_loop", o.filler_self_loop);
  o.mask_fillers = j.value("mask_fillers", o.mask_fillers);
  const auto masking = j.value("masking", std::string("posterior-zeroing"));
  if (masking == "posterior-zeroing") {
    o.masking = MaskingMode::kPosteriorZeroing;
  } else if (masking == "masked-forward") {
    o.masking = MaskingMode::kMaskedForward;
  } else {
    throw ValidationError("unknown masking mode '" + masking + "'");
  }
  if (!(o.filler_entry > 0 && o.filler_entry < 1))
    throw ValidationError("filler_entry must lie in (0, 1)");
  return o;
}

// ---------------------------------------------------------------------------

std::optional<int> HmmModel::unit_index(const std::string &unit) const {
  auto it = std::lower_bound(vocabulary.begin(), vocabulary.end(), unit);
  if (it == vocabulary.end() || *it != unit) return std::nullopt;
  return static_cast<int>(it - vocabulary.begin());
}

std::optional<int> HmmModel::state_index(std::string_view label) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].label == label) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> HmmModel::filler_of(int state) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (states[i].kind == StateKind::kFiller && states[i].owner == state)
      return static_cast<int>(i);
  return std::nullopt;
}

std::vector<int> HmmModel::encode(const SegmentedCommand &command) const {
  std::vector<int> out;
  out.reserve(command.units.size());
  for (const auto &u : command.units) {
    auto idx = unit_index(u);
    if (!idx) throw ValidationError("unit '" + u + "' is not in the vocabulary");
    out.push_back(*idx);
  }
  return out;
}

void derive_structure(HmmModel &model) {
  const auto n = model.num_states();
  model.allowed = BoolMatrix::Constant(n, n, false);
  model.initial_allowed = BoolVector::Constant(n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &si = model.states[static_cast<std::size_t>(i)];
    switch (si.kind) {
      case StateKind::kFrameType:
        model.allowed(i, i) = true;
        model.initial_allowed(i) = true;
        break;
      case StateKind::kFiller:
        model.allowed(i, si.owner) = true;
        if (model.options.filler_self_loop) model.allowed(i, i) = true;
        model.initial_allowed(i) = true;
        break;
      case StateKind::kSlotValue:
        model.initial_allowed(i) = true;
        for (Eigen::Index j = 0; j < n; ++j) {
          const auto &sj = model.states[static_cast<std::size_t>(j)];
          if (sj.frame_type != si.frame_type) continue;
          if (sj.kind == StateKind::kSlotValue) {
            model.allowed(i, j) = i == j || sj.ref.slot != si.ref.slot;
          } else if (sj.kind == StateKind::kFiller) {
            // Entering another value through its filler.
            const auto &owner = model.states[static_cast<std::size_t>(sj.owner)];
            model.allowed(i, j) = sj.owner != i && owner.ref.slot != si.ref.slot;
          }
        }
        break;
    }
  }
}

namespace {

std::set<SlotValueRef> observed_values(std::span<const CorpusEntry> train,
                                       const FrameSchema &schema) {
  std::set<SlotValueRef> out;
  for (const auto &e : train) {
    int ft = *schema.frame_type_index(e.automatic_frame.type);
    for (const auto &[slot, values] : e.automatic_frame.fills) {
      int si = *schema.slot_index(ft, slot);
      for (const auto &v : values)
        out.insert({ft, si, *schema.value_index(ft, si, v)});
    }
  }
  return out;
}

Eigen::VectorXd floored_distribution(const Eigen::VectorXd &column,
                                     double floor) {
  Eigen::VectorXd d = column.cwiseMax(floor);
  return d / d.sum();
}

// Uniform over permitted "entries" (a slot-value state together with its
// filler); the entry mass is split between the two.
void initialize_transitions(HmmModel &m) {
  const auto n = m.num_states();
  std::vector<int> filler(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &s = m.states[static_cast<std::size_t>(i)];
    if (s.kind == StateKind::kFiller) filler[static_cast<std::size_t>(s.owner)] = static_cast<int>(i);
  }
  const double via_filler = m.options.filler_entry;

  auto spread = [&](auto &&row_allowed, Eigen::Index self, auto &&assign) {
    std::vector<Eigen::Index> entries;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto &sj = m.states[static_cast<std::size_t>(j)];
      if (sj.kind == StateKind::kFiller) continue;
      if (row_allowed(j)) entries.push_back(j);
    }
    if (entries.empty()) return;
    const double w = 1.0 / static_cast<double>(entries.size());
    for (auto j : entries) {
      const int f = filler[static_cast<std::size_t>(j)];
      if (f >= 0 && j != self) {
        assign(j, w * (1.0 - via_filler));
        assign(f, w * via_filler);
      } else {
        assign(j, w);
      }
    }
  };

  m.transitions = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &si = m.states[static_cast<std::size_t>(i)];
    if (si.kind == StateKind::kFiller) {
      if (m.options.filler_self_loop) {
        m.transitions(i, si.owner) = 1.0 - via_filler;
        m.transitions(i, i) = via_filler;
      } else {
        m.transitions(i, si.owner) = 1.0;
      }
      continue;
    }
    spread([&](Eigen::Index j) { return m.allowed(i, j); }, i,
           [&](Eigen::Index j, double p) { m.transitions(i, j) = p; });
  }
  m.initial = Eigen::VectorXd::Zero(n);
  spread([&](Eigen::Index j) { return m.initial_allowed(j); }, -1,
         [&](Eigen::Index j, double p) { m.initial(j) = p; });
}

}  // namespace

HmmModel build_model(const FrameSchema &schema, const AssociationMap &map,
                     const SharingConfig &config,
                     std::span<const CorpusEntry> train,
                     const HmmOptions &options) {
  if (map.units.empty()) throw ValidationError("empty vocabulary");
  if (train.empty()) throw ValidationError("empty training slice");

  HmmModel m;
  m.schema = schema;
  m.config = config;
  m.options = options;
  m.vocabulary = map.units;

  const auto seen = observed_values(train, schema);
  std::set<int> seen_types;
  for (const auto &e : train)
    seen_types.insert(*schema.frame_type_index(e.automatic_frame.type));

  std::vector<Eigen::Index> source_column;
  for (std::size_t c = 0; c < map.columns.size(); ++c) {
    const auto &col = map.columns[c];
    if (col.kind == FrameRowKind::kSlotValue) {
      m.states.push_back({StateKind::kSlotValue, col.frame_type, col.ref, -1,
                          seen.count(col.ref) > 0, col.label});
    } else if (col.kind == FrameRowKind::kFrameType) {
      m.states.push_back({StateKind::kFrameType, col.frame_type, {}, -1,
                          seen_types.count(col.frame_type) > 0, col.label});
    } else {
      continue;
    }
    source_column.push_back(static_cast<Eigen::Index>(c));
  }
  for (const auto &v : seen)
    if (!map.column_index(FrameRowKind::kSlotValue, v.frame_type, v))
      throw ValidationError("training slot value " + schema.label(v) +
                            " is missing from the association map");

  if (config.fillers != FillerMode::kNone) {
    auto filler_col = map.column_index(FrameRowKind::kFiller, -1);
    if (!filler_col)
      throw ValidationError("filler states need a filler column in the map");
    const std::size_t owners = m.states.size();
    for (std::size_t i = 0; i < owners; ++i) {
      const auto &owner = m.states[i];
      if (owner.kind != StateKind::kSlotValue) continue;
      m.states.push_back({StateKind::kFiller, owner.frame_type, owner.ref,
                          static_cast<int>(i), owner.observed,
                          "filler_" + owner.label});
      source_column.push_back(*filler_col);
    }
  }
  if (m.states.empty()) throw ValidationError("model has no states");

  const auto n = m.num_states();
  const auto v = static_cast<Eigen::Index>(m.vocabulary.size());
  m.emissions.resize(n, v);
  for (Eigen::Index i = 0; i < n; ++i)
    m.emissions.row(i) =
        floored_distribution(map.matrix.col(source_column[static_cast<std::size_t>(i)]),
                             options.floor)
            .transpose();

  derive_structure(m);
  initialize_transitions(m);
  return m;
}

// ---------------------------------------------------------------------------

ExpectedCounts ExpectedCounts::zeros(const HmmModel &model) {
  ExpectedCounts c;
  const auto n = model.num_states();
  c.initial = Eigen::VectorXd::Zero(n);
  c.transitions = Eigen::MatrixXd::Zero(n, n);
  c.emissions = Eigen::MatrixXd::Zero(n, model.emissions.cols());
  return c;
}

ExpectedCounts &ExpectedCounts::operator+=(const ExpectedCounts &o) {
  initial += o.initial;
  transitions += o.transitions;
  emissions += o.emissions;
  log_likelihood += o.log_likelihood;
  utterances += o.utterances;
  skipped += o.skipped;
  return *this;
}

BoolVector supervision_mask(const HmmModel &model, const Frame &frame) {
  const auto ft = model.schema.frame_type_index(frame.type);
  if (!ft) throw ValidationError("unknown frame type '" + frame.type + "'");
  std::set<SlotValueRef> supported;
  for (const auto &[slot, values] : frame.fills) {
    auto si = model.schema.slot_index(*ft, slot);
    if (!si) throw ValidationError("unknown slot '" + slot + "'");
    for (const auto &v : values)
      if (auto vi = model.schema.value_index(*ft, *si, v))
        supported.insert({*ft, *si, *vi});
  }
  BoolVector mask = BoolVector::Constant(model.num_states(), false);
  for (std::size_t i = 0; i < model.states.size(); ++i) {
    const auto &s = model.states[i];
    if (s.frame_type != *ft) continue;
    const bool free = s.kind == StateKind::kFrameType ||
                      (s.kind == StateKind::kFiller && !model.options.mask_fillers);
    mask(static_cast<Eigen::Index>(i)) = free || supported.count(s.ref) > 0;
  }
  return mask;
}

double supervised_log_likelihood(const HmmModel &model,
                                 std::span<const int> units,
                                 const Frame &frame) {
  const auto mask = supervision_mask(model, frame);
  return forward_backward(model.initial, model.transitions, model.emissions,
                          units, &mask)
      .log_likelihood;
}

ExpectedCounts e_step(const HmmModel &model, std::span<const int> units,
                      const Frame &frame) {
  ExpectedCounts out = ExpectedCounts::zeros(model);
  if (units.empty()) {
    out.skipped = 1;
    return out;
  }
  const auto mask = supervision_mask(model, frame);
  const bool masked_forward = model.options.masking == MaskingMode::kMaskedForward;
  const auto lat = forward_backward(model.initial, model.transitions,
                                    model.emissions, units,
                                    masked_forward ? &mask : nullptr);
  const double supervised =
      masked_forward ? lat.log_likelihood
                     : supervised_log_likelihood(model, units, frame);
  if (!lat.valid() || !std::isfinite(supervised)) {
    out.skipped = 1;
    return out;
  }

  const auto n = model.num_states();
  Eigen::VectorXd keep(n);
  for (Eigen::Index i = 0; i < n; ++i) keep(i) = mask(i) ? 1.0 : 0.0;

  const auto len = static_cast<Eigen::Index>(units.size());
  ExpectedCounts acc = ExpectedCounts::zeros(model);
  for (Eigen::Index t = 0; t < len; ++t) {
    Eigen::VectorXd gamma =
        lat.alpha.col(t).cwiseProduct(lat.beta.col(t)).cwiseProduct(keep);
    const double total = gamma.sum();
    if (!(total > 0)) {
      out.skipped = 1;
      return out;
    }
    gamma /= total;
    if (t == 0) acc.initial = gamma;
    acc.emissions.col(units[static_cast<std::size_t>(t)]) += gamma;
  }
  for (Eigen::Index t = 0; t + 1 < len; ++t) {
    const Eigen::VectorXd from = lat.alpha.col(t).cwiseProduct(keep);
    const Eigen::VectorXd to =
        model.emissions.col(units[static_cast<std::size_t>(t + 1)])
            .cwiseProduct(lat.beta.col(t + 1))
            .cwiseProduct(keep);
    Eigen::MatrixXd xi = (from * to.transpose()).cwiseProduct(model.transitions);
    const double total = xi.sum();
    if (!(total > 0)) {
      out.skipped = 1;
      return out;
    }
    acc.transitions += xi / total;
  }
  acc.log_likelihood = supervised;
  acc.utterances = 1;
  return acc;
}

ExpectedCounts e_step(const HmmModel &model, const SegmentedCommand &command,
                      const Frame &frame) {
  const auto units = model.encode(command);
  return e_step(model, units, frame);
}

// ---------------------------------------------------------------------------

namespace {

// Floors the permitted entries, zeroes the rest and normalizes. Returns false
// (leaving `target` untouched) when the row carries no counts.
template <typename Counts, typename Allowed, typename Target>
bool reestimate_row(const Counts &counts, const Allowed &allowed, double floor,
                    Target &&target) {
  double total = 0;
  for (Eigen::Index j = 0; j < counts.size(); ++j)
    if (allowed(j)) total += counts(j);
  if (!(total > 0)) return false;
  double sum = 0;
  for (Eigen::Index j = 0; j < counts.size(); ++j) {
    target(j) = allowed(j) ? std::max(counts(j), floor) : 0.0;
    sum += target(j);
  }
  target /= sum;
  return true;
}

template <typename Row>
void normalize_row(Row &&row) {
  const double s = row.sum();
  if (s > 0) row /= s;
}

}  // namespace

HmmModel m_step(const ExpectedCounts &counts, HmmModel model) {
  const auto n = model.num_states();
  const double floor = model.options.floor;
  for (Eigen::Index i = 0; i < n; ++i) {
    reestimate_row(counts.transitions.row(i), model.allowed.row(i), floor,
                   model.transitions.row(i));
    reestimate_row(counts.emissions.row(i),
                   Eigen::Matrix<bool, 1, Eigen::Dynamic>::Constant(
                       model.emissions.cols(), true),
                   floor, model.emissions.row(i));
  }
  reestimate_row(counts.initial, model.initial_allowed, floor, model.initial);

  if (model.config.t_sharing) apply_transition_sharing(model);
  if (model.config.e_sharing_hmm)
    apply_emission_sharing(model, EmissionSharing::kSlotValues);
  if (model.config.fillers == FillerMode::kAllShared)
    apply_emission_sharing(model, EmissionSharing::kFillersAll);
  if (model.config.fillers == FillerMode::kSlotShared)
    apply_emission_sharing(model, EmissionSharing::kFillersSlot);
  return model;
}

namespace {

// Slot-level identity of a state: (frame type, slot, kind).
using SlotKey = std::tuple<int, int, int>;

SlotKey slot_key(const HmmState &s) {
  const int slot = s.kind == StateKind::kFrameType ? -1 : s.ref.slot;
  return {s.frame_type, slot, static_cast<int>(s.kind)};
}

}  // namespace

void apply_transition_sharing(HmmModel &model) {
  const auto n = model.num_states();
  using Cell = std::pair<Eigen::Index, Eigen::Index>;
  std::map<std::pair<SlotKey, SlotKey>, std::vector<Cell>> groups;
  std::map<SlotKey, std::vector<Eigen::Index>> initial_groups;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &si = model.states[static_cast<std::size_t>(i)];
    if (model.initial_allowed(i)) initial_groups[slot_key(si)].push_back(i);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto &sj = model.states[static_cast<std::size_t>(j)];
      if (model.allowed(i, j))
        groups[{slot_key(si), slot_key(sj)}].push_back({i, j});
    }
  }

  auto tie = [&] {
    for (const auto &[_, cells] : groups) {
      double mean = 0;
      for (const auto &[i, j] : cells) mean += model.transitions(i, j);
      mean /= static_cast<double>(cells.size());
      for (const auto &[i, j] : cells) model.transitions(i, j) = mean;
    }
    for (const auto &[_, members] : initial_groups) {
      double mean = 0;
      for (auto i : members) mean += model.initial(i);
      mean /= static_cast<double>(members.size());
      for (auto i : members) model.initial(i) = mean;
    }
  };
  tie();
  for (Eigen::Index i = 0; i < n; ++i) normalize_row(model.transitions.row(i));
  normalize_row(model.initial);
  // Normalization can perturb tied entries in the last bit; restore equality.
  tie();
}

void apply_emission_sharing(HmmModel &model, EmissionSharing mode) {
  std::vector<std::vector<Eigen::Index>> groups;
  const auto &schema = model.schema;
  switch (mode) {
    case EmissionSharing::kSlotValues: {
      std::map<SlotValueRef, Eigen::Index> index;
      for (std::size_t i = 0; i < model.states.size(); ++i)
        if (model.states[i].kind == StateKind::kSlotValue)
          index[model.states[i].ref] = static_cast<Eigen::Index>(i);
      for (const auto &set : schema.shared_sets()) {
        const int ft = *schema.frame_type_index(set.frame_type);
        const int first = *schema.slot_index(ft, set.slots.front());
        for (const auto &value : schema.slot(ft, first).values) {
          std::vector<Eigen::Index> members;
          for (const auto &slot : set.slots) {
            const int si = *schema.slot_index(ft, slot);
            SlotValueRef ref{ft, si, *schema.value_index(ft, si, value)};
            if (auto it = index.find(ref); it != index.end())
              members.push_back(it->second);
          }
          if (members.size() > 1) groups.push_back(std::move(members));
        }
      }
      break;
    }
    case EmissionSharing::kFillersAll: {
      std::vector<Eigen::Index> members;
      for (std::size_t i = 0; i < model.states.size(); ++i)
        if (model.states[i].kind == StateKind::kFiller)
          members.push_back(static_cast<Eigen::Index>(i));
      if (members.size() > 1) groups.push_back(std::move(members));
      break;
    }
    case EmissionSharing::kFillersSlot: {
      std::map<std::pair<int, int>, std::vector<Eigen::Index>> by_slot;
      for (std::size_t i = 0; i < model.states.size(); ++i) {
        const auto &s = model.states[i];
        if (s.kind == StateKind::kFiller)
          by_slot[{s.frame_type, s.ref.slot}].push_back(
              static_cast<Eigen::Index>(i));
      }
      for (auto &[_, members] : by_slot)
        if (members.size() > 1) groups.push_back(std::move(members));
      break;
    }
  }
  for (const auto &members : groups) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(model.emissions.cols());
    for (auto i : members) mean += model.emissions.row(i);
    mean /= static_cast<double>(members.size());
    mean /= mean.sum();
    for (auto i : members) model.emissions.row(i) = mean;
  }
}

std::pair<HmmModel, TrainingTrace> train(HmmModel model,
                                         std::span<const CorpusEntry> train,
                                         Granularity granularity,
                                         int iterations) {
  if (train.empty()) throw ValidationError("empty training slice");
  std::vector<std::vector<int>> encoded;
  encoded.reserve(train.size());
  for (const auto &e : train)
    encoded.push_back(model.encode(segment(e.utterance, granularity)));

  TrainingTrace trace;
  for (int it = 0; it < iterations; ++it) {
    ExpectedCounts total = ExpectedCounts::zeros(model);
    for (std::size_t k = 0; k < train.size(); ++k)
      total += e_step(model, encoded[k], train[k].automatic_frame);
    trace.log_likelihood.push_back(total.log_likelihood);
    trace.skipped += total.skipped;
    model = m_step(total, std::move(model));
    ++trace.iterations;
  }
  return {std::move(model), std::move(trace)};
}

// ---------------------------------------------------------------------------

namespace {

const char *kind_name(StateKind k) {
  switch (k) {
    case StateKind::kSlotValue: return "slot_value";
    case StateKind::kFiller: return "filler";
    case StateKind::kFrameType: return "frame_type";
  }
  return "?";
}

json matrix_json(const Eigen::MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json &j, Eigen::Index rows,
                                 Eigen::Index cols, const char *what) {
  if (static_cast<Eigen::Index>(j.size()) != rows)
    throw ValidationError(std::string("model: bad row count for ") + what);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto &r = j[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(r.size()) != cols)
      throw ValidationError(std::string("model: bad column count for ") + what);
    for (Eigen::Index k = 0; k < cols; ++k)
      m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

}  // namespace

json HmmModel::to_json() const {
  json st = json::array();
  for (const auto &s : states) {
    json js = {{"label", s.label},
               {"kind", kind_name(s.kind)},
               {"frame_type", schema.frame_type(s.frame_type).name},
               {"observed", s.observed}};
    if (s.kind != StateKind::kFrameType) {
      js["slot"] = schema.slot(s.ref.frame_type, s.ref.slot).name;
      js["value"] = schema.value(s.ref);
    }
    if (s.kind == StateKind::kFiller) js["owner"] = s.owner;
    st.push_back(std::move(js));
  }
  json init = json::array();
  for (Eigen::Index i = 0; i < initial.size(); ++i) init.push_back(initial(i));
  return {{"format", "frameforge-hmm"},
          {"version", 1},
          {"schema", schema.to_json()},
          {"config", config.to_json()},
          {"options", options.to_json()},
          {"vocabulary", vocabulary},
          {"states", st},
          {"initial", init},
          {"transitions", matrix_json(transitions)},
          {"emissions", matrix_json(emissions)}};
}

HmmModel HmmModel::from_json(const json &j) {
  try {
    if (j.value("format", std::string()) != "frameforge-hmm")
      throw ValidationError("not a frameforge HMM document");
    HmmModel m;
    m.schema = FrameSchema::from_json(j.at("schema"));
    m.config = SharingConfig::from_json(j.at("config"));
    m.options = HmmOptions::from_json(j.at("options"));
    m.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
    if (!std::is_sorted(m.vocabulary.begin(), m.vocabulary.end()))
      throw ValidationError("model vocabulary must be sorted");
    for (const auto &js : j.at("states")) {
      HmmState s;
      const auto kind = js.at("kind").get<std::string>();
      s.kind = kind == "slot_value" ? StateKind::kSlotValue
               : kind == "filler"   ? StateKind::kFiller
                                    : StateKind::kFrameType;
      auto ft = m.schema.frame_type_index(js.at("frame_type").get<std::string>());
      if (!ft) throw ValidationError("model state with unknown frame type");
      s.frame_type = *ft;
      if (s.kind != StateKind::kFrameType) {
        auto si = m.schema.slot_index(*ft, js.at("slot").get<std::string>());
        if (!si) throw ValidationError("model state with unknown slot");
        auto vi = m.schema.value_index(*ft, *si, js.at("value").get<std::string>());
        if (!vi) throw ValidationError("model state with unknown value");
        s.ref = {*ft, *si, *vi};
      }
      s.owner = js.value("owner", -1);
      s.observed = js.value("observed", false);
      s.label = js.at("label").get<std::string>();
      m.states.push_back(std::move(s));
    }
    const auto n = m.num_states();
    for (const auto &s : m.states)
      if (s.kind == StateKind::kFiller && (s.owner < 0 || s.owner >= n))
        throw ValidationError("filler state with invalid owner");
    const auto init = j.at("initial").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(init.size()) != n)
      throw ValidationError("model: bad initial distribution size");
    m.initial = Eigen::Map<const Eigen::VectorXd>(init.data(), n);
    m.transitions = matrix_from_json(j.at("transitions"), n, n, "transitions");
    m.emissions = matrix_from_json(j.at("emissions"), n,
                                   static_cast<Eigen::Index>(m.vocabulary.size()),
                                   "emissions");
    derive_structure(m);
    return m;
  } catch (const json::exception &e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
}

}  // namespace frameforge
