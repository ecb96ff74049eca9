// src/decode.cpp

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

#include "frameforge/decode.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

namespace frameforge {

using nlohmann::json;

namespace {

// Articulatory features per symbol. Vowels: {0, height, backness, rounding,
// length}; consonants: {1, place, manner, voicing, 0}.
using Features = std::array<int, 5>;

const std::map<std::string, Features, std::less<>> &feature_table() {
  static const std::map<std::string, Features, std::less<>> table = {
      // vowels: height 0 high .. 3 low; backness 0 front, 1 central, 2 back
      {"i", {0, 0, 0, 0, 0}},  {"i:", {0, 0, 0, 0, 1}}, {"I", {0, 1, 0, 0, 0}},
      {"y", {0, 0, 0, 1, 0}},  {"y:", {0, 0, 0, 1, 1}}, {"Y", {0, 1, 1, 1, 0}},
      {"Y~", {0, 1, 1, 1, 1}}, {"e", {0, 1, 0, 0, 1}},  {"e:", {0, 1, 0, 0, 1}},
      {"E", {0, 2, 0, 0, 0}},  {"E:", {0, 2, 0, 0, 1}}, {"E~", {0, 2, 0, 0, 1}},
      {"2", {0, 1, 0, 1, 1}},  {"2:", {0, 1, 0, 1, 1}}, {"9", {0, 2, 0, 1, 0}},
      {"9:", {0, 2, 0, 1, 1}}, {"@", {0, 2, 1, 0, 0}},  {"a", {0, 3, 1, 0, 1}},
      {"a:", {0, 3, 1, 0, 1}}, {"A", {0, 3, 2, 0, 0}},  {"A~", {0, 3, 2, 0, 1}},
      {"u", {0, 0, 2, 1, 0}},  {"u:", {0, 0, 2, 1, 1}}, {"o", {0, 1, 2, 1, 1}},
      {"o:", {0, 1, 2, 1, 1}}, {"O", {0, 2, 2, 1, 0}},  {"O:", {0, 2, 2, 1, 1}},
      {"O~", {0, 2, 2, 1, 1}}, {"M", {0, 3, 2, 1, 0}},
      // consonants: place 0 labial, 1 labiodental, 2 alveolar, 3 postalveolar,
      // 4 palatal, 5 velar, 6 uvular, 7 glottal; manner 0 stop, 1 fricative,
      // 2 nasal, 3 lateral, 4 rhotic, 5 glide
      {"p", {1, 0, 0, 0, 0}},  {"b", {1, 0, 0, 1, 0}},  {"t", {1, 2, 0, 0, 0}},
      {"d", {1, 2, 0, 1, 0}},  {"k", {1, 5, 0, 0, 0}},  {"g", {1, 5, 0, 1, 0}},
      {"f", {1, 1, 1, 0, 0}},  {"v", {1, 1, 1, 1, 0}},  {"s", {1, 2, 1, 0, 0}},
      {"z", {1, 2, 1, 1, 0}},  {"S", {1, 3, 1, 0, 0}},  {"Z", {1, 3, 1, 1, 0}},
      {"x", {1, 5, 1, 0, 0}},  {"X", {1, 6, 1, 0, 0}},  {"G", {1, 5, 1, 1, 0}},
      {"h", {1, 7, 1, 1, 0}},  {"m", {1, 0, 2, 1, 0}},  {"n", {1, 2, 2, 1, 0}},
      {"N", {1, 5, 2, 1, 0}},  {"J", {1, 4, 2, 1, 0}},  {"l", {1, 2, 3, 1, 0}},
      {"r", {1, 2, 4, 1, 0}},  {"R", {1, 6, 4, 1, 0}},  {"w", {1, 1, 5, 1, 0}},
      {"j", {1, 4, 5, 1, 0}},
  };
  return table;
}

template <typename Cost>
double weighted_levenshtein(const std::vector<std::string> &a,
                            const std::vector<std::string> &b, Cost &&sub) {
  std::vector<double> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<double>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<double>(i);
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                         prev[j - 1] + sub(a[i - 1], b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

bool in_vocabulary(std::span<const std::string> vocabulary,
                   const std::string &unit) {
  return std::binary_search(vocabulary.begin(), vocabulary.end(), unit);
}

}  // namespace

double feature_substitution_cost(std::string_view a, std::string_view b) {
  if (a == b) return 0;
  const auto &table = feature_table();
  auto fa = table.find(a), fb = table.find(b);
  if (fa == table.end() || fb == table.end()) return 1;
  int differ = 0;
  for (std::size_t k = 0; k < fa->second.size(); ++k)
    differ += fa->second[k] != fb->second[k];
  return static_cast<double>(differ) / static_cast<double>(fa->second.size());
}

double symbol_edit_distance(std::string_view a, std::string_view b) {
  return weighted_levenshtein(
      phoneme_symbols(a), phoneme_symbols(b),
      [](const std::string &x, const std::string &y) { return x == y ? 0.0 : 1.0; });
}

double feature_edit_distance(std::string_view a, std::string_view b) {
  return weighted_levenshtein(
      phoneme_symbols(a), phoneme_symbols(b),
      [](const std::string &x, const std::string &y) {
        return feature_substitution_cost(x, y);
      });
}

std::string to_string(UnknownUnits mode) {
  switch (mode) {
    case UnknownUnits::kMapEdit: return "edit";
    case UnknownUnits::kMapFeature: return "feature";
    case UnknownUnits::kIgnore: return "ignore";
  }
  return "?";
}

UnknownUnits unknown_units_from_string(std::string_view s) {
  if (s == "edit") return UnknownUnits::kMapEdit;
  if (s == "feature") return UnknownUnits::kMapFeature;
  if (s == "ignore") return UnknownUnits::kIgnore;
  throw ValidationError("unknown unknown-unit mode '" + std::string(s) + "'");
}

SegmentedCommand map_unknown_units(const SegmentedCommand &command,
                                   std::span<const std::string> vocabulary,
                                   const UnitDistance &distance) {
  if (vocabulary.empty()) throw ValidationError("empty vocabulary");
  SegmentedCommand out = command;
  for (auto &unit : out.units) {
    if (in_vocabulary(vocabulary, unit)) continue;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < vocabulary.size(); ++k) {
      const double d = distance(unit, vocabulary[k]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    unit = vocabulary[best];
  }
  return out;
}

SegmentedCommand drop_unknown_units(const SegmentedCommand &command,
                                    std::span<const std::string> vocabulary,
                                    const UnitDistance &fallback) {
  SegmentedCommand out{command.granularity, {}};
  for (const auto &unit : command.units)
    if (in_vocabulary(vocabulary, unit)) out.units.push_back(unit);
  if (out.units.empty()) return map_unknown_units(command, vocabulary, fallback);
  return out;
}

// ---------------------------------------------------------------------------

json DecodeOptions::to_json() const {
  return {{"threshold", threshold},
          {"unknown_units", to_string(unknown)},
          {"posterior", posterior == PosteriorMode::kEmission ? "emission"
                                                              : "forward-backward"},
          {"accumulation", accumulation == Accumulation::kAllPositions
                               ? "all-positions"
                               : "path-restricted"}};
}

DecodeOptions DecodeOptions::from_json(const json &j) {
  DecodeOptions o;
  for (const auto &[key, _] : j.items())
    if (key != "threshold" && key != "unknown_units" && key != "posterior" &&
        key != "accumulation")
      throw ValidationError("unknown decode option '" + key + "'");
  o.threshold = j.value("threshold", o.threshold);
  o.unknown = unknown_units_from_string(j.value("unknown_units", std::string("edit")));
  const auto posterior = j.value("posterior", std::string("emission"));
  if (posterior == "emission") {
    o.posterior = PosteriorMode::kEmission;
  } else if (posterior == "forward-backward") {
    o.posterior = PosteriorMode::kForwardBackward;
  } else {
    throw ValidationError("unknown posterior mode '" + posterior + "'");
  }
  const auto acc = j.value("accumulation", std::string("all-positions"));
  if (acc == "all-positions") {
    o.accumulation = Accumulation::kAllPositions;
  } else if (acc == "path-restricted") {
    o.accumulation = Accumulation::kPathRestricted;
  } else {
    throw ValidationError("unknown accumulation mode '" + acc + "'");
  }
  return o;
}

json DecodeResult::to_json(bool explain) const {
  json j = frame_to_json(frame);
  if (explain) {
    j["path"] = path_labels;
    j["units"] = units;
    j["totals"] = totals;
  }
  return j;
}

std::vector<int> viterbi(const HmmModel &model, std::span<const int> units) {
  if (units.empty()) throw DecodeError("cannot decode an empty command");
  auto path = viterbi_path(model.initial, model.transitions, model.emissions,
                           units);
  if (path.empty()) throw DecodeError("no state path has non-zero probability");
  const int ft = model.states[static_cast<std::size_t>(path.front())].frame_type;
  for (int s : path)
    if (model.states[static_cast<std::size_t>(s)].frame_type != ft)
      throw DecodeError("state path crosses frame types; corrupt model");
  return path;
}

FillResult fill_frame(const HmmModel &model, std::span<const int> units,
                      std::span<const int> path, const DecodeOptions &options) {
  if (path.size() != units.size())
    throw DecodeError("path and command lengths differ");
  FillResult out;
  if (path.empty()) return out;
  const auto &schema = model.schema;
  const int ft = model.states[static_cast<std::size_t>(path.front())].frame_type;
  out.frame.type = schema.frame_type(ft).name;

  const auto n = model.num_states();
  BoolVector in_type = BoolVector::Constant(n, false);
  for (Eigen::Index i = 0; i < n; ++i)
    in_type(i) = model.states[static_cast<std::size_t>(i)].frame_type == ft;

  const auto len = static_cast<Eigen::Index>(units.size());
  Eigen::MatrixXd posterior(n, len);
  if (options.posterior == PosteriorMode::kEmission) {
    for (Eigen::Index t = 0; t < len; ++t) {
      Eigen::VectorXd p = model.emissions.col(units[static_cast<std::size_t>(t)]);
      for (Eigen::Index i = 0; i < n; ++i)
        if (!in_type(i)) p(i) = 0;
      const double s = p.sum();
      posterior.col(t) = s > 0 ? Eigen::VectorXd(p / s) : Eigen::VectorXd::Zero(n);
    }
  } else {
    const auto lat = forward_backward(model.initial, model.transitions,
                                      model.emissions, units, &in_type);
    if (!lat.valid()) throw DecodeError("command impossible under the model");
    for (Eigen::Index t = 0; t < len; ++t) {
      Eigen::VectorXd g = lat.alpha.col(t).cwiseProduct(lat.beta.col(t));
      posterior.col(t) = g / g.sum();
    }
  }

  // Accumulate per slot-value state.
  std::vector<double> total(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index t = 0; t < len; ++t) {
    const auto &on_path = model.states[static_cast<std::size_t>(path[static_cast<std::size_t>(t)])];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto &s = model.states[static_cast<std::size_t>(i)];
      if (!in_type(i) || s.kind != StateKind::kSlotValue) continue;
      if (options.accumulation == Accumulation::kPathRestricted &&
          !(on_path.kind == StateKind::kSlotValue && on_path.ref.slot == s.ref.slot))
        continue;
      total[static_cast<std::size_t>(i)] += posterior(i, t);
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &s = model.states[static_cast<std::size_t>(i)];
    if (in_type(i) && s.kind == StateKind::kSlotValue)
      out.totals[s.label] = total[static_cast<std::size_t>(i)];
  }

  // Candidates per slot: slot-value states visited by the path.
  std::map<int, int> best;  // slot -> state
  for (int s : std::set<int>(path.begin(), path.end())) {
    const auto &st = model.states[static_cast<std::size_t>(s)];
    if (st.kind != StateKind::kSlotValue) continue;
    auto it = best.find(st.ref.slot);
    if (it == best.end()) {
      best[st.ref.slot] = s;
      continue;
    }
    const auto &cur = model.states[static_cast<std::size_t>(it->second)];
    const double a = total[static_cast<std::size_t>(s)];
    const double b = total[static_cast<std::size_t>(it->second)];
    if (a > b || (a == b && st.ref.value < cur.ref.value)) it->second = s;
  }
  for (const auto &[slot, s] : best) {
    if (total[static_cast<std::size_t>(s)] < options.threshold) continue;
    const auto &st = model.states[static_cast<std::size_t>(s)];
    out.frame.fills[schema.slot(ft, slot).name] = {schema.value(st.ref)};
  }
  return out;
}

DecodeResult decode(const HmmModel &model, const SegmentedCommand &command,
                    const DecodeOptions &options) {
  if (model.vocabulary.empty()) throw DecodeError("model has an empty vocabulary");
  if (command.units.empty()) throw DecodeError("cannot decode an empty command");
  const UnitDistance distance =
      options.unknown == UnknownUnits::kMapFeature
          ? UnitDistance(feature_edit_distance)
          : UnitDistance(symbol_edit_distance);
  const auto known =
      options.unknown == UnknownUnits::kIgnore
          ? drop_unknown_units(command, model.vocabulary, distance)
          : map_unknown_units(command, model.vocabulary, distance);
  const auto units = model.encode(known);

  DecodeResult r;
  r.units = known.units;
  r.path = viterbi(model, units);
  for (int s : r.path)
    r.path_labels.push_back(model.states[static_cast<std::size_t>(s)].label);
  auto filled = fill_frame(model, units, r.path, options);
  r.frame = std::move(filled.frame);
  r.totals = std::move(filled.totals);
  r.frame_type = r.frame.type;
  return r;
}

}  // namespace frameforge
