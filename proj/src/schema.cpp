// src/schema.cpp

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

#include "frameforge/schema.hpp"

#include <algorithm>

namespace frameforge {

using nlohmann::json;

FrameSchema::FrameSchema(std::vector<FrameTypeDef> frame_types,
                         std::vector<SharedExpressionSet> shared_sets)
    : frame_types_(std::move(frame_types)),
      shared_sets_(std::move(shared_sets)) {
  validate();
}

void FrameSchema::validate() const {
  std::set<std::string> type_names;
  for (const auto &ft : frame_types_) {
    if (ft.name.empty()) throw ValidationError("frame type with empty name");
    if (!type_names.insert(ft.name).second)
      throw ValidationError("duplicate frame type '" + ft.name + "'");
    std::set<std::string> slot_names;
    for (const auto &s : ft.slots) {
      if (s.name.empty())
        throw ValidationError("slot with empty name in frame type '" +
                              ft.name + "'");
      if (!slot_names.insert(s.name).second)
        throw ValidationError("duplicate slot '" + s.name +
                              "' in frame type '" + ft.name + "'");
      if (s.values.empty())
        throw ValidationError("slot '" + s.name + "' has no legal values");
      std::set<std::string> vals(s.values.begin(), s.values.end());
      if (vals.size() != s.values.size())
        throw ValidationError("slot '" + s.name + "' lists a value twice");
    }
  }
  for (const auto &set : shared_sets_) {
    auto ft = frame_type_index(set.frame_type);
    if (!ft)
      throw ValidationError("shared set refers to unknown frame type '" +
                            set.frame_type + "'");
    if (set.slots.size() < 2)
      throw ValidationError("shared set needs at least two slots");
    const std::vector<std::string> *first_values = nullptr;
    for (const auto &name : set.slots) {
      auto s = slot_index(*ft, name);
      if (!s)
        throw ValidationError("shared set refers to unknown slot '" + name +
                              "'");
      const auto &values = frame_types_[*ft].slots[*s].values;
      if (first_values == nullptr) {
        first_values = &values;
      } else {
        std::set<std::string> a(first_values->begin(), first_values->end());
        std::set<std::string> b(values.begin(), values.end());
        if (a != b)
          throw ValidationError("shared set slot '" + name +
                                "' has a different value set");
      }
    }
  }
}

std::optional<int> FrameSchema::frame_type_index(
    const std::string &name) const {
  for (std::size_t i = 0; i < frame_types_.size(); ++i)
    if (frame_types_[i].name == name) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> FrameSchema::slot_index(int frame_type,
                                           const std::string &slot) const {
  const auto &slots = frame_types_.at(frame_type).slots;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].name == slot) return static_cast<int>(i);
  return std::nullopt;
}

std::optional<int> FrameSchema::value_index(int frame_type, int slot,
                                            const std::string &value) const {
  const auto &values = this->slot(frame_type, slot).values;
  auto it = std::find(values.begin(), values.end(), value);
  if (it == values.end()) return std::nullopt;
  return static_cast<int>(it - values.begin());
}

std::string FrameSchema::label(const SlotValueRef &ref) const {
  const auto &slot_name = slot(ref.frame_type, ref.slot).name;
  int owners = 0;
  for (std::size_t ft = 0; ft < frame_types_.size(); ++ft)
    if (slot_index(static_cast<int>(ft), slot_name)) ++owners;
  std::string base = slot_name + "=" + value(ref);
  if (owners > 1) return frame_types_[ref.frame_type].name + "." + base;
  return base;
}

std::vector<int> FrameSchema::expression_partners(int frame_type,
                                                  int slot) const {
  std::vector<int> partners;
  const auto &ft_name = frame_types_.at(frame_type).name;
  const auto &slot_name = this->slot(frame_type, slot).name;
  for (const auto &set : shared_sets_) {
    if (set.frame_type != ft_name) continue;
    if (std::find(set.slots.begin(), set.slots.end(), slot_name) ==
        set.slots.end())
      continue;
    for (const auto &other : set.slots) {
      int idx = *slot_index(frame_type, other);
      if (idx != slot &&
          std::find(partners.begin(), partners.end(), idx) == partners.end())
        partners.push_back(idx);
    }
  }
  std::sort(partners.begin(), partners.end());
  return partners;
}

std::vector<SlotValueRef> FrameSchema::shared_closure(
    const SlotValueRef &ref) const {
  std::vector<SlotValueRef> out{ref};
  const auto &val = value(ref);
  for (int partner : expression_partners(ref.frame_type, ref.slot)) {
    auto vi = value_index(ref.frame_type, partner, val);
    if (vi) out.push_back({ref.frame_type, partner, *vi});
  }
  std::sort(out.begin(), out.end());
  return out;
}

json FrameSchema::to_json() const {
  json types = json::array();
  for (const auto &ft : frame_types_) {
    json slots = json::array();
    for (const auto &s : ft.slots)
      slots.push_back(
          {{"name", s.name}, {"long_name", s.long_name}, {"values", s.values}});
    types.push_back({{"name", ft.name}, {"slots", slots}});
  }
  json sets = json::array();
  for (const auto &s : shared_sets_)
    sets.push_back({{"frame_type", s.frame_type}, {"slots", s.slots}});
  return {{"frame_types", types}, {"shared_sets", sets}};
}

FrameSchema FrameSchema::from_json(const json &j) {
  try {
    std::vector<FrameTypeDef> types;
    for (const auto &jt : j.at("frame_types")) {
      FrameTypeDef ft;
      ft.name = jt.at("name").get<std::string>();
      for (const auto &js : jt.value("slots", json::array())) {
        SlotDef s;
        s.name = js.at("name").get<std::string>();
        s.long_name = js.value("long_name", s.name);
        for (const auto &v : js.at("values"))
          s.values.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        ft.slots.push_back(std::move(s));
      }
      types.push_back(std::move(ft));
    }
    std::vector<SharedExpressionSet> sets;
    for (const auto &js : j.value("shared_sets", json::array()))
      sets.push_back({js.at("frame_type").get<std::string>(),
                      js.at("slots").get<std::vector<std::string>>()});
    return FrameSchema(std::move(types), std::move(sets));
  } catch (const json::exception &e) {
    throw ValidationError(std::string("malformed schema: ") + e.what());
  }
}

namespace {

std::vector<std::string> range_values(int lo, int hi) {
  std::vector<std::string> v;
  for (int i = lo; i <= hi; ++i) v.push_back(std::to_string(i));
  return v;
}

}  // namespace

const FrameSchema &patience_schema() {
  static const FrameSchema schema = [] {
    const std::vector<std::string> suits{"h", "d", "s", "c"};
    FrameTypeDef move{"movecard",
                      {
                          {"FS", "from_suit", suits},
                          {"FV", "from_value", range_values(1, 13)},
                          {"FF", "from_foundation", range_values(1, 4)},
                          {"FC", "from_column", range_values(1, 7)},
                          {"FH", "from_hand", {"1"}},
                          {"TS", "target_suit", suits},
                          {"TV", "target_value", range_values(1, 13)},
                          {"TF", "target_foundation", range_values(1, 4)},
                          {"TC", "target_column", range_values(1, 7)},
                      }};
    FrameTypeDef deal{"dealcard", {}};
    return FrameSchema({move, deal}, {{"movecard", {"FS", "TS"}},
                                      {"movecard", {"FV", "TV"}},
                                      {"movecard", {"FF", "TF"}},
                                      {"movecard", {"FC", "TC"}}});
  }();
  return schema;
}

void validate_frame(const Frame &frame, const FrameSchema &schema,
                    bool single_valued) {
  auto ft = schema.frame_type_index(frame.type);
  if (!ft) throw ValidationError("unknown frame type '" + frame.type + "'");
  for (const auto &[slot, values] : frame.fills) {
    auto si = schema.slot_index(*ft, slot);
    if (!si)
      throw ValidationError("slot '" + slot + "' is not part of frame type '" +
                            frame.type + "'");
    if (values.empty())
      throw ValidationError("slot '" + slot + "' has an empty value set");
    if (single_valued && values.size() != 1)
      throw ValidationError("slot '" + slot +
                            "' must carry exactly one value");
    for (const auto &v : values)
      if (!schema.value_index(*ft, *si, v))
        throw ValidationError("illegal value '" + v + "' for slot '" + slot +
                              "'");
  }
}

json frame_to_json(const Frame &frame) {
  json fills = json::object();
  for (const auto &[slot, values] : frame.fills) {
    json arr = json::array();
    for (const auto &v : values) arr.push_back(v);
    fills[slot] = arr;
  }
  return {{"type", frame.type}, {"fills", fills}};
}

Frame frame_from_json(const json &j) {
  Frame f;
  f.type = j.at("type").get<std::string>();
  if (j.contains("fills")) {
    for (const auto &[slot, values] : j.at("fills").items()) {
      std::set<std::string> vs;
      if (values.is_array()) {
        for (const auto &v : values)
          vs.insert(v.is_string() ? v.get<std::string>() : v.dump());
      } else {
        vs.insert(values.is_string() ? values.get<std::string>()
                                     : values.dump());
      }
      f.fills[slot] = std::move(vs);
    }
  }
  return f;
}

}  // namespace frameforge
