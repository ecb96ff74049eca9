// include/frameforge/schema.hpp

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

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace frameforge {

/// Raised for any input that violates the frame schema or corpus contract.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SlotDef {
  std::string name;       // abbreviation, e.g. "FS"
  std::string long_name;  // e.g. "from_suit"
  std::vector<std::string> values;
};

struct FrameTypeDef {
  std::string name;
  std::vector<SlotDef> slots;
};

/// Slots of one frame type whose values are expressed by the same words.
struct SharedExpressionSet {
  std::string frame_type;
  std::vector<std::string> slots;
};

/// Addresses one legal slot value inside a schema by indices.
struct SlotValueRef {
  int frame_type = -1;
  int slot = -1;
  int value = -1;

  auto operator<=>(const SlotValueRef &) const = default;
};

class FrameSchema {
 public:
  FrameSchema() = default;
  FrameSchema(std::vector<FrameTypeDef> frame_types,
              std::vector<SharedExpressionSet> shared_sets);

  const std::vector<FrameTypeDef> &frame_types() const { return frame_types_; }
  const std::vector<SharedExpressionSet> &shared_sets() const {
    return shared_sets_;
  }

  std::optional<int> frame_type_index(const std::string &name) const;
  std::optional<int> slot_index(int frame_type, const std::string &slot) const;
  std::optional<int> value_index(int frame_type, int slot,
                                 const std::string &value) const;

  const FrameTypeDef &frame_type(int index) const {
    return frame_types_.at(index);
  }
  const SlotDef &slot(int frame_type, int slot) const {
    return frame_types_.at(frame_type).slots.at(slot);
  }
  const std::string &value(const SlotValueRef &ref) const {
    return slot(ref.frame_type, ref.slot).values.at(ref.value);
  }

  /// "FS=h"; qualified with the frame type ("movecard.FS=h") only when the
  /// slot name occurs in more than one frame type.
  std::string label(const SlotValueRef &ref) const;

  /// Slots sharing expressions with (frame_type, slot), excluding itself.
  std::vector<int> expression_partners(int frame_type, int slot) const;

  /// Every slot value reachable from `ref` through shared expression sets,
  /// including `ref` itself.
  std::vector<SlotValueRef> shared_closure(const SlotValueRef &ref) const;

  nlohmann::json to_json() const;
  static FrameSchema from_json(const nlohmann::json &j);

 private:
  void validate() const;

  std::vector<FrameTypeDef> frame_types_;
  std::vector<SharedExpressionSet> shared_sets_;
};

/// The bundled Patience schema: movecard (9 slots) and slotless dealcard.
const FrameSchema &patience_schema();

/// A frame type tag plus slot -> value-set assignments.
struct Frame {
  std::string type;
  std::map<std::string, std::set<std::string>> fills;

  std::size_t filled_slots() const { return fills.size(); }
  bool operator==(const Frame &) const = default;
};

/// Throws ValidationError naming the offending slot/value.
void validate_frame(const Frame &frame, const FrameSchema &schema,
                    bool single_valued);

nlohmann::json frame_to_json(const Frame &frame);
Frame frame_from_json(const nlohmann::json &j);

}  // namespace frameforge
