/**
 * Copyright 2026 The leafbg Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "leafbg/labels.hpp"

#include <string>

#include "leafbg/error.hpp"

namespace leafbg {

Label label_from_index(std::size_t index) {
  if (index >= kNumClasses) {
    throw DataError("class index out of range: " + std::to_string(index));
  }
  return kAllLabels[index];
}

std::string_view to_string(Label label) noexcept {
  switch (label) {
    case Label::healthy:
      return "healthy";
    case Label::rust:
      return "rust";
    case Label::scab:
      return "scab";
  }
  return "unknown";
}

Label parse_label(std::string_view text) {
  for (Label label : kAllLabels) {
    if (text == to_string(label)) {
      return label;
    }
  }
  throw DataError("unknown label: '" + std::string(text) + "'");
}

std::string_view to_string(Split split) noexcept {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
    case Split::unassigned:
      return "unassigned";
  }
  return "unknown";
}

Split parse_split(std::string_view text) {
  for (Split split : {Split::train, Split::val, Split::test, Split::unassigned}) {
    if (text == to_string(split)) {
      return split;
    }
  }
  throw DataError("unknown split: '" + std::string(text) + "'");
}

}  // namespace leafbg
