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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace leafbg {

/// Retained classes, in the fixed one-hot order used everywhere.
enum class Label : std::uint8_t { healthy = 0, rust = 1, scab = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels{Label::healthy, Label::rust, Label::scab};

constexpr std::size_t index_of(Label label) noexcept { return static_cast<std::size_t>(label); }
Label label_from_index(std::size_t index);

std::string_view to_string(Label label) noexcept;
/// Throws DataError on anything other than healthy/rust/scab.
Label parse_label(std::string_view text);

enum class Split : std::uint8_t { train, val, test, unassigned };

std::string_view to_string(Split split) noexcept;
Split parse_split(std::string_view text);

}  // namespace leafbg
