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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace leafbg::csv {

/// A parsed CSV file: header cells plus data rows. Quoted fields are not
/// supported; none of the formats read here need them.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index for a header name; throws DataError if absent.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::string_view text, std::string_view source = "<memory>");

/// Joins cells with commas; rejects cells containing commas or newlines.
std::string format_row(const std::vector<std::string>& cells);

/// Writes header and rows with '\n' line endings. Creates parent directories.
void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

/// Throws DataError unless `table.header` equals `expected` exactly.
void require_header(const Table& table, const std::vector<std::string>& expected,
                    std::string_view source);

}  // namespace leafbg::csv
