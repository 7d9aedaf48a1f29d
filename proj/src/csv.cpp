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

#include "leafbg/csv.hpp"

#include <fstream>
#include <sstream>

#include "leafbg/error.hpp"
#include "leafbg/io.hpp"

namespace leafbg::csv {

namespace {

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.emplace_back(line.substr(start));
      break;
    }
    cells.emplace_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return cells;
}

}  // namespace

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw DataError("missing CSV column '" + std::string(name) + "'");
}

Table parse(std::string_view text, std::string_view source) {
  Table table;
  bool have_header = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) {
      end = text.size();
    }
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      line.remove_suffix(1);
    }
    if (line.empty()) {
      continue;
    }
    auto cells = split_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != table.header.size()) {
      std::ostringstream msg;
      msg << source << ":" << line_no << ": expected " << table.header.size() << " cells, got "
          << cells.size();
      throw DataError(msg.str());
    }
    table.rows.push_back(std::move(cells));
  }
  return table;
}

Table read(const std::filesystem::path& path) {
  return parse(read_text_file(path), path.string());
}

std::string format_row(const std::vector<std::string>& cells) {
  std::string line;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\n\r") != std::string::npos) {
      throw DataError("CSV cell contains a separator: '" + cells[i] + "'");
    }
    if (i > 0) {
      line += ',';
    }
    line += cells[i];
  }
  return line;
}

void write(const std::filesystem::path& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows) {
  std::string text = format_row(header) + '\n';
  for (const auto& row : rows) {
    text += format_row(row);
    text += '\n';
  }
  write_text_file(path, text);
}

void require_header(const Table& table, const std::vector<std::string>& expected,
                    std::string_view source) {
  if (table.header != expected) {
    throw DataError(std::string(source) + ": unexpected header '" + format_row(table.header) +
                    "', expected '" + format_row(expected) + "'");
  }
}

}  // namespace leafbg::csv
