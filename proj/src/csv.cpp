#include "mup/csv.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "mup/error.hpp"
#include "mup/text.hpp"

namespace mup {

std::size_t CsvTable::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw InvalidArgument("csv: no column '" + std::string(name) + "'");
}

std::string header_line(const CsvTable& table) {
  std::string out;
  for (std::size_t i = 0; i < table.header.size(); ++i) out += (i ? "," : "") + table.header[i];
  return out;
}

namespace {

void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (row[i].find_first_of(",\"\n\r") != std::string::npos)
      throw InvalidArgument("csv: field contains a separator: '" + row[i] + "'");
    if (i) out += ',';
    out += row[i];
  }
  out += '\n';
}

}  // namespace

std::string to_csv(const CsvTable& table) {
  if (table.header.empty()) throw InvalidArgument("csv: empty header");
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw InvalidArgument("csv: row width does not match header");
    append_row(out, row);
  }
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::size_t lineno = 0;
  for (std::string line : split(text, '\n')) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size())
      throw InvalidArgument("csv line " + std::to_string(lineno) + ": expected " +
                            std::to_string(table.header.size()) + " fields, got " + std::to_string(fields.size()));
    table.rows.push_back(std::move(fields));
  }
  if (table.header.empty()) throw InvalidArgument("csv: no header row");
  return table;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("failed reading '" + path.string() + "'");
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot replace '" + path.string() + "'");
  }
}

CsvTable read_csv(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  try {
    return parse_csv(text);
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path.string() + ": " + e.what());
  }
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) { write_file(path, to_csv(table)); }

}  // namespace mup
