#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace vpoll::csv {

/// One parsed record and the 1-based line it started on.
struct Record {
  std::size_t line = 0;
  std::vector<std::string> fields;
};

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and newlines.
/// Lines starting with '#' outside a record are provenance comments and skipped.
std::vector<Record> read_all(std::istream& in);
std::vector<Record> read_file(const std::filesystem::path& path);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

std::string trim(std::string_view s);

}  // namespace vpoll::csv
