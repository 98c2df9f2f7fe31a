#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace dmflow::csv {

// Splits one CSV record. Fields containing commas, quotes or newlines must be
// double-quoted; embedded quotes are doubled.
std::vector<std::string> split_row(std::string_view line);

std::string quote_if_needed(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Reads all rows, returning them without the header. Throws ParseError when
// the header does not match `expected_header` exactly.
std::vector<std::vector<std::string>> read_rows(std::istream& in,
                                                const std::string& expected_header);

}  // namespace dmflow::csv
