#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace basinlab {

/// Round-trip-exact decimal formatting for CSV cells; the same value always
/// produces the same bytes.
std::string csv_double(double v);

/// Plain comma split; fields never contain commas or quotes in our schemas.
std::vector<std::string> split_csv_line(const std::string& line);

/// FNV-1a 64-bit hex digest; used as the config provenance stamp embedded in
/// every output file.
std::string fnv1a_hex(std::string_view data);

/// Reads a whole file; throws ConfigError when missing.
std::string read_file(const std::string& path);

}  // namespace basinlab
