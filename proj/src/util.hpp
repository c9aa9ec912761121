#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace edre {

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

// RFC 3339 timestamps, seconds precision, UTC. Parsing accepts 'Z' or a
// numeric offset and ignores fractional seconds; formatting always emits Z.
int64_t parse_rfc3339(std::string_view s);
std::string format_rfc3339(int64_t epoch_seconds);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Fixed-format float rendering ("%.4f" etc.); all human/CSV output goes
// through this so repeated runs are byte-identical.
std::string format_double(double v, int decimals);

}  // namespace edre
