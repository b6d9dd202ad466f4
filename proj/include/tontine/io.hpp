#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tontine {

// Splits one CSV line on commas; fields are trimmed of surrounding space.
std::vector<std::string> split_csv(const std::string& line);

// strtod / strtol wrappers that reject trailing garbage and raise
// ParseError with `context` (typically "file:line") in the message.
double parse_double(const std::string& token, const std::string& context);
long parse_long(const std::string& token, const std::string& context);

// Whole-file helpers. read_lines strips trailing '\r'.
std::vector<std::string> read_lines(const std::string& path);
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// 64-bit FNV-1a over a byte buffer; used for artifact content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::string& path);
std::string hex64(std::uint64_t value);

// Shortest decimal representation that round-trips a double. All CSV and
// JSON artifacts use this so that re-runs are byte-identical.
std::string format_double(double value);

}  // namespace tontine
