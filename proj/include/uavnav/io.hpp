#pragma once

// Small text helpers shared by every file format. Doubles are written in their
// shortest round-trip form so that write -> read is exact and output bytes do not
// depend on stream state.

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace uavnav::io {

std::string fmt(double v);
std::string join(std::span<const double> values, char sep = ',');
std::vector<std::string> split(std::string_view s, char sep);

double parse_double(std::string_view s);
long long parse_int(std::string_view s);

/// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);
std::string file_sha256_hex(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames, so a failed run never leaves a
/// partial file behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace uavnav::io
