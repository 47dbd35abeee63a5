#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aclear {

struct ZipEntry {
  std::string name;
  std::string data;
};

/// Serializes entries, in the given order, as an uncompressed archive with a
/// fixed 1980-01-01 modification time, so equal inputs give equal bytes.
std::string build_zip(const std::vector<ZipEntry>& entries);

/// Reads stored and deflated members. Throws Error(CorruptBundle) on any
/// structural or checksum problem.
std::vector<ZipEntry> parse_zip(std::string_view bytes);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace aclear
