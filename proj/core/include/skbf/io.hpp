#pragma once

#include <string>
#include <string_view>

namespace skbf::io {

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers see either the old file or the complete new one. Creates missing
/// parent directories. Throws IoError.
void write_file_atomic(const std::string& path, std::string_view content);

/// Whole-file read. Throws IoError.
std::string read_file(const std::string& path);

}  // namespace skbf::io
