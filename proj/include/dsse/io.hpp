#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace dsse {

/// Read a whole file; throws Error if it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

/// Write through a sibling temporary and rename into place, so readers
/// never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace dsse
