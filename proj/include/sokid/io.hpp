#pragma once

#include <filesystem>
#include <string>

namespace sokid {

/// Whole-file reads and writes; failures throw Error(io).
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& bytes);

}  // namespace sokid
