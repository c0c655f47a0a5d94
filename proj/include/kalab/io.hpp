#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace kalab {

/// Writes to a temporary sibling and renames over the destination, so a
/// reader never sees a partially written file. Creates parent directories.
void write_file_atomic(const std::string& path, std::string_view content);

std::string read_file(const std::string& path);

/// Shortest decimal text that parses back to exactly v (17 significant
/// digits where needed). Non-finite values print as "nan"/"inf"/"-inf".
std::string format_double(double v);

}  // namespace kalab

namespace kalab {

/// 64-bit FNV-1a hash.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace kalab
