#pragma once
#include <string>

namespace ulwb {

std::string read_file(const std::string& path);

/// Writes to a sibling temp file then renames over the target, so a crash
/// mid-write never leaves a partially written artifact visible.
void atomic_write_file(const std::string& path, const std::string& contents);

void ensure_dir(const std::string& path);

} // namespace ulwb
