#pragma once
// Atomic file output and number formatting for artifacts. Writers build
// the full content in memory, write it to a temporary file in the target
// directory, then rename; readers never observe partial artifacts.

#include <string>

namespace rotgas {

// Shortest round-trip decimal representation (%.17g trimmed).
std::string fmt_double(double v);

// Write-then-rename; throws Error(4) on any filesystem failure.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace rotgas
