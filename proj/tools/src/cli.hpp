#pragma once

#include <cstdint>
#include <string>

namespace glowgs::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericalError = 3 };

/// Runs the `glowgs` command line and returns its exit code.
int run(int argc, const char* const* argv);

std::uint64_t fnv1a(const std::string& text);

}  // namespace glowgs::cli
