#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace planereg::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitAmbiguous = 2;
inline constexpr int kExitNotFound = 3;
inline constexpr int kExitUsage = 64;

// Runs one command line (args excludes the program name). `in` backs the
// commands that read a cloud from standard input.
int run(const std::vector<std::string>& args, std::istream& in,
        std::ostream& out, std::ostream& err);

}  // namespace planereg::cli
