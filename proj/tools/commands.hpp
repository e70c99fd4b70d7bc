#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dialogsep::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;

// Runs one command line (without the program name). Output and diagnostics
// go to `out` and `err`; the return value is the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dialogsep::cli
