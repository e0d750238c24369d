#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ghostcert::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeError = 3;

// Runs one command line (args[0] is the program name). Results and progress go to
// out; the machine-readable error report goes to err. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ghostcert::cli
