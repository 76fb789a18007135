#pragma once

// Command-line entry point shared by tools/toposculpt and the tests.
//
// Exit codes: 0 success, 1 usage error, 2 input/format error, 3 numerical
// failure. Failures print one line "ERROR <kind>: <message>" on stderr.
// TOPOSCULPT_THREADS caps the OpenMP thread count.

#include <string>
#include <vector>

namespace toposculpt {

inline constexpr const char* kToolVersion = "0.1.0";

int cli_main(int argc, char** argv);
int cli_main(const std::vector<std::string>& args);  // args[0] is the program name

}  // namespace toposculpt
