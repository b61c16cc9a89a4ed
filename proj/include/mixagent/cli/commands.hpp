#pragma once

#include <string>
#include <vector>

namespace mixagent::cli {

inline constexpr const char* kToolVersion = "0.1.0";

// Parses and runs one command. Returns the process exit code:
// 0 success, 2 config error, 3 data error, 4 numeric failure.
int dispatch(const std::vector<std::string>& args);

int run(int argc, char** argv);

}  // namespace mixagent::cli
