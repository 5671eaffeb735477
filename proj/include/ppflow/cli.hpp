#pragma once

#include <string>
#include <vector>

namespace ppflow {

// Command-line entry point. Exit codes: 0 success, 2 usage error,
// 3 data error, 4 numerical failure.
int run_command(int argc, const char* const* argv);
int run_command(const std::vector<std::string>& args);  // args without argv[0]

}  // namespace ppflow
