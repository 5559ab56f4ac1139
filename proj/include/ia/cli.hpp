#pragma once

#include <string>
#include <vector>

namespace ia {

// Unified entry point for the `ia` tool. Exit codes: 0 success, 1 validation
// error, 2 runtime failure. Every subcommand writes its artifacts plus a
// run_metadata.json under --out.
int dispatch(const std::vector<std::string>& args);
int dispatch(int argc, const char* const* argv);

}  // namespace ia
