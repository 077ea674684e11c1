#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ecolabel {

// Exit codes: 0 success, 1 domain error, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitDomain = 1;
inline constexpr int kExitUsage = 2;

// Runs the command line `args` (without the program name). Output goes to
// `out`, diagnostics to `err`; with --json, stdout carries one JSON document
// (the result, or the error envelope on failure).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ecolabel
