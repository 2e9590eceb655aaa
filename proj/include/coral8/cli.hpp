// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coral8 {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand (synth, train, generate, evaluate). `args` excludes
/// the program name. Returns 0 on success, 1 on runtime failure, 2 on usage
/// errors.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads `key = value` lines (# comments) into command-line tokens for the
/// named options. Throws std::invalid_argument on malformed lines.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

}  // namespace coral8
