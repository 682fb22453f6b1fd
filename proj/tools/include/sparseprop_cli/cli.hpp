#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sparseprop::cli {

/// Exit codes of run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the sparseprop tool. args excludes the program name.
/// CSV goes to `out` unless --out names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads `key=value` lines ('#' comments and blank lines ignored) and turns
/// them into "--key value" arguments. Throws std::runtime_error.
std::vector<std::string> config_arguments(const std::string& path);

}  // namespace sparseprop::cli
