#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ctlab {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on usage/validation/config errors, 2 on runtime failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ctlab
