#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lfg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitComputation = 3;
inline constexpr int kExitUsage = 64;

/// Runs one subcommand. `args` excludes the program name. Results go to
/// `out` (or the --out file), diagnostics and errors to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

/// Worker count for batch subcommands: LFG_NUM_WORKERS if set and positive,
/// otherwise the hardware concurrency.
int worker_count();

}  // namespace lfg
