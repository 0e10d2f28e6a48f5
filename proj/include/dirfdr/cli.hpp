#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dirfdr {

/// Process exit codes of the `dirfdr` tool.
enum ExitCode : int {
    kExitSuccess = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumerical = 3,
};

/// Runs `dirfdr` with the given arguments (argv[0] excluded). Diagnostics and
/// the resolved configuration go to `err`; help text goes to `out`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dirfdr
