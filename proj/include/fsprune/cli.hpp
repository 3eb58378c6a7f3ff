#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fsprune {

/// Entry point for the `fsprune` tool. Subcommands: train, eval, report,
/// dump-filters, export-pruned, sweep. Returns the process exit code.
int run_cli(int argc, char** argv);
/// Same, with explicit arguments (excluding the program name) and streams.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fsprune
