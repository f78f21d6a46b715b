#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpg::cli {

enum ExitCode : int { ok = 0, io_error = 1, parse_error = 2, version_mismatch = 3, oracle_limit = 4 };

// Runs one command line (args excludes the program name). Normal output goes
// to `out`, diagnostics and progress to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Thread count from CPGRAPH_THREADS, 1 when unset or invalid.
int threads_from_env();

}  // namespace cpg::cli
