#pragma once

namespace capita::cli {

/// Parses argv, runs one subcommand and returns the process exit code:
/// 0 success, 1 data error, 2 usage error.
int run(int argc, char** argv);

}  // namespace capita::cli
