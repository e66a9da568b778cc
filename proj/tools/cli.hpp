#pragma once

namespace bathy::cli {

// Runs the `bathy` command line. Returns the process exit code:
// 0 success, 1 runtime or numeric failure, 2 usage or configuration error.
int run(int argc, const char* const* argv);

}  // namespace bathy::cli
