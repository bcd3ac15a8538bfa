#pragma once

#include <ostream>

namespace tridetect::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;       // bad input file, failed check, runtime error
inline constexpr int kUsage = 2;         // unparseable flags or config, invalid values
inline constexpr int kTrainAborted = 3;  // non-finite loss or parameters

// Entry point for `tridetect <command> ...`. Reads TRIDETECT_SEED when no
// --seed is given on the command line or in a config file.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tridetect::cli
