#pragma once

#include <ostream>

namespace pdttagger::cli {

enum ExitCode : int {
  kOk = 0,
  kInputError = 2,
  kInstrumentationConflict = 3,
  kTuningInfeasible = 4,
  kIoError = 5,
};

/// Runs one command line. Never throws; errors become exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pdttagger::cli
