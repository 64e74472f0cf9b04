#pragma once

#include <ostream>

namespace cad::cli {

/// Exit statuses of the `cad` tool.
enum ExitCode : int { kOk = 0, kInputError = 2, kShapeError = 3 };

/// Runs the command line in-process; stdout/stderr go to `out`/`err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cad::cli
