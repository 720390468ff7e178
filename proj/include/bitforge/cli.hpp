#pragma once

namespace bitforge::cli {

/// Exit codes: 0 success, 1 hypothesis-violation and other diagnostic
/// outcomes, 2 invalid input (flags, files, schemas).
int run_cli(int argc, const char* const* argv);

} // namespace bitforge::cli
