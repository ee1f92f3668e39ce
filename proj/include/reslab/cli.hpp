#pragma once

#include <functional>

namespace reslab {

// Runs body() and maps thrown domain errors to process exit codes:
// 0/positive from body passes through, InputError -> 2, NumericalError -> 3,
// PolicyError -> 4, anything else -> 3. The message is printed to stderr.
int run_mapped(const std::function<int()>& body);

// Full command-line entry point (argument parsing, dispatch, exit mapping).
int cli_main(int argc, const char* const* argv);

}  // namespace reslab
