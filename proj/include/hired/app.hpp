#pragma once

#include <iosfwd>

namespace hired {

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitUsage = 2 };

/**
 * Entry point of the `hired` tool. Subcommands: ingest, train, evaluate,
 * ablate, theory-sim, export-basis, synth. Failures print one line
 * `error: <kind>: <message>` to `err`.
 */
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace hired
