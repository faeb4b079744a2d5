#pragma once

#include <iosfwd>

namespace gmnmt {

/// Exit codes shared by all subcommands.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,  // grad-check failure, numerical abort, unexpected errors
  kExitInput = 2,    // bad paths, malformed data or configuration
  kExitCheckpoint = 3,
  kExitEvaluation = 4,
};

/// Entry point of the `gmnmt` tool. Subcommands: train, translate, evaluate,
/// grad-check, inspect-graph, params, synth.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gmnmt
