#pragma once

namespace gnls {

// Parses argv, dispatches one subcommand, writes its artifacts and manifest.
// Exit codes: 0 success, 1 solver failure or failed verification, 2 config
// error (bad flags, malformed files, invalid parameters).
int run_cli(int argc, const char* const* argv);

}  // namespace gnls
