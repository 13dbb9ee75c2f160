#pragma once

namespace avtrack {

/** Command-line entry point: solve / riemann / grid / validate / compare /
 * sweep.  Returns the process exit code; never throws. */
int run_cli(int argc, const char* const* argv);

}  // namespace avtrack
