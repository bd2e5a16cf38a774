#pragma once

namespace recpoison {

// Entry point of the `recpoison` tool. Returns the process exit code:
// 0 success, 2 input/config error, 3 numeric failure, 1 anything else.
int run_cli(int argc, char** argv);

}  // namespace recpoison
