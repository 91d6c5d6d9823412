#pragma once

#include <atomic>
#include <string>
#include <vector>

namespace recite::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kBackendError = 2, kDataError = 3, kInterrupted = 130 };

/// Set by the SIGINT handler; runs drain and stop when it flips.
std::atomic<bool>& cancel_flag();

/// Entry point shared by the binary and the tests. args[0] is the program name.
int run_main(const std::vector<std::string>& args);

}  // namespace recite::cli
