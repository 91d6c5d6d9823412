#include "recite/cli.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>

namespace {

void on_sigint(int) {
    // Second Ctrl-C falls back to the default handler and terminates.
    recite::cli::cancel_flag().store(true);
    std::signal(SIGINT, SIG_DFL);
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("recite"));
    std::signal(SIGINT, on_sigint);
    return recite::cli::run_main(std::vector<std::string>(argv, argv + argc));
}
