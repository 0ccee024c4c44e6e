#include <cstdlib>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gm_commands.hpp"

namespace {

void configure_logging() {
    auto logger = spdlog::stderr_color_mt("gm");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("GM_LOG");
    const std::string level = env ? env : "info";
    if (level == "quiet") {
        spdlog::set_level(spdlog::level::off);
    } else if (level == "debug") {
        spdlog::set_level(spdlog::level::debug);
    } else {
        spdlog::set_level(spdlog::level::info);
    }
}

}  // namespace

int main(int argc, char** argv) {
    configure_logging();
    CLI::App app{"Sign-coupled activator-inhibitor Neumann solver"};
    app.require_subcommand(1);
    std::string config;
    std::string out = ".";
    for (const char* name : {"eigen", "certify", "solve-sign", "solve-nodal", "degree"}) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("config", config, "INI configuration file")->required();
        sub->add_option("--out", out, "output directory");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : gm::cli::kConfigError;
    }
    return gm::cli::execute(app.get_subcommands().front()->get_name(), config, out);
}
