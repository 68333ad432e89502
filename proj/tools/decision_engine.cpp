// decision-engine: validate channel configs, run them against a simulated
// facility, and inspect the decision log.

#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "de/engine.hpp"

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void on_sigint(int) {
    g_interrupted = 1;
}

std::string default_config_dir() {
    const char* env = std::getenv("DE_CONFIG_DIR");
    return env ? env : "";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rule-driven resource provisioning decision engine"};
    app.require_subcommand(1);

    std::string config_dir = default_config_dir();
    auto* validate = app.add_subcommand("validate", "Check every channel file in a config directory");
    validate->add_option("--config", config_dir, "Config directory (default: $DE_CONFIG_DIR)");

    de::RunOptions run_options;
    std::string scenario;
    std::string log_path;
    std::int64_t cycles = 0;
    std::uint64_t seed = 0;
    auto* run = app.add_subcommand("run", "Run the channels against a scenario");
    run->add_option("--config", config_dir, "Config directory (default: $DE_CONFIG_DIR)");
    run->add_option("--scenario", scenario, "Scenario file")->required();
    auto* cycles_opt = run->add_option("--cycles", cycles, "Cycles per channel; omit to run until interrupted");
    auto* seed_opt = run->add_option("--seed", seed, "Seed for the simulated world (default: scenario seed)");
    run->add_option("--log", log_path, "Decision log to write")->required();
    run->add_flag("--force", run_options.force, "Overwrite an existing log");

    de::ShowOptions show_options;
    std::int64_t cycle = 0;
    std::string channel;
    std::string product;
    auto* show = app.add_subcommand("show", "Render records from a decision log");
    show->add_option("what", show_options.what, "products, decisions or status")
        ->required()
        ->check(CLI::IsMember({"products", "decisions", "status"}));
    show->add_option("--log", log_path, "Decision log")->required();
    auto* cycle_opt = show->add_option("--cycle", cycle, "Only this cycle; decisions show the full trace");
    auto* channel_opt = show->add_option("--channel", channel, "Only this channel");
    auto* product_opt = show->add_option("--product", product, "Only this product");

    auto* status = app.add_subcommand("status", "Latest state of every channel in a decision log");
    status->add_option("--log", log_path, "Decision log")->required();

    CLI11_PARSE(app, argc, argv);

    if (*validate || *run) {
        if (config_dir.empty()) {
            std::cerr << "error: --config not given and DE_CONFIG_DIR is not set\n";
            return de::kExitValidation;
        }
    }
    if (*validate) {
        return de::cmd_validate(config_dir, std::cout, std::cerr);
    }
    if (*run) {
        run_options.config_dir = config_dir;
        run_options.scenario_path = scenario;
        run_options.log_path = log_path;
        if (*cycles_opt) {
            run_options.cycles = cycles;
        } else {
            std::signal(SIGINT, on_sigint);
            run_options.should_stop = [] { return g_interrupted != 0; };
        }
        if (*seed_opt) {
            run_options.seed = seed;
        }
        return de::cmd_run(run_options, std::cout, std::cerr);
    }
    if (*show) {
        show_options.log_path = log_path;
        if (*cycle_opt) show_options.cycle = cycle;
        if (*channel_opt) show_options.channel = channel;
        if (*product_opt) show_options.product = product;
        return de::cmd_show(show_options, std::cout, std::cerr);
    }
    show_options.log_path = log_path;
    show_options.what = "status";
    return de::cmd_show(show_options, std::cout, std::cerr);
}
