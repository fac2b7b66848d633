#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pipeline/commands.hpp"

namespace {

void configure_logging() {
    const char* env = std::getenv("NEURORATE_LOG");
    const std::string level = env ? env : "info";
    const auto parsed = spdlog::level::from_str(level);
    if (parsed == spdlog::level::off && level != "off") {
        std::cerr << "NEURORATE_LOG: unknown level '" << level << "', using info\n";
        spdlog::set_level(spdlog::level::info);
    } else {
        spdlog::set_level(parsed);
    }
}

} // namespace

int main(int argc, char** argv) {
    using namespace neurorate::cli;
    configure_logging();

    CLI::App app{"Brain-rate forecasting pipeline: synthesize or ingest EEG, build topographic datasets, train and evaluate."};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> out;
    app.add_option("--config", config_path, "Run configuration (INI sections; empty file = defaults)")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Root seed, overrides run.seed");
    app.add_option("--threads", threads, "Worker threads, overrides run.threads")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "Output directory, overrides paths.out");

    CommandOptions options;
    const std::vector<std::pair<std::string, std::string>> help = {
        {"synth", "write a synthetic recording corpus"},
        {"brainrate", "per-window brain rate, one CSV line per window"},
        {"topomap", "per-trial topographic tensor files"},
        {"dataset", "split videos and write train/validation/test sequence datasets"},
        {"train", "two-stage training (CNN with SGD, then CNN+LSTM with Adam)"},
        {"eval", "test-set metrics and prediction traces from saved models"},
        {"report", "per-video trace plots and MAPE distribution summaries"},
        {"batch-study", "within-subject CNN training at each configured batch size"},
    };
    for (const auto& [name, text] : help) {
        auto* sub = app.add_subcommand(name, text);
        if (name == "topomap") {
            sub->add_flag("--emit-png", options.emit_png, "Render one grayscale PNG per band");
            sub->add_option("--window", options.png_window, "Window index rendered per trial");
        }
    }

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) config.seed = *seed;
        if (threads) config.threads = *threads;
        if (out) config.out = *out;
        config.sync();
        const std::string name = app.get_subcommands().front()->get_name();
        const auto artifacts = run_command(name, config, options);
        spdlog::info("{}: wrote {} files, manifest {}", name, artifacts.size(), artifacts.back().string());
        return 0;
    } catch (const neurorate::Error& e) {
        spdlog::error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        spdlog::error("unexpected failure: {}", e.what());
        return 1;
    }
}
