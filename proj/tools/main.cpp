#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "pxcl/commands.hpp"

namespace {

void add_common_options(CLI::App* cmd, pxcl::CliOptions& options, std::string& config,
                        std::string& out, std::uint64_t& seed) {
    cmd->add_option("--config", config, "Experiment config file (JSON); defaults used when absent");
    cmd->add_option("--out", out, "Output directory (overrides the config)");
    cmd->add_option("--seed", seed, "Root seed (overrides the config)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--jobs", options.jobs, "Worker threads for independent runs")
        ->check(CLI::PositiveNumber);
    cmd->add_flag("--quiet", options.quiet, "Suppress progress output");
}

void finish_options(const CLI::App* cmd, pxcl::CliOptions& options, const std::string& config,
                    const std::string& out, std::uint64_t seed) {
    if (cmd->count("--config") > 0) options.config_path = config;
    if (cmd->count("--out") > 0) options.out_dir = out;
    if (cmd->count("--seed") > 0) options.seed = seed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Domain-incremental continual-learning experiment runner"};
    app.require_subcommand(1);

    pxcl::CliOptions options;
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;

    CLI::App* run = app.add_subcommand("run", "Train the requested strategies and emit results");
    add_common_options(run, options, config_path, out_dir, seed);

    CLI::App* sweep = app.add_subcommand("sweep", "Sweep the replay buffer capacity");
    add_common_options(sweep, options, config_path, out_dir, seed);

    CLI::App* convert = app.add_subcommand("convert", "Convert raw samples to a canonical dataset");
    std::string convert_input;
    std::string convert_manifest;
    std::string convert_out;
    convert->add_option("input", convert_input, "Tensor file (N x 784 uint8) or directory of PGMs")
        ->required();
    convert->add_option("manifest", convert_manifest, "CSV manifest: id,split,label")->required();
    convert->add_option("output", convert_out, "Canonical dataset file to write")->required();
    bool convert_quiet = false;
    convert->add_flag("--quiet", convert_quiet, "Suppress progress output");

    CLI::App* synth = app.add_subcommand("synth", "Generate the synthetic dataset");
    add_common_options(synth, options, config_path, out_dir, seed);
    std::string synth_out;
    synth->add_option("output", synth_out, "Canonical dataset file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (run->parsed()) {
        finish_options(run, options, config_path, out_dir, seed);
        return pxcl::cmd_run(options);
    }
    if (sweep->parsed()) {
        finish_options(sweep, options, config_path, out_dir, seed);
        return pxcl::cmd_sweep(options);
    }
    if (convert->parsed()) return pxcl::cmd_convert(convert_input, convert_manifest, convert_out, convert_quiet);
    if (synth->parsed()) {
        finish_options(synth, options, config_path, out_dir, seed);
        return pxcl::cmd_synth(options, synth_out);
    }
    return 2;
}
