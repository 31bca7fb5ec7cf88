#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

namespace pxcl {

// Shared command-line options. Absent optionals keep the config's values.
struct CliOptions {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::filesystem::path> out_dir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    bool quiet = false;
};

// Exit codes: 0 success, 1 runtime failure, 2 invalid config or input.
int cmd_run(const CliOptions& options);
int cmd_sweep(const CliOptions& options);

// Converts raw inputs to a canonical dataset file. `input` is either a flat
// uint8 tensor file (N x 784 bytes) with integer ids in the manifest, or a
// directory of 28x28 binary PGMs with filename ids. The manifest is a CSV
// "id,split,label" assigning every sample to train/val/test with label 0/1.
int cmd_convert(const std::filesystem::path& input, const std::filesystem::path& manifest,
                const std::filesystem::path& out_path, bool quiet);

// Generates the synthetic dataset from the config (or defaults) and writes it
// as a canonical dataset file.
int cmd_synth(const CliOptions& options, const std::filesystem::path& out_path);

}  // namespace pxcl
