#include "pxcl/commands.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pxcl/config.hpp"
#include "pxcl/results.hpp"

namespace pxcl {

namespace {

ExperimentConfig load_effective_config(const CliOptions& options) {
    ExperimentConfig config = options.config_path.has_value()
                                  ? load_experiment_config(*options.config_path)
                                  : default_experiment_config();
    if (options.out_dir.has_value()) config.output_dir = *options.out_dir;
    if (options.seed.has_value()) config.train.seed = *options.seed;
    return config;
}

Dataset load_dataset(const ExperimentConfig& config) {
    if (config.dataset.kind == DatasetConfig::Kind::Synthetic)
        return generate_synthetic(config.dataset.synthetic);
    try {
        return load_canonical(config.dataset.path);
    } catch (const std::exception& e) {
        // A broken dataset file is bad input, not a runtime failure.
        throw ConfigError(e.what());
    }
}

LogFn make_logger(bool quiet) {
    if (quiet) return {};
    return [](const std::string& line) { std::cout << line << '\n'; };
}

std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return std::string(buf);
}

void write_provenance(const ExperimentConfig& config, const std::filesystem::path& dir,
                      const char* command) {
    nlohmann::ordered_json prov;
    prov["command"] = command;
    prov["timestamp_utc"] = utc_timestamp();
    prov["seed"] = config.train.seed;
    prov["num_runs"] = config.train.num_runs;
    nlohmann::ordered_json run_seeds = nlohmann::ordered_json::array();
    const std::uint64_t run_root = Rng::mix(config.train.seed, stream::kRun);
    for (int r = 0; r < config.train.num_runs; ++r)
        run_seeds.push_back(Rng::mix(run_root, static_cast<std::uint64_t>(r)));
    prov["run_seeds"] = run_seeds;
    write_text_file(dir / "provenance.json", prov.dump(2) + "\n");
}

int run_guarded(const CliOptions& options, const char* command,
                int (*body)(const ExperimentConfig&, const CliOptions&)) {
    ExperimentConfig config;
    try {
        config = load_effective_config(options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    try {
        return body(config, options);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error (" << command << "): " << e.what() << '\n';
        return 1;
    }
}

int run_body(const ExperimentConfig& config, const CliOptions& options) {
    std::filesystem::create_directories(config.output_dir);
    write_text_file(config.output_dir / "config_echo.json", render_experiment_config(config));

    const Dataset data = load_dataset(config);
    const LogFn log = make_logger(options.quiet);

    std::vector<std::pair<Strategy, RunSummary>> summaries;
    for (Strategy strategy : config.strategies) {
        TrainConfig train = config.train;
        train.strategy = strategy;
        if (log) log(std::string("=== strategy ") + strategy_name(strategy) + " ===");
        RunSummary summary = run_sequence(train, config.domains, data, log, options.jobs);
        const std::string name = strategy_name(strategy);
        write_text_file(config.output_dir / ("accuracy_matrix_" + name + ".csv"),
                        accuracy_matrix_csv(summary));
        summaries.emplace_back(strategy, std::move(summary));
    }

    write_text_file(config.output_dir / "summary.csv", summary_csv(summaries));

    std::vector<std::pair<std::string, double>> bars;
    for (const auto& [strategy, summary] : summaries)
        bars.emplace_back(strategy_name(strategy), summary.mean_accuracy);
    write_text_file(config.output_dir / "comparison.svg",
                    bar_chart_svg("Average accuracy by strategy (%)", bars));

    write_provenance(config, config.output_dir, "run");

    if (!options.quiet) {
        std::cout << "\nstrategy    avg_accuracy  avg_forgetting\n";
        for (const auto& [strategy, summary] : summaries) {
            char line[96];
            std::snprintf(line, sizeof(line), "%-10s  %12.2f  %14.2f", strategy_name(strategy),
                          summary.mean_accuracy, summary.mean_forgetting);
            std::cout << line << '\n';
        }
        std::cout << "results written to " << config.output_dir.string() << '\n';
    }
    return 0;
}

int sweep_body(const ExperimentConfig& config, const CliOptions& options) {
    if (config.sweep.empty()) throw ConfigError("sweep: the config lists no buffer capacities");
    std::filesystem::create_directories(config.output_dir);
    write_text_file(config.output_dir / "config_echo.json", render_experiment_config(config));

    const Dataset data = load_dataset(config);
    const LogFn log = make_logger(options.quiet);

    std::vector<SweepPoint> points;
    for (std::size_t capacity : config.sweep) {
        TrainConfig train = config.train;
        train.strategy = Strategy::Proposed;
        train.buffer_capacity = capacity;
        if (log) log("=== buffer capacity " + std::to_string(capacity) + " ===");
        const RunSummary summary = run_sequence(train, config.domains, data, log, options.jobs);
        points.push_back(SweepPoint{capacity, summary.mean_accuracy, summary.std_accuracy});
    }

    write_text_file(config.output_dir / "sweep.csv", sweep_csv(points));
    std::vector<std::pair<double, double>> line;
    for (const SweepPoint& p : points)
        line.emplace_back(static_cast<double>(p.capacity), p.mean_accuracy);
    write_text_file(config.output_dir / "sweep.svg",
                    line_chart_svg("Average accuracy vs buffer capacity (%)", "buffer capacity", line));
    write_provenance(config, config.output_dir, "sweep");

    if (!options.quiet) {
        std::cout << "\ncapacity  mean_avg_accuracy  std\n";
        for (const SweepPoint& p : points) {
            char row[96];
            std::snprintf(row, sizeof(row), "%8zu  %17.2f  %5.2f", p.capacity, p.mean_accuracy,
                          p.std_accuracy);
            std::cout << row << '\n';
        }
        std::cout << "results written to " << config.output_dir.string() << '\n';
    }
    return 0;
}

}  // namespace

int cmd_run(const CliOptions& options) { return run_guarded(options, "run", run_body); }

int cmd_sweep(const CliOptions& options) { return run_guarded(options, "sweep", sweep_body); }

namespace {

struct ManifestEntry {
    std::string id;
    SplitTag split;
    int label;
};

std::vector<ManifestEntry> parse_manifest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("manifest: cannot open " + path.string());
    std::vector<ManifestEntry> entries;
    std::string line;
    int line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        line_no += 1;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!saw_header) {
            if (line != "id,split,label")
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": manifest header must be 'id,split,label'");
            saw_header = true;
            continue;
        }
        const std::string where = path.string() + ":" + std::to_string(line_no);
        const std::size_t c1 = line.find(',');
        const std::size_t c2 = c1 == std::string::npos ? std::string::npos : line.find(',', c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw ConfigError(where + ": expected 'id,split,label'");
        ManifestEntry entry;
        entry.id = line.substr(0, c1);
        const std::string split = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string label = line.substr(c2 + 1);
        if (entry.id.empty()) throw ConfigError(where + ": empty id");
        if (split == "train")
            entry.split = SplitTag::Train;
        else if (split == "val")
            entry.split = SplitTag::Val;
        else if (split == "test")
            entry.split = SplitTag::Test;
        else
            throw ConfigError(where + ": split must be train, val, or test, got '" + split + "'");
        if (label == "0")
            entry.label = 0;
        else if (label == "1")
            entry.label = 1;
        else
            throw ConfigError(where + ": label must be 0 or 1, got '" + label + "'");
        entries.push_back(std::move(entry));
    }
    if (entries.empty()) throw ConfigError(path.string() + ": manifest lists no samples");
    for (std::size_t i = 0; i < entries.size(); ++i)
        for (std::size_t j = i + 1; j < entries.size(); ++j)
            if (entries[i].id == entries[j].id)
                throw ConfigError(path.string() + ": duplicate manifest id '" + entries[i].id + "'");
    return entries;
}

// Binary PGM (P5), exactly 28x28, maxval <= 255. Comments and arbitrary
// whitespace in the header are allowed.
std::array<std::uint8_t, 784> read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("pgm: cannot open " + path.string());
    auto next_token = [&]() {
        std::string token;
        int c = in.get();
        while (c != EOF) {
            if (c == '#') {
                while (c != EOF && c != '\n') c = in.get();
            } else if (std::isspace(c)) {
                c = in.get();
            } else {
                break;
            }
        }
        while (c != EOF && !std::isspace(c)) {
            token.push_back(static_cast<char>(c));
            c = in.get();
        }
        return token;
    };
    if (next_token() != "P5") throw ConfigError("pgm: " + path.string() + " is not binary PGM (P5)");
    const std::string w = next_token();
    const std::string h = next_token();
    const std::string maxval = next_token();
    if (w != "28" || h != "28")
        throw ConfigError("pgm: " + path.string() + " is " + w + "x" + h + ", expected 28x28");
    long mv = 0;
    try {
        mv = std::stol(maxval);
    } catch (const std::exception&) {
        mv = 0;
    }
    if (mv < 1 || mv > 255)
        throw ConfigError("pgm: " + path.string() + " maxval must be 1..255, got '" + maxval + "'");
    std::array<std::uint8_t, 784> pixels{};
    in.read(reinterpret_cast<char*>(pixels.data()), 784);
    if (in.gcount() != 784) throw ConfigError("pgm: " + path.string() + " truncated pixel data");
    return pixels;
}

void append_sample(Dataset& data, SplitTag split, const std::array<std::uint8_t, 784>& pixels,
                   int label) {
    DatasetSplit& target = split == SplitTag::Train ? data.train
                          : split == SplitTag::Val ? data.val
                                                   : data.test;
    target.images.push_back(pixels);
    target.labels.push_back(static_cast<std::uint8_t>(label));
}

}  // namespace

int cmd_convert(const std::filesystem::path& input, const std::filesystem::path& manifest,
                const std::filesystem::path& out_path, bool quiet) {
    try {
        const std::vector<ManifestEntry> entries = parse_manifest(manifest);
        Dataset data;
        data.train.tag = SplitTag::Train;
        data.val.tag = SplitTag::Val;
        data.test.tag = SplitTag::Test;

        if (std::filesystem::is_directory(input)) {
            for (const ManifestEntry& entry : entries) {
                const std::filesystem::path file = input / entry.id;
                if (!std::filesystem::exists(file))
                    throw ConfigError("convert: manifest id '" + entry.id + "' has no file in " +
                                      input.string());
                append_sample(data, entry.split, read_pgm(file), entry.label);
            }
        } else if (std::filesystem::exists(input)) {
            std::ifstream in(input, std::ios::binary);
            if (!in) throw ConfigError("convert: cannot open " + input.string());
            std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
            if (bytes.size() % 784 != 0)
                throw ConfigError("convert: " + input.string() + " holds " +
                                  std::to_string(bytes.size()) +
                                  " bytes, not a multiple of 784 (28x28 uint8 per sample)");
            const std::size_t count = bytes.size() / 784;
            if (entries.size() != count)
                throw ConfigError("convert: manifest lists " + std::to_string(entries.size()) +
                                  " samples but the input holds " + std::to_string(count));
            for (const ManifestEntry& entry : entries) {
                std::size_t index = 0;
                try {
                    std::size_t pos = 0;
                    index = std::stoull(entry.id, &pos);
                    if (pos != entry.id.size()) throw std::invalid_argument(entry.id);
                } catch (const std::exception&) {
                    throw ConfigError("convert: manifest id '" + entry.id +
                                      "' is not a sample index (tensor-file input)");
                }
                if (index >= count)
                    throw ConfigError("convert: manifest index " + std::to_string(index) +
                                      " is out of range (input holds " + std::to_string(count) +
                                      " samples)");
                std::array<std::uint8_t, 784> pixels{};
                std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(index * 784), 784,
                            reinterpret_cast<char*>(pixels.data()));
                append_sample(data, entry.split, pixels, entry.label);
            }
        } else {
            throw ConfigError("convert: input does not exist: " + input.string());
        }

        try {
            if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
            write_canonical(data, out_path);
        } catch (const std::invalid_argument& e) {
            // write_canonical rejects structurally invalid datasets (an empty
            // split); that is a manifest problem.
            throw ConfigError(std::string("convert: ") + e.what());
        }
        if (!quiet)
            std::cout << "wrote " << out_path.string() << " (train " << data.train.size() << ", val "
                      << data.val.size() << ", test " << data.test.size() << ")\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error (convert): " << e.what() << '\n';
        return 1;
    }
}

int cmd_synth(const CliOptions& options, const std::filesystem::path& out_path) {
    try {
        ExperimentConfig config;
        try {
            config = load_effective_config(options);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return 2;
        }
        if (config.dataset.kind != DatasetConfig::Kind::Synthetic)
            throw ConfigError("synth: the config selects a canonical dataset; nothing to generate");
        SyntheticConfig synth = config.dataset.synthetic;
        if (options.seed.has_value()) synth.seed = *options.seed;
        const Dataset data = generate_synthetic(synth);
        if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
        write_canonical(data, out_path);
        if (!options.quiet)
            std::cout << "wrote " << out_path.string() << " (train " << data.train.size() << ", val "
                      << data.val.size() << ", test " << data.test.size() << ", seed " << synth.seed
                      << ")\n";
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error (synth): " << e.what() << '\n';
        return 1;
    }
}

}  // namespace pxcl
