#include "pxcl/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"

namespace pxcl {

namespace {

using ordered_json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& message) {
    throw ConfigError(where + ": " + message);
}

void check_keys(const ordered_json& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        const std::string& key = item.key();
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* a) { return key == a; }) == allowed.end())
            fail(where, "unknown key '" + key + "'");
    }
}

double get_double(const ordered_json& obj, const std::string& where, const char* key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number()) fail(where + "." + key, "expected a number");
    return v.get<double>();
}

std::int64_t get_int(const ordered_json& obj, const std::string& where, const char* key,
                     std::int64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number_integer()) fail(where + "." + key, "expected an integer");
    return v.get<std::int64_t>();
}

std::uint64_t get_u64(const ordered_json& obj, const std::string& where, const char* key,
                      std::uint64_t fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_number_unsigned() && !v.is_number_integer()) fail(where + "." + key, "expected an integer");
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(where + "." + key, "must be >= 0");
    return v.get<std::uint64_t>();
}

std::string get_string(const ordered_json& obj, const std::string& where, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const ordered_json& v = obj.at(key);
    if (!v.is_string()) fail(where + "." + key, "expected a string");
    return v.get<std::string>();
}

std::size_t get_size(const ordered_json& obj, const std::string& where, const char* key,
                     std::size_t fallback, std::size_t min_value) {
    const std::int64_t v = get_int(obj, where, key, static_cast<std::int64_t>(fallback));
    if (v < static_cast<std::int64_t>(min_value))
        fail(where + "." + key, "must be >= " + std::to_string(min_value));
    return static_cast<std::size_t>(v);
}

SyntheticConfig parse_synthetic(const ordered_json& obj, const std::string& where) {
    check_keys(obj, where,
               {"n_train", "n_val", "n_test", "class1_fraction", "blob_intensity", "noise_std", "seed"});
    SyntheticConfig defaults;
    SyntheticConfig out;
    out.n_train = get_size(obj, where, "n_train", defaults.n_train, 1);
    out.n_val = get_size(obj, where, "n_val", defaults.n_val, 1);
    out.n_test = get_size(obj, where, "n_test", defaults.n_test, 1);
    out.class1_fraction = get_double(obj, where, "class1_fraction", defaults.class1_fraction);
    if (!(out.class1_fraction > 0.0 && out.class1_fraction < 1.0))
        fail(where + ".class1_fraction", "must lie strictly between 0 and 1");
    out.blob_intensity = get_double(obj, where, "blob_intensity", defaults.blob_intensity);
    out.noise_std = get_double(obj, where, "noise_std", defaults.noise_std);
    if (out.noise_std < 0.0) fail(where + ".noise_std", "must be >= 0");
    out.seed = get_u64(obj, where, "seed", defaults.seed);
    return out;
}

DatasetConfig parse_dataset(const ordered_json& obj, const std::string& where) {
    check_keys(obj, where, {"kind", "path", "synthetic"});
    DatasetConfig out;
    const std::string kind = get_string(obj, where, "kind", "synthetic");
    if (kind == "synthetic") {
        out.kind = DatasetConfig::Kind::Synthetic;
        if (obj.contains("path")) fail(where + ".path", "only canonical datasets take a path");
        if (obj.contains("synthetic")) {
            if (!obj.at("synthetic").is_object()) fail(where + ".synthetic", "expected an object");
            out.synthetic = parse_synthetic(obj.at("synthetic"), where + ".synthetic");
        }
    } else if (kind == "canonical") {
        out.kind = DatasetConfig::Kind::Canonical;
        if (obj.contains("synthetic"))
            fail(where + ".synthetic", "only synthetic datasets take generator settings");
        const std::string path = get_string(obj, where, "path", "");
        if (path.empty()) fail(where + ".path", "canonical datasets require a path");
        out.path = path;
    } else {
        fail(where + ".kind", "expected 'synthetic' or 'canonical', got '" + kind + "'");
    }
    return out;
}

DomainSpec parse_domain(const ordered_json& obj, const std::string& where, int position) {
    if (!obj.is_object()) fail(where, "expected an object");
    if (!obj.contains("kind")) fail(where, "missing key 'kind'");
    const std::string kind_name = get_string(obj, where, "kind", "");
    DomainSpec spec;
    try {
        spec.kind = parse_domain_kind(kind_name);
    } catch (const std::invalid_argument& e) {
        fail(where + ".kind", e.what());
    }
    spec.domain_id = position;
    spec.seed = get_u64(obj, where, "seed", 9000 + static_cast<std::uint64_t>(domain_kind_rank(spec.kind)));

    DomainParams& p = spec.params;
    switch (spec.kind) {
        case DomainKind::Base:
            check_keys(obj, where, {"kind", "seed"});
            break;
        case DomainKind::LowDose:
            check_keys(obj, where, {"kind", "seed", "contrast", "noise_std"});
            p.lowdose_contrast = get_double(obj, where, "contrast", p.lowdose_contrast);
            p.lowdose_noise_std = get_double(obj, where, "noise_std", p.lowdose_noise_std);
            if (p.lowdose_noise_std < 0.0) fail(where + ".noise_std", "must be >= 0");
            break;
        case DomainKind::Portable:
            check_keys(obj, where, {"kind", "seed", "blur_sigma"});
            p.portable_blur_sigma = get_double(obj, where, "blur_sigma", p.portable_blur_sigma);
            if (!(p.portable_blur_sigma > 0.0)) fail(where + ".blur_sigma", "must be > 0");
            break;
        case DomainKind::Anatomical:
            check_keys(obj, where, {"kind", "seed", "scale_min", "scale_max", "max_shift"});
            p.anatomical_scale_min = get_double(obj, where, "scale_min", p.anatomical_scale_min);
            p.anatomical_scale_max = get_double(obj, where, "scale_max", p.anatomical_scale_max);
            p.anatomical_max_shift =
                static_cast<int>(get_int(obj, where, "max_shift", p.anatomical_max_shift));
            if (!(p.anatomical_scale_min > 0.0) || p.anatomical_scale_min > p.anatomical_scale_max)
                fail(where, "scale_min must be positive and <= scale_max");
            if (p.anatomical_max_shift < 0) fail(where + ".max_shift", "must be >= 0");
            break;
        case DomainKind::Institutional:
            check_keys(obj, where,
                       {"kind", "seed", "gamma_min", "gamma_max", "brightness_min", "brightness_max"});
            p.institutional_gamma_min = get_double(obj, where, "gamma_min", p.institutional_gamma_min);
            p.institutional_gamma_max = get_double(obj, where, "gamma_max", p.institutional_gamma_max);
            p.institutional_brightness_min =
                get_double(obj, where, "brightness_min", p.institutional_brightness_min);
            p.institutional_brightness_max =
                get_double(obj, where, "brightness_max", p.institutional_brightness_max);
            if (!(p.institutional_gamma_min > 0.0) ||
                p.institutional_gamma_min > p.institutional_gamma_max)
                fail(where, "gamma_min must be positive and <= gamma_max");
            if (p.institutional_brightness_min > p.institutional_brightness_max)
                fail(where, "brightness_min must be <= brightness_max");
            break;
    }
    return spec;
}

OptimizerConfig parse_optimizer(const ordered_json& obj, const std::string& where) {
    check_keys(obj, where,
               {"kind", "learning_rate", "beta1", "beta2", "epsilon", "sgd_momentum"});
    OptimizerConfig out;
    const std::string kind = get_string(obj, where, "kind", "adam");
    if (kind == "adam")
        out.kind = OptimizerKind::Adam;
    else if (kind == "sgd")
        out.kind = OptimizerKind::Sgd;
    else
        fail(where + ".kind", "expected 'adam' or 'sgd', got '" + kind + "'");
    out.learning_rate = get_double(obj, where, "learning_rate", out.learning_rate);
    if (!(out.learning_rate > 0.0)) fail(where + ".learning_rate", "must be > 0");
    out.beta1 = get_double(obj, where, "beta1", out.beta1);
    out.beta2 = get_double(obj, where, "beta2", out.beta2);
    if (!(out.beta1 >= 0.0 && out.beta1 < 1.0) || !(out.beta2 >= 0.0 && out.beta2 < 1.0))
        fail(where, "beta1 and beta2 must lie in [0,1)");
    out.epsilon = get_double(obj, where, "epsilon", out.epsilon);
    if (!(out.epsilon > 0.0)) fail(where + ".epsilon", "must be > 0");
    out.sgd_momentum = get_double(obj, where, "sgd_momentum", out.sgd_momentum);
    if (!(out.sgd_momentum >= 0.0 && out.sgd_momentum < 1.0))
        fail(where + ".sgd_momentum", "must lie in [0,1)");
    return out;
}

TrainConfig parse_train(const ordered_json& obj, const std::string& where,
                        std::vector<Strategy>& strategies) {
    check_keys(obj, where,
               {"strategies", "epochs_per_domain", "batch_size", "replay_batch_size",
                "buffer_capacity", "optimizer", "seed", "num_runs"});
    TrainConfig out;
    if (obj.contains("strategies")) {
        const ordered_json& list = obj.at("strategies");
        if (!list.is_array()) fail(where + ".strategies", "expected an array");
        strategies.clear();
        for (const ordered_json& item : list) {
            if (!item.is_string()) fail(where + ".strategies", "expected strategy names");
            try {
                strategies.push_back(parse_strategy(item.get<std::string>()));
            } catch (const std::invalid_argument& e) {
                fail(where + ".strategies", e.what());
            }
        }
        if (strategies.empty()) fail(where + ".strategies", "at least one strategy is required");
        for (std::size_t i = 0; i < strategies.size(); ++i)
            for (std::size_t j = i + 1; j < strategies.size(); ++j)
                if (strategies[i] == strategies[j])
                    fail(where + ".strategies",
                         std::string("duplicate strategy '") + strategy_name(strategies[i]) + "'");
    }
    out.epochs_per_domain =
        static_cast<int>(get_int(obj, where, "epochs_per_domain", out.epochs_per_domain));
    out.batch_size = static_cast<int>(get_int(obj, where, "batch_size", out.batch_size));
    out.replay_batch_size =
        static_cast<int>(get_int(obj, where, "replay_batch_size", out.batch_size));
    out.buffer_capacity = get_size(obj, where, "buffer_capacity", out.buffer_capacity, 0);
    if (obj.contains("optimizer")) {
        if (!obj.at("optimizer").is_object()) fail(where + ".optimizer", "expected an object");
        out.optimizer = parse_optimizer(obj.at("optimizer"), where + ".optimizer");
    }
    out.seed = get_u64(obj, where, "seed", out.seed);
    out.num_runs = static_cast<int>(get_int(obj, where, "num_runs", out.num_runs));
    try {
        validate_train_config(out);
    } catch (const std::invalid_argument& e) {
        fail(where, e.what());
    }
    return out;
}

void validate_curriculum(const std::vector<DomainSpec>& domains, const std::string& where) {
    if (domains.empty()) fail(where, "at least one domain is required");
    for (std::size_t i = 1; i < domains.size(); ++i)
        if (domain_kind_rank(domains[i].kind) <= domain_kind_rank(domains[i - 1].kind))
            fail(where, std::string("domains must follow the curriculum order (") +
                            domains[i - 1].name() + " before " + domains[i].name() + ")");
}

std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
    int line = 1;
    int column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            line += 1;
            column = 1;
        } else {
            column += 1;
        }
    }
    return {line, column};
}

}  // namespace

ExperimentConfig default_experiment_config() {
    ExperimentConfig config;
    config.dataset.kind = DatasetConfig::Kind::Synthetic;
    const DomainKind kinds[] = {DomainKind::Base, DomainKind::LowDose, DomainKind::Portable,
                                DomainKind::Anatomical, DomainKind::Institutional};
    int position = 0;
    for (DomainKind kind : kinds) {
        DomainSpec spec;
        spec.kind = kind;
        spec.domain_id = position++;
        spec.seed = 9000 + static_cast<std::uint64_t>(domain_kind_rank(kind));
        config.domains.push_back(spec);
    }
    config.strategies = {Strategy::Proposed, Strategy::Er, Strategy::FineTune, Strategy::Joint};
    config.sweep = {100, 500, 1000, 2000};
    return config;
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    ordered_json root;
    try {
        root = ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, column] = line_and_column(text, e.byte > 0 ? e.byte - 1 : 0);
        throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) +
                          ": " + e.what());
    }
    if (!root.is_object()) throw ConfigError(origin + ": top level must be an object");
    check_keys(root, origin, {"dataset", "domains", "train", "sweep", "output_dir"});

    ExperimentConfig config = default_experiment_config();

    if (root.contains("dataset")) {
        if (!root.at("dataset").is_object()) fail(origin + ": dataset", "expected an object");
        config.dataset = parse_dataset(root.at("dataset"), origin + ": dataset");
    }
    if (root.contains("domains")) {
        const ordered_json& list = root.at("domains");
        if (!list.is_array()) fail(origin + ": domains", "expected an array");
        config.domains.clear();
        int position = 0;
        for (const ordered_json& item : list) {
            const std::string where = origin + ": domains[" + std::to_string(position) + "]";
            config.domains.push_back(parse_domain(item, where, position));
            position += 1;
        }
    }
    validate_curriculum(config.domains, origin + ": domains");
    if (root.contains("train")) {
        if (!root.at("train").is_object()) fail(origin + ": train", "expected an object");
        config.train = parse_train(root.at("train"), origin + ": train", config.strategies);
    }
    if (root.contains("sweep")) {
        const ordered_json& list = root.at("sweep");
        if (!list.is_array()) fail(origin + ": sweep", "expected an array");
        config.sweep.clear();
        for (const ordered_json& item : list) {
            if (!item.is_number_integer()) fail(origin + ": sweep", "expected integer capacities");
            const std::int64_t cap = item.get<std::int64_t>();
            if (cap < 1)
                fail(origin + ": sweep",
                     "capacity " + std::to_string(cap) + " is invalid (Proposed requires a buffer)");
            config.sweep.push_back(static_cast<std::size_t>(cap));
        }
    }
    config.output_dir = get_string(root, origin, "output_dir", config.output_dir.string());
    if (config.output_dir.empty()) fail(origin + ".output_dir", "must not be empty");
    return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_experiment_config(buffer.str(), path.string());
}

std::string render_experiment_config(const ExperimentConfig& config) {
    ordered_json root;

    ordered_json dataset;
    if (config.dataset.kind == DatasetConfig::Kind::Synthetic) {
        dataset["kind"] = "synthetic";
        ordered_json synth;
        synth["n_train"] = config.dataset.synthetic.n_train;
        synth["n_val"] = config.dataset.synthetic.n_val;
        synth["n_test"] = config.dataset.synthetic.n_test;
        synth["class1_fraction"] = config.dataset.synthetic.class1_fraction;
        synth["blob_intensity"] = config.dataset.synthetic.blob_intensity;
        synth["noise_std"] = config.dataset.synthetic.noise_std;
        synth["seed"] = config.dataset.synthetic.seed;
        dataset["synthetic"] = synth;
    } else {
        dataset["kind"] = "canonical";
        dataset["path"] = config.dataset.path.string();
    }
    root["dataset"] = dataset;

    ordered_json domains = ordered_json::array();
    for (const DomainSpec& spec : config.domains) {
        ordered_json d;
        d["kind"] = spec.name();
        d["seed"] = spec.seed;
        const DomainParams& p = spec.params;
        switch (spec.kind) {
            case DomainKind::Base:
                break;
            case DomainKind::LowDose:
                d["contrast"] = p.lowdose_contrast;
                d["noise_std"] = p.lowdose_noise_std;
                break;
            case DomainKind::Portable:
                d["blur_sigma"] = p.portable_blur_sigma;
                break;
            case DomainKind::Anatomical:
                d["scale_min"] = p.anatomical_scale_min;
                d["scale_max"] = p.anatomical_scale_max;
                d["max_shift"] = p.anatomical_max_shift;
                break;
            case DomainKind::Institutional:
                d["gamma_min"] = p.institutional_gamma_min;
                d["gamma_max"] = p.institutional_gamma_max;
                d["brightness_min"] = p.institutional_brightness_min;
                d["brightness_max"] = p.institutional_brightness_max;
                break;
        }
        domains.push_back(d);
    }
    root["domains"] = domains;

    ordered_json train;
    ordered_json strategies = ordered_json::array();
    for (Strategy s : config.strategies) strategies.push_back(strategy_name(s));
    train["strategies"] = strategies;
    train["epochs_per_domain"] = config.train.epochs_per_domain;
    train["batch_size"] = config.train.batch_size;
    train["replay_batch_size"] = config.train.replay_batch_size;
    train["buffer_capacity"] = config.train.buffer_capacity;
    ordered_json optimizer;
    optimizer["kind"] = config.train.optimizer.kind == OptimizerKind::Adam ? "adam" : "sgd";
    optimizer["learning_rate"] = config.train.optimizer.learning_rate;
    optimizer["beta1"] = config.train.optimizer.beta1;
    optimizer["beta2"] = config.train.optimizer.beta2;
    optimizer["epsilon"] = config.train.optimizer.epsilon;
    optimizer["sgd_momentum"] = config.train.optimizer.sgd_momentum;
    train["optimizer"] = optimizer;
    train["seed"] = config.train.seed;
    train["num_runs"] = config.train.num_runs;
    root["train"] = train;

    ordered_json sweep = ordered_json::array();
    for (std::size_t cap : config.sweep) sweep.push_back(cap);
    root["sweep"] = sweep;
    root["output_dir"] = config.output_dir.string();

    return root.dump(2) + "\n";
}

}  // namespace pxcl
