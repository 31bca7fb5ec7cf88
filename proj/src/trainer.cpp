#include "pxcl/trainer.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <tuple>
#include <utility>

#include "pxcl/ops.hpp"

namespace pxcl {

const char* strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::Proposed: return "proposed";
        case Strategy::Er: return "er";
        case Strategy::FineTune: return "finetune";
        case Strategy::Joint: return "joint";
    }
    throw std::invalid_argument("strategy_name: unknown strategy");
}

Strategy parse_strategy(const std::string& name) {
    if (name == "proposed") return Strategy::Proposed;
    if (name == "er") return Strategy::Er;
    if (name == "finetune") return Strategy::FineTune;
    if (name == "joint") return Strategy::Joint;
    throw std::invalid_argument("parse_strategy: unknown strategy '" + name +
                                "' (expected proposed, er, finetune, or joint)");
}

void validate_train_config(const TrainConfig& config) {
    if (config.epochs_per_domain < 1)
        throw std::invalid_argument("train config: epochs_per_domain must be >= 1");
    if (config.batch_size < 1) throw std::invalid_argument("train config: batch_size must be >= 1");
    if (config.replay_batch_size < 1)
        throw std::invalid_argument("train config: replay_batch_size must be >= 1");
    if (config.num_runs < 1) throw std::invalid_argument("train config: num_runs must be >= 1");
    if (!(config.optimizer.learning_rate > 0.0))
        throw std::invalid_argument("train config: learning_rate must be > 0");
    const bool replays = config.strategy == Strategy::Proposed || config.strategy == Strategy::Er;
    if (replays && config.buffer_capacity == 0)
        throw std::invalid_argument("train config: buffer_capacity must be > 0 for strategies that replay");
}

std::vector<double> compute_class_weights(std::span<const int> labels, std::size_t num_classes) {
    if (labels.empty()) throw std::invalid_argument("compute_class_weights: empty batch");
    if (num_classes == 0) throw std::invalid_argument("compute_class_weights: num_classes must be > 0");

    std::vector<std::size_t> counts(num_classes, 0);
    for (int label : labels) {
        if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
            throw std::invalid_argument("compute_class_weights: label out of range: " +
                                        std::to_string(label));
        counts[static_cast<std::size_t>(label)] += 1;
    }

    std::vector<std::size_t> present;
    for (std::size_t c = 0; c < num_classes; ++c)
        if (counts[c] > 0) present.push_back(c);

    const double batch = static_cast<double>(labels.size());
    const double share = batch / static_cast<double>(present.size());

    // Five rounding candidates per present class: the rounded quotient and its
    // two floating-point neighbors on each side.
    auto candidates_for = [&](std::size_t c) {
        const double n = static_cast<double>(counts[c]);
        std::array<double, 5> cands;
        cands[0] = share / n;
        cands[1] = std::nextafter(cands[0], std::numeric_limits<double>::infinity());
        cands[2] = std::nextafter(cands[1], std::numeric_limits<double>::infinity());
        cands[3] = std::nextafter(cands[0], -std::numeric_limits<double>::infinity());
        cands[4] = std::nextafter(cands[3], -std::numeric_limits<double>::infinity());
        return cands;
    };

    std::vector<double> weights(num_classes, 0.0);
    if (present.size() > 3) {
        // Joint search over 5^M candidates is only needed for the bit-exact
        // reconstruction; with many classes fall back to plain rounding.
        for (std::size_t c : present) weights[c] = share / static_cast<double>(counts[c]);
        return weights;
    }

    std::vector<std::array<double, 5>> cands;
    for (std::size_t c : present) cands.push_back(candidates_for(c));

    std::vector<std::size_t> pick(present.size(), 0);
    std::vector<std::size_t> best_pick(present.size(), 0);
    double best_err = std::numeric_limits<double>::infinity();
    double best_drift = std::numeric_limits<double>::infinity();
    while (true) {
        double sum = 0.0;
        double drift = 0.0;
        for (std::size_t i = 0; i < present.size(); ++i) {
            const double w = cands[i][pick[i]];
            sum += w * static_cast<double>(counts[present[i]]);
            drift += std::abs(w - cands[i][0]);
        }
        const double err = std::abs(sum - batch);
        if (err < best_err || (err == best_err && drift < best_drift)) {
            best_err = err;
            best_drift = drift;
            best_pick = pick;
        }
        std::size_t i = 0;
        while (i < pick.size() && pick[i] == 4) pick[i++] = 0;
        if (i == pick.size()) break;
        pick[i] += 1;
    }

    for (std::size_t i = 0; i < present.size(); ++i) weights[present[i]] = cands[i][best_pick[i]];
    return weights;
}

void AccuracyMatrix::add_stage(std::vector<double> accuracies) {
    if (accuracies.size() != rows.size() + 1)
        throw std::invalid_argument("accuracy matrix: stage " + std::to_string(rows.size()) +
                                    " needs " + std::to_string(rows.size() + 1) + " entries, got " +
                                    std::to_string(accuracies.size()));
    for (double a : accuracies)
        if (!(a >= 0.0 && a <= 100.0))
            throw std::invalid_argument("accuracy matrix: entry out of [0,100]: " + std::to_string(a));
    if (!domain_names.empty() && rows.size() >= domain_names.size())
        throw std::invalid_argument("accuracy matrix: more stages than domains");
    rows.push_back(std::move(accuracies));
}

double AccuracyMatrix::at(std::size_t stage, std::size_t domain) const {
    if (stage >= rows.size() || domain >= rows[stage].size())
        throw std::out_of_range("accuracy matrix: entry (" + std::to_string(stage) + "," +
                                std::to_string(domain) + ") is outside the triangle");
    return rows[stage][domain];
}

namespace {

void require_triangle(const AccuracyMatrix& matrix, const char* where) {
    for (std::size_t t = 0; t < matrix.rows.size(); ++t)
        if (matrix.rows[t].size() != t + 1)
            throw std::invalid_argument(std::string(where) + ": row " + std::to_string(t) +
                                        " has " + std::to_string(matrix.rows[t].size()) +
                                        " entries, expected " + std::to_string(t + 1));
}

}  // namespace

double avg_accuracy(const AccuracyMatrix& matrix) {
    if (matrix.rows.empty()) throw std::invalid_argument("avg_accuracy: empty matrix");
    require_triangle(matrix, "avg_accuracy");
    if (!matrix.domain_names.empty() && matrix.domain_names.size() != matrix.rows.size())
        throw std::invalid_argument("avg_accuracy: final row does not cover every domain");
    const std::vector<double>& last = matrix.rows.back();
    double sum = 0.0;
    for (double a : last) sum += a;
    return sum / static_cast<double>(last.size());
}

double avg_forgetting(const AccuracyMatrix& matrix) {
    if (matrix.rows.empty()) throw std::invalid_argument("avg_forgetting: empty matrix");
    require_triangle(matrix, "avg_forgetting");
    const std::size_t stages = matrix.rows.size();
    if (stages < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t j = 0; j + 1 < stages; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t t = j; t < stages; ++t) best = std::max(best, matrix.rows[t][j]);
        sum += std::max(0.0, best - matrix.rows.back()[j]);
    }
    return sum / static_cast<double>(stages - 1);
}

namespace {

Tensor batch_images(const std::vector<const Sample*>& samples) {
    Tensor images({samples.size(), 1, kImageSide, kImageSide});
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const Sample& s = *samples[i];
        if (s.image.size() != kImagePixels)
            throw std::invalid_argument("trainer: sample image has " +
                                        std::to_string(s.image.size()) + " pixels, expected " +
                                        std::to_string(kImagePixels));
        std::copy(s.image.begin(), s.image.end(), images.data.begin() + i * kImagePixels);
    }
    return images;
}

std::string format_loss(int epoch, int total_epochs, int steps, double mean_loss) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "epoch %d/%d  steps %d  mean loss %.4f", epoch, total_epochs,
                  steps, mean_loss);
    return std::string(buf);
}

// Shared epoch loop. class_aware selects per-batch weights; a non-null buffer
// supplies replay draws and absorbs incoming samples after each step.
void train_epochs(PneumoCnn& model, std::span<const Sample> stream, const TrainConfig& config,
                  bool class_aware, ClassBalancedBuffer* balanced, ReservoirBuffer* reservoir,
                  Rng& shuffle_rng, const LogFn& log) {
    if (stream.empty()) throw std::invalid_argument("trainer: empty training stream");
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t replay = static_cast<std::size_t>(config.replay_batch_size);
    const std::vector<double> uniform(kNumClasses, 1.0);

    for (int epoch = 0; epoch < config.epochs_per_domain; ++epoch) {
        const std::vector<std::size_t> order = shuffle_rng.permutation(stream.size());
        double loss_sum = 0.0;
        int steps = 0;
        for (std::size_t start = 0; start < order.size(); start += batch) {
            const std::size_t count = std::min(batch, order.size() - start);
            std::vector<const Sample*> incoming(count);
            for (std::size_t i = 0; i < count; ++i) incoming[i] = &stream[order[start + i]];

            std::vector<Sample> replayed;
            if (balanced != nullptr && !balanced->empty())
                replayed = balanced->sample(replay);
            else if (reservoir != nullptr && !reservoir->empty())
                replayed = reservoir->sample(replay);

            std::vector<const Sample*> combined = incoming;
            for (const Sample& s : replayed) combined.push_back(&s);

            std::vector<int> labels(combined.size());
            for (std::size_t i = 0; i < combined.size(); ++i) labels[i] = combined[i]->label;

            const Tensor images = batch_images(combined);
            std::vector<double> weights;
            if (class_aware) weights = compute_class_weights(labels, kNumClasses);

            model.zero_grads();
            ForwardTrace trace;
            const Tensor logits = forward(model, images, trace);
            LossResult loss = weighted_softmax_ce(logits, labels, class_aware ? weights : uniform);
            backward(model, trace, loss.grad_logits);
            for (ParamState* param : model.params()) optimizer_step(*param, config.optimizer);

            for (const Sample* s : incoming) {
                if (balanced != nullptr)
                    balanced->insert(*s);
                else if (reservoir != nullptr)
                    reservoir->insert(*s);
            }

            loss_sum += loss.loss;
            steps += 1;
        }
        if (log)
            log(format_loss(epoch + 1, config.epochs_per_domain, steps,
                            loss_sum / static_cast<double>(steps)));
    }
}

}  // namespace

void train_one_domain(PneumoCnn& model, std::span<const Sample> stream, const TrainConfig& config,
                      ClassBalancedBuffer* balanced, ReservoirBuffer* reservoir, Rng& shuffle_rng,
                      const LogFn& log) {
    validate_train_config(config);
    switch (config.strategy) {
        case Strategy::Proposed:
            if (balanced == nullptr || reservoir != nullptr)
                throw std::invalid_argument("train_one_domain: Proposed requires a class-balanced buffer");
            break;
        case Strategy::Er:
            if (reservoir == nullptr || balanced != nullptr)
                throw std::invalid_argument("train_one_domain: ER requires a reservoir buffer");
            break;
        case Strategy::FineTune:
            if (balanced != nullptr || reservoir != nullptr)
                throw std::invalid_argument("train_one_domain: FineTune takes no buffer");
            break;
        case Strategy::Joint:
            throw std::invalid_argument("train_one_domain: Joint trains once via train_joint");
    }
    const bool class_aware = config.strategy == Strategy::Proposed;
    train_epochs(model, stream, config, class_aware, balanced, reservoir, shuffle_rng, log);
}

void train_joint(PneumoCnn& model, std::span<const Sample> pooled, const TrainConfig& config,
                 Rng& shuffle_rng, const LogFn& log) {
    validate_train_config(config);
    train_epochs(model, pooled, config, /*class_aware=*/false, nullptr, nullptr, shuffle_rng, log);
}

double evaluate(const PneumoCnn& model, std::span<const Sample> stream) {
    if (stream.empty()) throw std::invalid_argument("evaluate: empty test stream");
    constexpr std::size_t kChunk = 128;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < stream.size(); start += kChunk) {
        const std::size_t count = std::min(kChunk, stream.size() - start);
        std::vector<const Sample*> chunk(count);
        for (std::size_t i = 0; i < count; ++i) chunk[i] = &stream[start + i];
        const std::vector<int> preds = predict(model, batch_images(chunk));
        for (std::size_t i = 0; i < count; ++i)
            if (preds[i] == stream[start + i].label) correct += 1;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(stream.size());
}

namespace {

void require_curriculum(const std::vector<DomainSpec>& curriculum) {
    if (curriculum.empty()) throw std::invalid_argument("trainer: empty curriculum");
    for (std::size_t i = 1; i < curriculum.size(); ++i)
        if (domain_kind_rank(curriculum[i].kind) <= domain_kind_rank(curriculum[i - 1].kind))
            throw std::invalid_argument("trainer: curriculum must follow the domain order (" +
                                        std::string(curriculum[i - 1].name()) + " before " +
                                        std::string(curriculum[i].name()) + ")");
}

LogFn prefixed(const LogFn& log, const std::string& prefix) {
    if (!log) return {};
    return [&log, prefix](const std::string& line) { log(prefix + line); };
}

}  // namespace

RunResult run_single(const TrainConfig& config, const std::vector<DomainSpec>& curriculum,
                     const Dataset& data, std::uint64_t run_seed, const LogFn& log) {
    validate_train_config(config);
    require_curriculum(curriculum);

    PneumoCnn model = build_model(run_seed);
    Rng shuffle_rng = substream(run_seed, stream::kShuffle);

    std::vector<std::vector<Sample>> train_streams;
    std::vector<std::vector<Sample>> test_streams;
    train_streams.reserve(curriculum.size());
    test_streams.reserve(curriculum.size());
    for (const DomainSpec& spec : curriculum) {
        train_streams.push_back(make_domain_stream(data.train, spec));
        test_streams.push_back(make_domain_stream(data.test, spec));
    }

    AccuracyMatrix matrix;
    for (const DomainSpec& spec : curriculum) matrix.domain_names.push_back(spec.name());

    if (config.strategy == Strategy::Joint) {
        std::vector<Sample> pooled;
        for (const std::vector<Sample>& s : train_streams) pooled.insert(pooled.end(), s.begin(), s.end());
        train_joint(model, pooled, config, shuffle_rng, prefixed(log, "[joint] "));
        std::vector<double> final_accs;
        final_accs.reserve(curriculum.size());
        for (const std::vector<Sample>& test : test_streams) final_accs.push_back(evaluate(model, test));
        for (std::size_t t = 0; t < curriculum.size(); ++t)
            matrix.add_stage(std::vector<double>(final_accs.begin(), final_accs.begin() + t + 1));
    } else {
        std::unique_ptr<ClassBalancedBuffer> balanced;
        std::unique_ptr<ReservoirBuffer> reservoir;
        const std::uint64_t buffer_seed = Rng::mix(run_seed, stream::kBuffer);
        if (config.strategy == Strategy::Proposed)
            balanced = std::make_unique<ClassBalancedBuffer>(config.buffer_capacity, kNumClasses,
                                                             buffer_seed, EvictionPolicy::AlwaysReplace);
        else if (config.strategy == Strategy::Er)
            reservoir = std::make_unique<ReservoirBuffer>(config.buffer_capacity, buffer_seed);

        for (std::size_t t = 0; t < curriculum.size(); ++t) {
            const std::string prefix = "[" + std::string(strategy_name(config.strategy)) + " stage " +
                                       std::to_string(t + 1) + "/" + std::to_string(curriculum.size()) +
                                       " " + curriculum[t].name() + "] ";
            train_one_domain(model, train_streams[t], config, balanced.get(), reservoir.get(),
                             shuffle_rng, prefixed(log, prefix));
            std::vector<double> row;
            row.reserve(t + 1);
            for (std::size_t j = 0; j <= t; ++j) row.push_back(evaluate(model, test_streams[j]));
            if (log) {
                std::string line = prefix + "test accuracies:";
                for (double a : row) {
                    char buf[16];
                    std::snprintf(buf, sizeof(buf), " %.2f", a);
                    line += buf;
                }
                log(line);
            }
            matrix.add_stage(std::move(row));
        }
    }

    RunResult result;
    result.matrix = std::move(matrix);
    result.average_accuracy = avg_accuracy(result.matrix);
    result.average_forgetting = avg_forgetting(result.matrix);
    return result;
}

RunSummary run_sequence(const TrainConfig& config, const std::vector<DomainSpec>& curriculum,
                        const Dataset& data, const LogFn& log, int jobs) {
    validate_train_config(config);
    require_curriculum(curriculum);
    if (jobs < 1) throw std::invalid_argument("run_sequence: jobs must be >= 1");

    const std::uint64_t run_root = Rng::mix(config.seed, stream::kRun);
    const int runs = config.num_runs;

    RunSummary summary;
    summary.runs.resize(runs);

    std::mutex log_mutex;
    LogFn safe_log;
    if (log)
        safe_log = [&log, &log_mutex](const std::string& line) {
            std::lock_guard<std::mutex> guard(log_mutex);
            log(line);
        };

    auto run_one = [&](int r) {
        const std::uint64_t run_seed = Rng::mix(run_root, static_cast<std::uint64_t>(r));
        const std::string prefix = "run " + std::to_string(r + 1) + "/" + std::to_string(runs) + " ";
        summary.runs[static_cast<std::size_t>(r)] =
            run_single(config, curriculum, data, run_seed, prefixed(safe_log, prefix));
    };

    if (jobs == 1 || runs == 1) {
        for (int r = 0; r < runs; ++r) run_one(r);
    } else {
        std::vector<std::thread> workers;
        std::atomic<int> next{0};
        const int worker_count = std::min(jobs, runs);
        for (int w = 0; w < worker_count; ++w)
            workers.emplace_back([&]() {
                for (int r = next.fetch_add(1); r < runs; r = next.fetch_add(1)) run_one(r);
            });
        for (std::thread& t : workers) t.join();
    }

    summary.mean_matrix.domain_names = summary.runs.front().matrix.domain_names;
    const std::size_t stages = summary.runs.front().matrix.stages();
    for (std::size_t t = 0; t < stages; ++t) {
        std::vector<double> row(t + 1, 0.0);
        for (const RunResult& run : summary.runs)
            for (std::size_t j = 0; j <= t; ++j) row[j] += run.matrix.at(t, j);
        for (double& v : row) v /= static_cast<double>(runs);
        summary.mean_matrix.add_stage(std::move(row));
    }

    auto mean_std = [&](auto metric) {
        double mean = 0.0;
        for (const RunResult& run : summary.runs) mean += metric(run);
        mean /= static_cast<double>(runs);
        double var = 0.0;
        if (runs > 1) {
            for (const RunResult& run : summary.runs) {
                const double d = metric(run) - mean;
                var += d * d;
            }
            var /= static_cast<double>(runs - 1);
        }
        return std::pair<double, double>(mean, std::sqrt(var));
    };
    std::tie(summary.mean_accuracy, summary.std_accuracy) =
        mean_std([](const RunResult& r) { return r.average_accuracy; });
    std::tie(summary.mean_forgetting, summary.std_forgetting) =
        mean_std([](const RunResult& r) { return r.average_forgetting; });
    return summary;
}

}  // namespace pxcl
