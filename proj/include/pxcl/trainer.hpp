#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pxcl/domains.hpp"
#include "pxcl/model.hpp"
#include "pxcl/optim.hpp"
#include "pxcl/replay.hpp"
#include "pxcl/rng.hpp"

namespace pxcl {

enum class Strategy { Proposed, Er, FineTune, Joint };

const char* strategy_name(Strategy strategy);
Strategy parse_strategy(const std::string& name);

struct TrainConfig {
    Strategy strategy = Strategy::Proposed;
    int epochs_per_domain = 50;
    int batch_size = 32;
    int replay_batch_size = 32;          // combined batch = batch_size + replay_batch_size
    std::size_t buffer_capacity = 1000;  // ignored by FineTune and Joint
    OptimizerConfig optimizer;
    std::uint64_t seed = 7;
    int num_runs = 3;
};

// Rejects non-positive sizes and a zero buffer capacity for strategies that
// replay (Proposed, ER).
void validate_train_config(const TrainConfig& config);

// Per-class loss weights for one combined batch: w_c = B / (M_present * n_c)
// for present classes, 0 for absent ones. Each weight is the quotient to
// within 2 ulp, with the rounding chosen jointly so that sum_c w_c * n_c
// reconstructs B bit-exactly.
std::vector<double> compute_class_weights(std::span<const int> labels, std::size_t num_classes);

// Lower-triangular accuracy table: rows[t][j] = accuracy percent on domain j's
// test stream after training stage t, defined for j <= t.
struct AccuracyMatrix {
    std::vector<std::string> domain_names;
    std::vector<std::vector<double>> rows;

    std::size_t stages() const { return rows.size(); }

    // Appends the next stage; requires stages() + 1 entries, each in [0,100].
    void add_stage(std::vector<double> accuracies);

    double at(std::size_t stage, std::size_t domain) const;
};

// Mean of the final row. The matrix must be complete: a full triangle whose
// final row covers every domain.
double avg_accuracy(const AccuracyMatrix& matrix);

// Mean over non-final domains of max_t a(t,j) - a(T,j), each clamped at 0.
// A single-stage matrix has no past to forget and yields 0.
double avg_forgetting(const AccuracyMatrix& matrix);

// Progress sink; trainer functions stay silent when it is empty.
using LogFn = std::function<void(const std::string&)>;

// 100 * correct / total under predict's tie rule. Evaluation is chunked
// internally; the chunk size does not affect the result.
double evaluate(const PneumoCnn& model, std::span<const Sample> stream);

// One stage of sequential training. The buffer must match the strategy:
// Proposed takes `balanced`, ER takes `reservoir`, FineTune takes neither.
// Per epoch the stream order is redrawn from shuffle_rng; replay is skipped
// while the buffer is empty, and incoming samples enter the buffer only after
// the gradient step on their batch.
void train_one_domain(PneumoCnn& model, std::span<const Sample> stream, const TrainConfig& config,
                      ClassBalancedBuffer* balanced, ReservoirBuffer* reservoir, Rng& shuffle_rng,
                      const LogFn& log = {});

// Joint baseline: one phase of epochs_per_domain epochs over the pooled,
// reshuffled data of all domains, uniform weights, no buffer.
void train_joint(PneumoCnn& model, std::span<const Sample> pooled, const TrainConfig& config,
                 Rng& shuffle_rng, const LogFn& log = {});

struct RunResult {
    AccuracyMatrix matrix;
    double average_accuracy = 0.0;
    double average_forgetting = 0.0;
};

// One full pass over the curriculum with one seed. Joint trains once on the
// pooled data and its final accuracies fill every stage of the matrix.
RunResult run_single(const TrainConfig& config, const std::vector<DomainSpec>& curriculum,
                     const Dataset& data, std::uint64_t run_seed, const LogFn& log = {});

struct RunSummary {
    std::vector<RunResult> runs;
    AccuracyMatrix mean_matrix;   // entrywise mean across runs
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;    // sample std; 0 when num_runs == 1
    double mean_forgetting = 0.0;
    double std_forgetting = 0.0;
};

// num_runs independent runs with seeds derived from config.seed, aggregated
// into mean and sample std. jobs > 1 spreads runs across threads; results are
// identical to the sequential schedule.
RunSummary run_sequence(const TrainConfig& config, const std::vector<DomainSpec>& curriculum,
                        const Dataset& data, const LogFn& log = {}, int jobs = 1);

}  // namespace pxcl
