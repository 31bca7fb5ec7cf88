#pragma once

#include <cstdint>
#include <string>

#include "pxcl/tensor.hpp"

namespace pxcl {

enum class OptimizerKind { Adam, Sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::Adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // Classical momentum for SGD; ignored by Adam.
    double sgd_momentum = 0.9;
};

// One trainable parameter with its gradient and optimizer state.
// moment1 doubles as the SGD velocity buffer.
struct ParamState {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor moment1;
    Tensor moment2;
    std::uint64_t step_count = 0;

    ParamState() = default;
    ParamState(std::string param_name, Tensor init);

    void zero_grad() { grad.zero(); }
};

// Adam with bias correction. Increments step_count.
void adam_step(ParamState& param, const OptimizerConfig& config);

// value -= lr * grad, with classical momentum when sgd_momentum > 0.
void sgd_step(ParamState& param, const OptimizerConfig& config);

// Dispatch on config.kind.
void optimizer_step(ParamState& param, const OptimizerConfig& config);

}  // namespace pxcl
