#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pxcl/optim.hpp"
#include "pxcl/tensor.hpp"

namespace pxcl {

// Two-stage CNN for 1x28x28 inputs: conv3x3(1->32) / relu / pool, conv3x3(32->64)
// / relu / pool, flatten 64*7*7 = 3136, fc 3136->128 / relu, fc 128->2.
struct PneumoCnn {
    ParamState conv1_kernels;  // 32x1x3x3
    ParamState conv1_bias;     // 32
    ParamState conv2_kernels;  // 64x32x3x3
    ParamState conv2_bias;     // 64
    ParamState fc1_weight;     // 3136x128
    ParamState fc1_bias;       // 128
    ParamState fc2_weight;     // 128x2
    ParamState fc2_bias;       // 2

    std::array<ParamState*, 8> params();
    std::array<const ParamState*, 8> params() const;

    void zero_grads();
};

inline constexpr std::size_t kImageSide = 28;
inline constexpr std::size_t kImagePixels = kImageSide * kImageSide;
inline constexpr std::size_t kFlattenUnits = 3136;
inline constexpr std::size_t kNumClasses = 2;

// He-normal weights (std = sqrt(2/fan_in)), zero biases, deterministic in seed.
PneumoCnn build_model(std::uint64_t seed);

std::size_t parameter_count(const PneumoCnn& model);

// Intermediate activations saved by forward() for the backward pass.
struct ForwardTrace {
    Tensor input;        // Nx1x28x28
    Tensor conv1_out;    // Nx32x28x28 (pre-relu)
    Tensor relu1_out;    // Nx32x28x28
    Tensor pool1_out;    // Nx32x14x14
    Tensor conv2_out;    // Nx64x14x14 (pre-relu)
    Tensor relu2_out;    // Nx64x14x14
    Tensor pool2_out;    // Nx64x7x7
    Tensor flat;         // Nx3136
    Tensor fc1_out;      // Nx128 (pre-relu)
    Tensor relu3_out;    // Nx128
};

// batch must be Nx1x28x28. Returns Nx2 logits.
Tensor forward(const PneumoCnn& model, const Tensor& batch);
Tensor forward(const PneumoCnn& model, const Tensor& batch, ForwardTrace& trace);

// Accumulates parameter gradients from d(loss)/d(logits). Call zero_grads first
// for a fresh step.
void backward(PneumoCnn& model, const ForwardTrace& trace, const Tensor& grad_logits);

// Argmax over the two logits; an exact tie resolves to class 0.
std::vector<int> predict(const PneumoCnn& model, const Tensor& batch);

// Flat binary checkpoint, magic "PXCLMDL1", little-endian. Per parameter in
// declaration order: u32 name length, name bytes, u32 rank, u64 extents,
// float64 payload.
void save_checkpoint(const PneumoCnn& model, const std::filesystem::path& path);
PneumoCnn load_checkpoint(const std::filesystem::path& path);

}  // namespace pxcl
