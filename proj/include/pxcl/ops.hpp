#pragma once

#include <span>

#include "pxcl/tensor.hpp"

namespace pxcl {

// 3x3 cross-correlation, stride 1, zero padding 1 (same-padding).
// input NxCxHxW, kernels OxCx3x3, bias O -> output NxOxHxW.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias);

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out);

// 2x2 max pooling, stride 2. H and W must be even.
Tensor maxpool2x2(const Tensor& input);
// Routes each gradient to the first maximal cell of its window in row-major scan order.
Tensor maxpool2x2_backward(const Tensor& input, const Tensor& grad_out);

Tensor relu(const Tensor& input);
// Gradient passes where input > 0 (zero at exactly 0).
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

// Affine map: input NxD, weight DxU, bias U -> NxU.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct LinearGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};
LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out);

// Class-weighted softmax cross-entropy over logits NxM.
// loss = sum_i w(y_i) * (-log softmax(logits_i)[y_i]) / sum_i w(y_i)
// Normalizing by the applied weight mass makes the loss invariant to the
// weights' overall scale.
struct LossResult {
    double loss;
    Tensor grad_logits;  // NxM
};
LossResult weighted_softmax_ce(const Tensor& logits, std::span<const int> labels,
                               std::span<const double> class_weights);

}  // namespace pxcl
