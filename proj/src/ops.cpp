#include "pxcl/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace pxcl {

namespace {

// C (MxN) += A (MxK) * B (KxN), all row-major. The i-k-j order keeps the
// inner loop streaming contiguous rows, which the compiler vectorizes.
void matmul_acc(std::size_t m, std::size_t k, std::size_t n, const double* a, const double* b,
                double* c) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* a_row = a + i * k;
        double* c_row = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aval = a_row[p];
            if (aval == 0.0) continue;
            const double* b_row = b + p * n;
            for (std::size_t j = 0; j < n; ++j) c_row[j] += aval * b_row[j];
        }
    }
}

std::vector<double> transpose(std::size_t rows, std::size_t cols, const double* src) {
    std::vector<double> out(rows * cols);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
    return out;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

constexpr std::size_t kK = 3;  // kernel spatial size

// Zero-padded copy of one sample: C x (H+2) x (W+2).
void pad_sample(const Tensor& input, std::size_t n, std::vector<double>& padded) {
    const std::size_t C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const std::size_t ph = H + 2, pw = W + 2;
    std::fill(padded.begin(), padded.end(), 0.0);
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = input.data.data() + ((n * C + c) * H) * W;
        double* dst = padded.data() + c * ph * pw;
        for (std::size_t h = 0; h < H; ++h)
            std::copy(src + h * W, src + (h + 1) * W, dst + (h + 1) * pw + 1);
    }
}

// cols[(c*9 + kh*3 + kw)][h*W + w] = padded[c][h+kh][w+kw]
void im2col(const std::vector<double>& padded, std::size_t C, std::size_t H, std::size_t W,
            std::vector<double>& cols) {
    const std::size_t pw = W + 2, ph = H + 2, hw = H * W;
    for (std::size_t c = 0; c < C; ++c) {
        const double* chan = padded.data() + c * ph * pw;
        for (std::size_t kh = 0; kh < kK; ++kh) {
            for (std::size_t kw = 0; kw < kK; ++kw) {
                double* dst = cols.data() + ((c * kK + kh) * kK + kw) * hw;
                for (std::size_t h = 0; h < H; ++h) {
                    const double* src = chan + (h + kh) * pw + kw;
                    std::copy(src, src + W, dst + h * W);
                }
            }
        }
    }
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels, const Tensor* bias) {
    require(input.rank() == 4, "conv2d: input must be NxCxHxW, got " + shape_str(input));
    require(kernels.rank() == 4 && kernels.shape[2] == kK && kernels.shape[3] == kK,
            "conv2d: kernels must be OxCx3x3, got " + shape_str(kernels));
    require(kernels.shape[1] == input.shape[1],
            "conv2d: input channels " + shape_str(input) + " do not match kernels " + shape_str(kernels));
    if (bias)
        require(bias->rank() == 1 && bias->shape[0] == kernels.shape[0],
                "conv2d: bias must be length " + std::to_string(kernels.shape[0]) + ", got " +
                    shape_str(*bias));
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    check_conv_shapes(input, kernels, &bias);
    const std::size_t N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const std::size_t O = kernels.shape[0], hw = H * W, ck = C * kK * kK;

    Tensor out({N, O, H, W});
    std::vector<double> padded(C * (H + 2) * (W + 2));
    std::vector<double> cols(ck * hw);
    for (std::size_t n = 0; n < N; ++n) {
        pad_sample(input, n, padded);
        im2col(padded, C, H, W, cols);
        double* out_n = out.data.data() + n * O * hw;
        for (std::size_t o = 0; o < O; ++o)
            std::fill(out_n + o * hw, out_n + (o + 1) * hw, bias[o]);
        matmul_acc(O, ck, hw, kernels.data.data(), cols.data(), out_n);
    }
    check_finite(out, "conv2d");
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels, const Tensor& grad_out) {
    check_conv_shapes(input, kernels, nullptr);
    const std::size_t N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    const std::size_t O = kernels.shape[0], hw = H * W, ck = C * kK * kK;
    require(grad_out.shape == std::vector<std::size_t>({N, O, H, W}),
            "conv2d_backward: grad shape " + shape_str(grad_out) + " does not match output NxOxHxW");

    Conv2dGrads grads{Tensor({N, C, H, W}), Tensor({O, C, kK, kK}), Tensor({O})};

    const std::size_t ph = H + 2, pw = W + 2;
    std::vector<double> padded(C * ph * pw);
    std::vector<double> cols(ck * hw);
    std::vector<double> grad_cols(ck * hw);
    const std::vector<double> kernels_t = transpose(O, ck, kernels.data.data());

    for (std::size_t n = 0; n < N; ++n) {
        const double* go_n = grad_out.data.data() + n * O * hw;

        for (std::size_t o = 0; o < O; ++o) {
            double s = 0.0;
            const double* row = go_n + o * hw;
            for (std::size_t i = 0; i < hw; ++i) s += row[i];
            grads.bias[o] += s;
        }

        // grad_kernels += grad_out_mat (OxHW) . cols^T (HWxCK)
        pad_sample(input, n, padded);
        im2col(padded, C, H, W, cols);
        const std::vector<double> cols_t = transpose(ck, hw, cols.data());
        matmul_acc(O, hw, ck, go_n, cols_t.data(), grads.kernels.data.data());

        // grad_cols (CKxHW) = kernels^T (CKxO) . grad_out_mat (OxHW), then scatter back.
        std::fill(grad_cols.begin(), grad_cols.end(), 0.0);
        matmul_acc(ck, O, hw, kernels_t.data(), go_n, grad_cols.data());

        std::fill(padded.begin(), padded.end(), 0.0);
        for (std::size_t c = 0; c < C; ++c) {
            double* chan = padded.data() + c * ph * pw;
            for (std::size_t kh = 0; kh < kK; ++kh)
                for (std::size_t kw = 0; kw < kK; ++kw) {
                    const double* src = grad_cols.data() + ((c * kK + kh) * kK + kw) * hw;
                    for (std::size_t h = 0; h < H; ++h) {
                        double* dst = chan + (h + kh) * pw + kw;
                        const double* s = src + h * W;
                        for (std::size_t w = 0; w < W; ++w) dst[w] += s[w];
                    }
                }
            double* gi = grads.input.data.data() + ((n * C + c) * H) * W;
            for (std::size_t h = 0; h < H; ++h)
                std::copy(chan + (h + 1) * pw + 1, chan + (h + 1) * pw + 1 + W, gi + h * W);
        }
    }
    check_finite(grads.input, "conv2d_backward");
    check_finite(grads.kernels, "conv2d_backward");
    return grads;
}

Tensor maxpool2x2(const Tensor& input) {
    require(input.rank() == 4, "maxpool2x2: input must be NxCxHxW, got " + shape_str(input));
    const std::size_t N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    require(H % 2 == 0 && W % 2 == 0, "maxpool2x2: H and W must be even, got " + shape_str(input));

    Tensor out({N, C, H / 2, W / 2});
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* in = input.data.data() + nc * H * W;
        double* dst = out.data.data() + nc * (H / 2) * (W / 2);
        for (std::size_t h = 0; h < H; h += 2)
            for (std::size_t w = 0; w < W; w += 2) {
                double m = in[h * W + w];
                m = std::max(m, in[h * W + w + 1]);
                m = std::max(m, in[(h + 1) * W + w]);
                m = std::max(m, in[(h + 1) * W + w + 1]);
                dst[(h / 2) * (W / 2) + w / 2] = m;
            }
    }
    return out;
}

Tensor maxpool2x2_backward(const Tensor& input, const Tensor& grad_out) {
    require(input.rank() == 4, "maxpool2x2_backward: input must be NxCxHxW");
    const std::size_t N = input.shape[0], C = input.shape[1], H = input.shape[2], W = input.shape[3];
    require(H % 2 == 0 && W % 2 == 0, "maxpool2x2_backward: H and W must be even");
    require(grad_out.shape == std::vector<std::size_t>({N, C, H / 2, W / 2}),
            "maxpool2x2_backward: grad shape " + shape_str(grad_out) + " does not match pooled output");

    Tensor grad_in({N, C, H, W});
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* in = input.data.data() + nc * H * W;
        const double* go = grad_out.data.data() + nc * (H / 2) * (W / 2);
        double* gi = grad_in.data.data() + nc * H * W;
        for (std::size_t h = 0; h < H; h += 2)
            for (std::size_t w = 0; w < W; w += 2) {
                // First maximal cell in row-major window scan gets the gradient.
                const std::size_t idx[4] = {h * W + w, h * W + w + 1, (h + 1) * W + w,
                                            (h + 1) * W + w + 1};
                std::size_t best = 0;
                for (std::size_t i = 1; i < 4; ++i)
                    if (in[idx[i]] > in[idx[best]]) best = i;
                gi[idx[best]] += go[(h / 2) * (W / 2) + w / 2];
            }
    }
    return grad_in;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    require(input.same_shape(grad_out), "relu_backward: shape mismatch " + shape_str(input) +
                                            " vs " + shape_str(grad_out));
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.size(); ++i)
        if (input[i] <= 0.0) grad_in[i] = 0.0;
    return grad_in;
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(input.rank() == 2, "linear: input must be NxD, got " + shape_str(input));
    require(weight.rank() == 2, "linear: weight must be DxU, got " + shape_str(weight));
    require(input.shape[1] == weight.shape[0], "linear: inner extents disagree, input " +
                                                   shape_str(input) + " vs weight " + shape_str(weight));
    require(bias.rank() == 1 && bias.shape[0] == weight.shape[1],
            "linear: bias must be length " + std::to_string(weight.shape[1]) + ", got " + shape_str(bias));

    const std::size_t N = input.shape[0], D = input.shape[1], U = weight.shape[1];
    Tensor out({N, U});
    for (std::size_t n = 0; n < N; ++n)
        std::copy(bias.data.begin(), bias.data.end(), out.data.begin() + n * U);
    matmul_acc(N, D, U, input.data.data(), weight.data.data(), out.data.data());
    check_finite(out, "linear");
    return out;
}

LinearGrads linear_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    require(input.rank() == 2 && weight.rank() == 2 && grad_out.rank() == 2,
            "linear_backward: rank-2 tensors required");
    const std::size_t N = input.shape[0], D = input.shape[1], U = weight.shape[1];
    require(grad_out.shape == std::vector<std::size_t>({N, U}),
            "linear_backward: grad shape " + shape_str(grad_out) + " does not match NxU");

    LinearGrads grads{Tensor({N, D}), Tensor({D, U}), Tensor({U})};

    // grad_input = grad_out . weight^T
    const std::vector<double> weight_t = transpose(D, U, weight.data.data());
    matmul_acc(N, U, D, grad_out.data.data(), weight_t.data(), grads.input.data.data());

    // grad_weight = input^T . grad_out
    const std::vector<double> input_t = transpose(N, D, input.data.data());
    matmul_acc(D, N, U, input_t.data(), grad_out.data.data(), grads.weight.data.data());

    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t u = 0; u < U; ++u) grads.bias[u] += grad_out.at(n, u);

    check_finite(grads.input, "linear_backward");
    check_finite(grads.weight, "linear_backward");
    return grads;
}

LossResult weighted_softmax_ce(const Tensor& logits, std::span<const int> labels,
                               std::span<const double> class_weights) {
    require(logits.rank() == 2, "weighted_softmax_ce: logits must be NxM, got " + shape_str(logits));
    const std::size_t N = logits.shape[0], M = logits.shape[1];
    require(N > 0, "weighted_softmax_ce: empty batch");
    require(labels.size() == N, "weighted_softmax_ce: " + std::to_string(labels.size()) +
                                    " labels for " + std::to_string(N) + " rows");
    for (double w : class_weights)
        require(w >= 0.0, "weighted_softmax_ce: negative class weight");
    for (int y : labels)
        require(y >= 0 && static_cast<std::size_t>(y) < M && static_cast<std::size_t>(y) < class_weights.size(),
                "weighted_softmax_ce: label " + std::to_string(y) + " out of range");

    double weight_mass = 0.0;
    for (int y : labels) weight_mass += class_weights[static_cast<std::size_t>(y)];
    require(weight_mass > 0.0, "weighted_softmax_ce: all applied weights are zero (degenerate batch)");

    LossResult result{0.0, Tensor({N, M})};
    std::vector<double> probs(M);
    for (std::size_t n = 0; n < N; ++n) {
        const double* row = logits.data.data() + n * M;
        double mx = row[0];
        for (std::size_t c = 1; c < M; ++c) mx = std::max(mx, row[c]);
        double sum = 0.0;
        for (std::size_t c = 0; c < M; ++c) {
            probs[c] = std::exp(row[c] - mx);
            sum += probs[c];
        }
        const double log_sum = std::log(sum);
        const std::size_t y = static_cast<std::size_t>(labels[n]);
        const double wn = class_weights[y] / weight_mass;
        result.loss += wn * (log_sum - (row[y] - mx));

        double* grad_row = result.grad_logits.data.data() + n * M;
        for (std::size_t c = 0; c < M; ++c) grad_row[c] = wn * probs[c] / sum;
        grad_row[y] -= wn;
    }
    if (!std::isfinite(result.loss))
        throw std::invalid_argument("weighted_softmax_ce: non-finite loss");
    check_finite(result.grad_logits, "weighted_softmax_ce");
    return result;
}

}  // namespace pxcl
