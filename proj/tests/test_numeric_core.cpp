#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "pxcl/gradcheck.hpp"
#include "pxcl/ops.hpp"
#include "pxcl/optim.hpp"
#include "pxcl/rng.hpp"
#include "pxcl/tensor.hpp"

using namespace pxcl;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Direct nested-loop cross-correlation with zero padding 1, stride 1.
Tensor conv2d_oracle(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    const std::size_t n = input.shape[0], c_in = input.shape[1];
    const std::size_t h = input.shape[2], w = input.shape[3];
    const std::size_t c_out = kernels.shape[0];
    Tensor out({n, c_out, h, w});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) {
                    double acc = bias.data[o];
                    for (std::size_t c = 0; c < c_in; ++c)
                        for (int ky = 0; ky < 3; ++ky)
                            for (int kx = 0; kx < 3; ++kx) {
                                const int sy = static_cast<int>(y) + ky - 1;
                                const int sx = static_cast<int>(x) + kx - 1;
                                if (sy < 0 || sy >= static_cast<int>(h) || sx < 0 ||
                                    sx >= static_cast<int>(w))
                                    continue;
                                acc += input.at(i, c, static_cast<std::size_t>(sy),
                                                static_cast<std::size_t>(sx)) *
                                       kernels.at(o, c, static_cast<std::size_t>(ky),
                                                  static_cast<std::size_t>(kx));
                            }
                    out.at(i, o, y, x) = acc;
                }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 64; ++i) {
        const std::uint64_t va = a.next_u64();
        all_equal = all_equal && va == b.next_u64();
        any_diff = any_diff || va != c.next_u64();
    }
    CHECK(all_equal);
    CHECK(any_diff);
}

TEST_CASE("rng uniform respects bounds and permutation covers the index set") {
    Rng rng(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(2.0, 5.0);
        CHECK(u >= 2.0);
        CHECK(u < 5.0);
    }
    std::vector<std::size_t> perm = rng.permutation(100);
    std::vector<bool> seen(100, false);
    for (std::size_t idx : perm) seen.at(idx) = true;
    for (bool s : seen) CHECK(s);
}

TEST_CASE("rng below is unbiased over a small range") {
    Rng rng(11);
    std::vector<int> counts(5, 0);
    const int draws = 100000;
    for (int i = 0; i < draws; ++i) counts[rng.below(5)] += 1;
    for (int c : counts) CHECK(std::abs(c - draws / 5) < 5 * std::sqrt(draws / 5.0));
}

TEST_CASE("tensor enforces rank and finiteness") {
    CHECK_THROWS_AS(Tensor(std::vector<std::size_t>{}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({1, 2, 3, 4, 5}), std::invalid_argument);
    Tensor t({2, 2});
    t.data[3] = std::nan("");
    CHECK_THROWS_AS(check_finite(t, "test"), std::invalid_argument);
}

TEST_CASE("conv2d zero input gives zero output") {
    Tensor input({1, 1, 4, 4});
    Rng rng(3);
    Tensor kernels = random_tensor({2, 1, 3, 3}, rng);
    Tensor bias({2});
    const Tensor out = conv2d(input, kernels, bias);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("conv2d delta kernel reproduces the input exactly") {
    Rng rng(5);
    Tensor input = random_tensor({2, 1, 5, 5}, rng);
    Tensor kernels({1, 1, 3, 3});
    kernels.at(0, 0, 1, 1) = 1.0;
    Tensor bias({1});
    const Tensor out = conv2d(input, kernels, bias);
    CHECK(max_abs_diff(out, input) == 0.0);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
    Rng rng(9);
    Tensor input = random_tensor({1, 1, 4, 4}, rng);
    Tensor kernels = random_tensor({1, 1, 3, 3}, rng);
    Tensor bias = random_tensor({1}, rng);
    CHECK(max_abs_diff(conv2d(input, kernels, bias), conv2d_oracle(input, kernels, bias)) < 1e-12);

    Tensor input2 = random_tensor({2, 3, 6, 5}, rng);
    Tensor kernels2 = random_tensor({4, 3, 3, 3}, rng);
    Tensor bias2 = random_tensor({4}, rng);
    CHECK(max_abs_diff(conv2d(input2, kernels2, bias2), conv2d_oracle(input2, kernels2, bias2)) <
          1e-12);
}

TEST_CASE("conv2d preserves spatial size for all sizes >= 1") {
    Rng rng(2);
    for (std::size_t h = 1; h <= 6; ++h)
        for (std::size_t w = 1; w <= 6; ++w) {
            Tensor input = random_tensor({1, 1, h, w}, rng);
            Tensor kernels = random_tensor({1, 1, 3, 3}, rng);
            Tensor bias({1});
            const Tensor out = conv2d(input, kernels, bias);
            CHECK(out.shape == std::vector<std::size_t>{1, 1, h, w});
        }
}

TEST_CASE("conv2d rejects mismatched shapes with a diagnostic") {
    Tensor input({1, 2, 4, 4});
    Tensor kernels({1, 3, 3, 3});
    Tensor bias({1});
    CHECK_THROWS_AS(conv2d(input, kernels, bias), std::invalid_argument);
}

TEST_CASE("conv2d backward matches finite differences") {
    Rng rng(13);
    const Tensor input = random_tensor({2, 2, 4, 4}, rng);
    Tensor kernels = random_tensor({3, 2, 3, 3}, rng, -0.5, 0.5);
    Tensor bias = random_tensor({3}, rng, -0.1, 0.1);
    const Tensor grad_out = random_tensor({2, 3, 4, 4}, rng);

    const Conv2dGrads grads = conv2d_backward(input, kernels, grad_out);
    // Scalar objective sum(conv * grad_out); its kernel gradient is grads.kernels.
    auto objective = [&]() {
        const Tensor out = conv2d(input, kernels, bias);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * grad_out.data[i];
        return s;
    };
    const double h = 1e-6;
    for (std::size_t probe : {std::size_t(0), std::size_t(17), std::size_t(53)}) {
        const double saved = kernels.data[probe];
        kernels.data[probe] = saved + h;
        const double up = objective();
        kernels.data[probe] = saved - h;
        const double down = objective();
        kernels.data[probe] = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(grads.kernels.data[probe] == doctest::Approx(numeric).epsilon(1e-6));
    }
    // Bias gradient is the sum of grad_out over each output channel.
    for (std::size_t o = 0; o < 3; ++o) {
        double expected = 0.0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t x = 0; x < 4; ++x) expected += grad_out.at(n, o, y, x);
        CHECK(grads.bias.data[o] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("maxpool2x2 forward oracles") {
    Tensor constant({1, 1, 4, 4});
    constant.fill(3.5);
    const Tensor pooled = maxpool2x2(constant);
    CHECK(pooled.shape == std::vector<std::size_t>{1, 1, 2, 2});
    for (double v : pooled.data) CHECK(v == 3.5);

    Tensor window({1, 1, 2, 2});
    window.at(0, 0, 0, 0) = 1.0;
    window.at(0, 0, 0, 1) = 2.0;
    window.at(0, 0, 1, 0) = 3.0;
    window.at(0, 0, 1, 1) = 4.0;
    CHECK(maxpool2x2(window).data[0] == 4.0);

    Rng rng(21);
    const Tensor input = random_tensor({1, 1, 6, 6}, rng);
    const Tensor out = maxpool2x2(input);
    for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t x = 0; x < 3; ++x) {
            const double expected =
                std::max(std::max(input.at(0, 0, 2 * y, 2 * x), input.at(0, 0, 2 * y, 2 * x + 1)),
                         std::max(input.at(0, 0, 2 * y + 1, 2 * x), input.at(0, 0, 2 * y + 1, 2 * x + 1)));
            CHECK(out.at(0, 0, y, x) == expected);
        }

    Tensor odd({1, 1, 3, 4});
    CHECK_THROWS_AS(maxpool2x2(odd), std::invalid_argument);
}

TEST_CASE("maxpool2x2 backward routes to the first maximal cell") {
    Tensor input({1, 1, 2, 2});
    input.fill(1.0);  // four-way tie
    Tensor grad_out({1, 1, 1, 1});
    grad_out.data[0] = 5.0;
    const Tensor grad_in = maxpool2x2_backward(input, grad_out);
    CHECK(grad_in.at(0, 0, 0, 0) == 5.0);
    CHECK(grad_in.at(0, 0, 0, 1) == 0.0);
    CHECK(grad_in.at(0, 0, 1, 0) == 0.0);
    CHECK(grad_in.at(0, 0, 1, 1) == 0.0);

    input.at(0, 0, 1, 0) = 2.0;  // unique max
    const Tensor grad_in2 = maxpool2x2_backward(input, grad_out);
    CHECK(grad_in2.at(0, 0, 1, 0) == 5.0);
    CHECK(grad_in2.at(0, 0, 0, 0) == 0.0);
}

TEST_CASE("relu forward and backward") {
    Tensor t({3});
    t.data = {-1.0, 0.0, 2.0};
    const Tensor out = relu(t);
    CHECK(out.data == std::vector<double>{0.0, 0.0, 2.0});

    Tensor neg({2, 2});
    neg.fill(-3.0);
    for (double v : relu(neg).data) CHECK(v == 0.0);

    Rng rng(8);
    const Tensor r = random_tensor({2, 3}, rng);
    const Tensor ro = relu(r);
    for (std::size_t i = 0; i < r.data.size(); ++i) CHECK(ro.data[i] == std::max(0.0, r.data[i]));

    Tensor grad_out({3});
    grad_out.data = {10.0, 10.0, 10.0};
    const Tensor grad_in = relu_backward(t, grad_out);
    CHECK(grad_in.data == std::vector<double>{0.0, 0.0, 10.0});  // zero at exactly 0
}

TEST_CASE("linear forward oracles") {
    Tensor input({2, 3});
    input.data = {1, 2, 3, 4, 5, 6};
    Tensor eye({3, 3});
    eye.at(0, 0) = eye.at(1, 1) = eye.at(2, 2) = 1.0;
    Tensor zero_bias({3});
    CHECK(max_abs_diff(linear(input, eye, zero_bias), input) == 0.0);

    Tensor zero_w({3, 2});
    Tensor bias({2});
    bias.data = {0.5, -0.25};
    const Tensor rows = linear(input, zero_w, bias);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(rows.at(i, 0) == 0.5);
        CHECK(rows.at(i, 1) == -0.25);
    }

    Rng rng(14);
    const Tensor a = random_tensor({2, 3}, rng);
    const Tensor w = random_tensor({3, 2}, rng);
    const Tensor b = random_tensor({2}, rng);
    const Tensor out = linear(a, w, b);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t u = 0; u < 2; ++u) {
            double expected = b.data[u];
            for (std::size_t d = 0; d < 3; ++d) expected += a.at(i, d) * w.at(d, u);
            CHECK(std::abs(out.at(i, u) - expected) < 1e-12);
        }

    Tensor bad_w({4, 2});
    CHECK_THROWS_AS(linear(a, bad_w, b), std::invalid_argument);
}

TEST_CASE("weighted softmax cross-entropy oracles") {
    Tensor logits({1, 2});
    std::vector<int> label0{0};
    std::vector<double> weights{2.5, 1.0};
    const LossResult even = weighted_softmax_ce(logits, label0, weights);
    CHECK(even.loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor saturated({1, 2});
    saturated.at(0, 0) = 50.0;
    saturated.at(0, 1) = -50.0;
    const LossResult sat = weighted_softmax_ce(saturated, label0, weights);
    CHECK(sat.loss < 1e-20);

    // Two samples, per-sample weights 1 and 3: loss = (l1 + 3*l2) / 4.
    Rng rng(17);
    Tensor two = random_tensor({2, 2}, rng);
    std::vector<int> labels{0, 1};
    std::vector<double> w13{1.0, 3.0};
    const LossResult mixed = weighted_softmax_ce(two, labels, w13);
    auto sample_loss = [&](std::size_t i, int y) {
        const double a = two.at(i, 0), b = two.at(i, 1);
        const double m = std::max(a, b);
        const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
        return lse - (y == 0 ? a : b);
    };
    const double expected = (1.0 * sample_loss(0, 0) + 3.0 * sample_loss(1, 1)) / 4.0;
    CHECK(mixed.loss == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("loss is invariant to the scale of the class weights") {
    Rng rng(19);
    Tensor logits = random_tensor({4, 2}, rng);
    std::vector<int> labels{0, 1, 1, 0};
    std::vector<double> weights{0.8, 1.7};
    std::vector<double> scaled{0.8 * 37.0, 1.7 * 37.0};
    const LossResult base = weighted_softmax_ce(logits, labels, weights);
    const LossResult big = weighted_softmax_ce(logits, labels, scaled);
    CHECK(base.loss == doctest::Approx(big.loss).epsilon(1e-12));
    CHECK(max_abs_diff(base.grad_logits, big.grad_logits) < 1e-12);
}

TEST_CASE("loss rejects a degenerate batch with zero applied weight") {
    Tensor logits({2, 2});
    std::vector<int> labels{1, 1};
    std::vector<double> weights{1.0, 0.0};  // every sample weighted 0
    CHECK_THROWS_AS(weighted_softmax_ce(logits, labels, weights), std::invalid_argument);
}

TEST_CASE("loss gradient matches finite differences") {
    Rng rng(23);
    Tensor logits = random_tensor({3, 2}, rng);
    std::vector<int> labels{0, 1, 0};
    std::vector<double> weights{1.0, 2.0};
    const LossResult res = weighted_softmax_ce(logits, labels, weights);
    const double h = 1e-6;
    for (std::size_t i = 0; i < logits.data.size(); ++i) {
        const double saved = logits.data[i];
        logits.data[i] = saved + h;
        const double up = weighted_softmax_ce(logits, labels, weights).loss;
        logits.data[i] = saved - h;
        const double down = weighted_softmax_ce(logits, labels, weights).loss;
        logits.data[i] = saved;
        CHECK(res.grad_logits.data[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("adam zero gradient leaves the value unchanged") {
    ParamState p("w", Tensor({2}));
    p.value.data = {1.5, -2.0};
    OptimizerConfig cfg;
    adam_step(p, cfg);
    CHECK(p.value.data == std::vector<double>{1.5, -2.0});
    CHECK(p.step_count == 1);
}

TEST_CASE("adam first step magnitude is close to the learning rate") {
    ParamState p("w", Tensor({1}));
    p.value.data = {0.0};
    p.grad.data = {0.5};
    OptimizerConfig cfg;
    adam_step(p, cfg);
    CHECK(p.value.data[0] == doctest::Approx(-0.001).epsilon(1e-4));
}

TEST_CASE("adam matches a scalar step-by-step oracle over three steps") {
    ParamState p("w", Tensor({1}));
    p.value.data = {1.0};
    OptimizerConfig cfg;

    double w = 1.0, m = 0.0, v = 0.0;
    const double g = 0.3;
    for (int t = 1; t <= 3; ++t) {
        p.grad.data = {g};
        adam_step(p, cfg);

        m = cfg.beta1 * m + (1 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
        const double mhat = m / (1 - std::pow(cfg.beta1, t));
        const double vhat = v / (1 - std::pow(cfg.beta2, t));
        w -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
        CHECK(p.value.data[0] == doctest::Approx(w).epsilon(1e-12));
    }
    CHECK(p.step_count == 3);
}

TEST_CASE("adam first-step size never exceeds the learning rate by more than epsilon slack") {
    Rng rng(29);
    ParamState p("w", Tensor({64}));
    p.value = random_tensor({64}, rng);
    p.grad = random_tensor({64}, rng, -3.0, 3.0);
    const Tensor before = p.value;
    OptimizerConfig cfg;
    adam_step(p, cfg);
    for (std::size_t i = 0; i < 64; ++i)
        CHECK(std::abs(p.value.data[i] - before.data[i]) <= cfg.learning_rate + 1e-9);
}

TEST_CASE("sgd oracles") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::Sgd;
    cfg.learning_rate = 0.1;
    cfg.sgd_momentum = 0.0;

    ParamState p("w", Tensor({1}));
    p.value.data = {1.0};
    sgd_step(p, cfg);
    CHECK(p.value.data[0] == 1.0);  // zero grad

    p.grad.data = {2.0};
    sgd_step(p, cfg);
    CHECK(p.value.data[0] == doctest::Approx(0.8).epsilon(1e-15));

    // Momentum 0.9, two constant-gradient steps: v1 = g, v2 = 0.9 g + g.
    ParamState q("w", Tensor({1}));
    q.value.data = {0.0};
    cfg.sgd_momentum = 0.9;
    q.grad.data = {1.0};
    sgd_step(q, cfg);
    CHECK(q.value.data[0] == doctest::Approx(-0.1).epsilon(1e-12));
    q.grad.data = {1.0};
    sgd_step(q, cfg);
    CHECK(q.value.data[0] == doctest::Approx(-0.1 - 0.1 * 1.9).epsilon(1e-12));
}

TEST_CASE("gradient_check validates a quadratic exactly") {
    ParamState p("w", Tensor({1}));
    p.value.data = {3.0};
    p.grad.data = {6.0};  // d/dw w^2 at w=3
    ParamState* params[] = {&p};
    Rng rng(31);
    const double err = gradient_check([&]() { return p.value.data[0] * p.value.data[0]; }, params,
                                      10, rng);
    CHECK(err < 1e-9);
}

TEST_CASE("gradient_check validates the linear layer below 1e-7") {
    Rng rng(37);
    const Tensor input = random_tensor({4, 5}, rng);
    ParamState weight("w", random_tensor({5, 3}, rng));
    ParamState bias("b", random_tensor({3}, rng));
    const Tensor target = random_tensor({4, 3}, rng);

    auto loss_fn = [&]() {
        const Tensor out = linear(input, weight.value, bias.value);
        double s = 0.0;
        for (std::size_t i = 0; i < out.data.size(); ++i) {
            const double d = out.data[i] - target.data[i];
            s += 0.5 * d * d;
        }
        return s;
    };
    // Analytic gradients via the layer's backward with grad_out = out - target.
    const Tensor out = linear(input, weight.value, bias.value);
    Tensor grad_out = out;
    for (std::size_t i = 0; i < grad_out.data.size(); ++i) grad_out.data[i] -= target.data[i];
    LinearGrads grads = linear_backward(input, weight.value, grad_out);
    weight.grad = grads.weight;
    bias.grad = grads.bias;

    ParamState* params[] = {&weight, &bias};
    Rng rng2(41);
    CHECK(gradient_check(loss_fn, params, 50, rng2) < 1e-7);
}

TEST_CASE("layer backward passes a 50-coordinate gradient check") {
    // Composite: conv -> relu -> pool -> flatten-sum objective, probing conv params.
    Rng rng(43);
    const Tensor input = random_tensor({1, 1, 4, 4}, rng, 0.0, 1.0);
    ParamState kernels("k", random_tensor({2, 1, 3, 3}, rng, -0.5, 0.5));
    ParamState bias("b", random_tensor({2}, rng, -0.1, 0.1));

    auto forward_loss = [&]() {
        const Tensor c = conv2d(input, kernels.value, bias.value);
        const Tensor r = relu(c);
        const Tensor p = maxpool2x2(r);
        double s = 0.0;
        for (double v : p.data) s += v * v;
        return 0.5 * s;
    };
    const Tensor c = conv2d(input, kernels.value, bias.value);
    const Tensor r = relu(c);
    const Tensor p = maxpool2x2(r);
    Tensor grad_p = p;  // d(0.5 sum v^2)/dv = v
    const Tensor grad_r = maxpool2x2_backward(r, grad_p);
    const Tensor grad_c = relu_backward(c, grad_r);
    const Conv2dGrads grads = conv2d_backward(input, kernels.value, grad_c);
    kernels.grad = grads.kernels;
    bias.grad = grads.bias;

    ParamState* params[] = {&kernels, &bias};
    Rng rng2(47);
    CHECK(gradient_check(forward_loss, params, 50, rng2) < 1e-3);
}
