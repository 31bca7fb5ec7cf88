#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <span>

#include "doctest.h"
#include "pxcl/gradcheck.hpp"
#include "pxcl/model.hpp"
#include "pxcl/ops.hpp"
#include "pxcl/rng.hpp"
#include "pxcl/tensor.hpp"

using namespace pxcl;

namespace {

Tensor random_batch(std::size_t n, Rng& rng) {
    Tensor batch({n, 1, kImageSide, kImageSide});
    for (double& v : batch.data) v = rng.uniform();
    return batch;
}

bool bitwise_equal(const PneumoCnn& a, const PneumoCnn& b) {
    const auto pa = a.params();
    const auto pb = b.params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (pa[i]->name != pb[i]->name) return false;
        if (pa[i]->value.shape != pb[i]->value.shape) return false;
        if (pa[i]->value.data != pb[i]->value.data) return false;
    }
    return true;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("parameter count matches the architecture") {
    const PneumoCnn model = build_model(7);
    // conv1 32*1*9+32, conv2 64*32*9+64, fc1 3136*128+128, fc2 128*2+2.
    CHECK(parameter_count(model) == 288 + 32 + 18432 + 64 + 401408 + 128 + 256 + 2);
    CHECK(parameter_count(model) == 420610);
    CHECK(kFlattenUnits == 3136);
    CHECK(model.fc1_weight.value.shape == std::vector<std::size_t>{3136, 128});
}

TEST_CASE("initialization is deterministic in the seed") {
    const PneumoCnn a = build_model(7);
    const PneumoCnn b = build_model(7);
    CHECK(bitwise_equal(a, b));

    const PneumoCnn c = build_model(8);
    CHECK_FALSE(c.conv1_kernels.value.data == a.conv1_kernels.value.data);
}

TEST_CASE("initialization scales follow He fan-in and biases start at zero") {
    const PneumoCnn model = build_model(123);
    for (const ParamState* p : model.params()) {
        if (p->name.find("bias") != std::string::npos) {
            for (double v : p->value.data) CHECK(v == 0.0);
        }
    }
    // Empirical std of conv2 kernels (fan_in 32*9 = 288) close to sqrt(2/288).
    const std::vector<double>& w = model.conv2_kernels.value.data;
    double sum = 0.0, sq = 0.0;
    for (double v : w) {
        sum += v;
        sq += v * v;
    }
    const double mean = sum / static_cast<double>(w.size());
    const double stddev = std::sqrt(sq / static_cast<double>(w.size()) - mean * mean);
    CHECK(stddev == doctest::Approx(std::sqrt(2.0 / 288.0)).epsilon(0.05));
}

TEST_CASE("all-zero model maps any image to logits (0, 0)") {
    PneumoCnn model = build_model(7);
    for (ParamState* p : model.params()) p->value.zero();
    Rng rng(5);
    const Tensor batch = random_batch(3, rng);
    const Tensor logits = forward(model, batch);
    CHECK(logits.shape == std::vector<std::size_t>{3, 2});
    for (double v : logits.data) CHECK(v == 0.0);
}

TEST_CASE("forward produces an Nx2 tensor for a 32-image batch") {
    const PneumoCnn model = build_model(7);
    Rng rng(6);
    const Tensor batch = random_batch(32, rng);
    ForwardTrace trace;
    const Tensor logits = forward(model, batch, trace);
    CHECK(logits.shape == std::vector<std::size_t>{32, 2});
    CHECK(trace.flat.shape == std::vector<std::size_t>{32, kFlattenUnits});
    CHECK(trace.pool2_out.shape == std::vector<std::size_t>{32, 64, 7, 7});
    check_finite(logits, "logits");
}

TEST_CASE("each batch row equals the single-sample forward of that image") {
    const PneumoCnn model = build_model(11);
    Rng rng(12);
    const Tensor batch = random_batch(4, rng);
    const Tensor batched = forward(model, batch);
    for (std::size_t i = 0; i < 4; ++i) {
        Tensor single({1, 1, kImageSide, kImageSide});
        for (std::size_t p = 0; p < kImagePixels; ++p)
            single.data[p] = batch.data[i * kImagePixels + p];
        const Tensor one = forward(model, single);
        CHECK(std::abs(one.at(0, 0) - batched.at(i, 0)) < 1e-12);
        CHECK(std::abs(one.at(0, 1) - batched.at(i, 1)) < 1e-12);
    }
}

TEST_CASE("forward rejects inputs that are not 1x28x28 images") {
    const PneumoCnn model = build_model(7);
    Tensor wrong({1, 1, 27, 28});
    CHECK_THROWS_AS(forward(model, wrong), std::invalid_argument);
    Tensor channels({1, 3, 28, 28});
    CHECK_THROWS_AS(forward(model, channels), std::invalid_argument);
}

TEST_CASE("predict follows the logit order and breaks ties toward class 0") {
    PneumoCnn model = build_model(7);
    for (ParamState* p : model.params()) p->value.zero();
    Rng rng(9);
    const Tensor batch = random_batch(2, rng);

    // With all weights zero the logits equal fc2_bias, the same for every image.
    model.fc2_bias.value.data = {0.2, 0.9};
    std::vector<int> picks = predict(model, batch);
    CHECK(picks == std::vector<int>{1, 1});

    model.fc2_bias.value.data = {0.9, 0.2};
    picks = predict(model, batch);
    CHECK(picks == std::vector<int>{0, 0});

    model.fc2_bias.value.data = {0.4, 0.4};  // exact tie
    picks = predict(model, batch);
    CHECK(picks == std::vector<int>{0, 0});
}

TEST_CASE("prediction is invariant to a constant shift of both logits") {
    PneumoCnn model = build_model(19);
    Rng rng(20);
    const Tensor batch = random_batch(6, rng);
    const std::vector<int> before = predict(model, batch);
    model.fc2_bias.value.data[0] += 3.0;
    model.fc2_bias.value.data[1] += 3.0;
    CHECK(predict(model, batch) == before);
}

TEST_CASE("full-model gradients agree with finite differences") {
    PneumoCnn model = build_model(31);
    Rng rng(32);
    const Tensor batch = random_batch(2, rng);
    const std::vector<int> labels{0, 1};
    const std::vector<double> weights{1.0, 2.0};

    auto loss_fn = [&]() {
        const Tensor logits = forward(model, batch);
        return weighted_softmax_ce(logits, labels, weights).loss;
    };
    model.zero_grads();
    ForwardTrace trace;
    const Tensor logits = forward(model, batch, trace);
    const LossResult res = weighted_softmax_ce(logits, labels, weights);
    backward(model, trace, res.grad_logits);

    const auto params = model.params();
    Rng probe_rng(33);
    const double err = gradient_check(loss_fn, std::span<ParamState* const>(params), 50, probe_rng);
    CHECK(err < 1e-3);
}

TEST_CASE("backward accumulates until grads are cleared") {
    PneumoCnn model = build_model(41);
    Rng rng(42);
    const Tensor batch = random_batch(2, rng);
    const std::vector<int> labels{0, 1};
    const std::vector<double> weights{1.0, 1.0};

    model.zero_grads();
    ForwardTrace trace;
    const Tensor logits = forward(model, batch, trace);
    const LossResult res = weighted_softmax_ce(logits, labels, weights);
    backward(model, trace, res.grad_logits);
    const Tensor once = model.fc1_weight.grad;
    backward(model, trace, res.grad_logits);
    for (std::size_t i = 0; i < once.data.size(); ++i)
        CHECK(model.fc1_weight.grad.data[i] == doctest::Approx(2.0 * once.data[i]).epsilon(1e-12));
    model.zero_grads();
    for (double v : model.fc1_weight.grad.data) CHECK(v == 0.0);
}

TEST_CASE("checkpoints round-trip bitwise") {
    PneumoCnn model = build_model(55);
    // Perturb moments so only value payloads matter for the round trip.
    model.fc2_bias.value.data = {0.125, -2.5};
    const auto path = temp_file("pxcl_test_model.ckpt");
    save_checkpoint(model, path);
    const PneumoCnn restored = load_checkpoint(path);
    CHECK(bitwise_equal(model, restored));
    std::filesystem::remove(path);
}

TEST_CASE("loading a corrupted checkpoint reports a bad header") {
    const auto path = temp_file("pxcl_test_model_bad.ckpt");
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOTMAGIC plus junk";
    }
    bool threw = false;
    try {
        load_checkpoint(path);
    } catch (const std::runtime_error& e) {
        threw = true;
        CHECK(std::string(e.what()).find("magic") != std::string::npos);
    }
    CHECK(threw);
    std::filesystem::remove(path);

    CHECK_THROWS_AS(load_checkpoint(temp_file("pxcl_no_such_file.ckpt")), std::runtime_error);
}
