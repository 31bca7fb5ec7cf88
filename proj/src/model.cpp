#include "pxcl/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "pxcl/ops.hpp"
#include "pxcl/rng.hpp"

namespace pxcl {

namespace {

Tensor he_normal(std::vector<std::size_t> shape, std::size_t fan_in, Rng& rng) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (double& v : t.data) v = stddev * rng.normal();
    return t;
}

void check_batch(const Tensor& batch) {
    if (batch.rank() != 4 || batch.shape[1] != 1 || batch.shape[2] != kImageSide ||
        batch.shape[3] != kImageSide)
        throw std::invalid_argument("forward: batch must be Nx1x28x28, got " + shape_str(batch));
}

}  // namespace

std::array<ParamState*, 8> PneumoCnn::params() {
    return {&conv1_kernels, &conv1_bias, &conv2_kernels, &conv2_bias,
            &fc1_weight,    &fc1_bias,   &fc2_weight,    &fc2_bias};
}

std::array<const ParamState*, 8> PneumoCnn::params() const {
    return {&conv1_kernels, &conv1_bias, &conv2_kernels, &conv2_bias,
            &fc1_weight,    &fc1_bias,   &fc2_weight,    &fc2_bias};
}

void PneumoCnn::zero_grads() {
    for (ParamState* p : params()) p->zero_grad();
}

PneumoCnn build_model(std::uint64_t seed) {
    Rng rng = substream(seed, stream::kInit);
    PneumoCnn m;
    m.conv1_kernels = ParamState("conv1.kernels", he_normal({32, 1, 3, 3}, 1 * 3 * 3, rng));
    m.conv1_bias = ParamState("conv1.bias", Tensor({32}));
    m.conv2_kernels = ParamState("conv2.kernels", he_normal({64, 32, 3, 3}, 32 * 3 * 3, rng));
    m.conv2_bias = ParamState("conv2.bias", Tensor({64}));
    m.fc1_weight = ParamState("fc1.weight", he_normal({kFlattenUnits, 128}, kFlattenUnits, rng));
    m.fc1_bias = ParamState("fc1.bias", Tensor({128}));
    m.fc2_weight = ParamState("fc2.weight", he_normal({128, kNumClasses}, 128, rng));
    m.fc2_bias = ParamState("fc2.bias", Tensor({kNumClasses}));
    return m;
}

std::size_t parameter_count(const PneumoCnn& model) {
    std::size_t n = 0;
    for (const ParamState* p : model.params()) n += p->value.size();
    return n;
}

Tensor forward(const PneumoCnn& model, const Tensor& batch, ForwardTrace& trace) {
    check_batch(batch);
    const std::size_t n = batch.shape[0];

    trace.input = batch;
    trace.conv1_out = conv2d(batch, model.conv1_kernels.value, model.conv1_bias.value);
    trace.relu1_out = relu(trace.conv1_out);
    trace.pool1_out = maxpool2x2(trace.relu1_out);
    trace.conv2_out = conv2d(trace.pool1_out, model.conv2_kernels.value, model.conv2_bias.value);
    trace.relu2_out = relu(trace.conv2_out);
    trace.pool2_out = maxpool2x2(trace.relu2_out);

    trace.flat = Tensor({n, kFlattenUnits}, trace.pool2_out.data);
    trace.fc1_out = linear(trace.flat, model.fc1_weight.value, model.fc1_bias.value);
    trace.relu3_out = relu(trace.fc1_out);
    return linear(trace.relu3_out, model.fc2_weight.value, model.fc2_bias.value);
}

Tensor forward(const PneumoCnn& model, const Tensor& batch) {
    ForwardTrace trace;
    return forward(model, batch, trace);
}

void backward(PneumoCnn& model, const ForwardTrace& trace, const Tensor& grad_logits) {
    const std::size_t n = trace.input.shape[0];

    LinearGrads fc2 = linear_backward(trace.relu3_out, model.fc2_weight.value, grad_logits);
    accumulate(model.fc2_weight.grad, fc2.weight);
    accumulate(model.fc2_bias.grad, fc2.bias);

    Tensor g = relu_backward(trace.fc1_out, fc2.input);
    LinearGrads fc1 = linear_backward(trace.flat, model.fc1_weight.value, g);
    accumulate(model.fc1_weight.grad, fc1.weight);
    accumulate(model.fc1_bias.grad, fc1.bias);

    Tensor g_pool2 = Tensor({n, 64, 7, 7}, std::move(fc1.input.data));
    Tensor g_relu2 = maxpool2x2_backward(trace.relu2_out, g_pool2);
    Tensor g_conv2 = relu_backward(trace.conv2_out, g_relu2);
    Conv2dGrads conv2 = conv2d_backward(trace.pool1_out, model.conv2_kernels.value, g_conv2);
    accumulate(model.conv2_kernels.grad, conv2.kernels);
    accumulate(model.conv2_bias.grad, conv2.bias);

    Tensor g_relu1 = maxpool2x2_backward(trace.relu1_out, conv2.input);
    Tensor g_conv1 = relu_backward(trace.conv1_out, g_relu1);
    Conv2dGrads conv1 = conv2d_backward(trace.input, model.conv1_kernels.value, g_conv1);
    accumulate(model.conv1_kernels.grad, conv1.kernels);
    accumulate(model.conv1_bias.grad, conv1.bias);
}

std::vector<int> predict(const PneumoCnn& model, const Tensor& batch) {
    const Tensor logits = forward(model, batch);
    std::vector<int> labels(logits.shape[0]);
    for (std::size_t i = 0; i < labels.size(); ++i)
        labels[i] = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
    return labels;
}

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'X', 'C', 'L', 'M', 'D', 'L', '1'};

template <typename T>
void write_le(std::ofstream& out, T value) {
    // Build the byte image explicitly so the file is little-endian everywhere.
    unsigned char bytes[sizeof(T)];
    std::uint64_t bits;
    if constexpr (sizeof(T) == 8) {
        std::memcpy(&bits, &value, 8);
    } else {
        bits = static_cast<std::uint64_t>(value);
    }
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw std::runtime_error("checkpoint: truncated file");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
        T value;
        std::memcpy(&value, &bits, 8);
        return value;
    } else {
        return static_cast<T>(bits);
    }
}

}  // namespace

void save_checkpoint(const PneumoCnn& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
    out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
    for (const ParamState* p : model.params()) {
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_le<std::uint32_t>(out, static_cast<std::uint32_t>(p->value.rank()));
        for (std::size_t e : p->value.shape) write_le<std::uint64_t>(out, e);
        for (double v : p->value.data) write_le<double>(out, v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

PneumoCnn load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw std::runtime_error("checkpoint: bad magic in " + path.string());

    PneumoCnn model = build_model(0);
    for (ParamState* p : model.params()) {
        const auto name_len = read_le<std::uint32_t>(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in || name != p->name)
            throw std::runtime_error("checkpoint: expected parameter '" + p->name + "', found '" +
                                     name + "'");
        const auto rank = read_le<std::uint32_t>(in);
        std::vector<std::size_t> shape(rank);
        for (auto& e : shape) e = static_cast<std::size_t>(read_le<std::uint64_t>(in));
        if (shape != p->value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for parameter '" + p->name + "'");
        for (double& v : p->value.data) v = read_le<double>(in);
        p->grad.zero();
        p->moment1.zero();
        p->moment2.zero();
        p->step_count = 0;
    }
    return model;
}

}  // namespace pxcl
