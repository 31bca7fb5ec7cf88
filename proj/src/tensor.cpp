#include "pxcl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pxcl {

std::size_t shape_product(const std::vector<std::size_t>& extents) {
    std::size_t n = 1;
    for (std::size_t e : extents) n *= e;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> extents)
    : shape(std::move(extents)), data(shape_product(shape), 0.0) {
    if (shape.empty() || shape.size() > 4)
        throw std::invalid_argument("Tensor: rank must be 1..4, got " + std::to_string(shape.size()));
}

Tensor::Tensor(std::vector<std::size_t> extents, std::vector<double> values)
    : shape(std::move(extents)), data(std::move(values)) {
    if (shape.empty() || shape.size() > 4)
        throw std::invalid_argument("Tensor: rank must be 1..4, got " + std::to_string(shape.size()));
    if (shape_product(shape) != data.size())
        throw std::invalid_argument("Tensor: shape " + shape_str(*this) + " does not match " +
                                    std::to_string(data.size()) + " values");
}

void Tensor::fill(double value) {
    std::fill(data.begin(), data.end(), value);
}

std::string shape_str(const Tensor& t) {
    std::string s = "[";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(t.shape[i]);
    }
    return s + "]";
}

void accumulate(Tensor& dst, const Tensor& src) {
    if (!dst.same_shape(src))
        throw std::invalid_argument("accumulate: shape mismatch " + shape_str(dst) + " vs " +
                                    shape_str(src));
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

void check_finite(const Tensor& t, const char* where) {
    for (double v : t.data) {
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(where) + ": non-finite value in tensor " + shape_str(t));
    }
}

}  // namespace pxcl
