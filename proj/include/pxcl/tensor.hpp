#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace pxcl {

// Dense row-major float64 tensor, rank 1..4.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> extents);
    Tensor(std::vector<std::size_t> extents, std::vector<double> values);

    static Tensor zeros(std::vector<std::size_t> extents) { return Tensor(std::move(extents)); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t extent(std::size_t dim) const { return shape.at(dim); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
    double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data[((n * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }

    void fill(double value);
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_str(const Tensor& t);

// dst += src, elementwise. Shapes must match.
void accumulate(Tensor& dst, const Tensor& src);

// Throws std::invalid_argument naming `where` if any element is NaN/Inf.
void check_finite(const Tensor& t, const char* where);

std::size_t shape_product(const std::vector<std::size_t>& extents);

}  // namespace pxcl
