#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "mlcapsule/bytes.hpp"

namespace mlcapsule::nn {

// Row-major f32 tensor. Convolutional data uses CHW order.
struct Tensor {
    std::vector<std::uint32_t> dims;
    std::vector<float> data;

    Tensor() = default;
    Tensor(std::vector<std::uint32_t> d, std::vector<float> values);

    static Tensor zeros(std::vector<std::uint32_t> d);

    std::size_t size() const { return data.size(); }
    std::uint32_t rank() const { return static_cast<std::uint32_t>(dims.size()); }

    bool same_shape(const Tensor& other) const { return dims == other.dims; }

    // Throws DivergenceError if any element is NaN or infinite.
    void ensure_finite(const char* where) const;

    bool operator==(const Tensor&) const = default;
};

std::size_t shape_size(const std::vector<std::uint32_t>& dims);

}  // namespace mlcapsule::nn
