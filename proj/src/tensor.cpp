#include "mlcapsule/tensor.hpp"

#include <cmath>

#include "mlcapsule/error.hpp"

namespace mlcapsule::nn {

std::size_t shape_size(const std::vector<std::uint32_t>& dims) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::uint32_t> d, std::vector<float> values)
    : dims(std::move(d)), data(std::move(values)) {
    if (shape_size(dims) != data.size()) {
        throw Error(ErrorCode::ShapeMismatch,
                    "tensor data length does not match dims product");
    }
}

Tensor Tensor::zeros(std::vector<std::uint32_t> d) {
    std::size_t n = shape_size(d);
    return Tensor(std::move(d), std::vector<float>(n, 0.0f));
}

void Tensor::ensure_finite(const char* where) const {
    for (float v : data) {
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::DivergenceError,
                        std::string("non-finite value in ") + where);
        }
    }
}

}  // namespace mlcapsule::nn
