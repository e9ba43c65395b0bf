#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mlcapsule/tensor.hpp"

namespace testutil {

// Self-deleting temporary directory per test case.
class TmpDir {
public:
    explicit TmpDir(const std::string& tag) {
        auto base = std::filesystem::temp_directory_path();
        path_ = base / ("mlcapsule-test-" + tag + "-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TmpDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline mlcapsule::nn::Tensor random_tensor(const std::vector<std::uint32_t>& dims,
                                           std::uint64_t seed, float lo = -1.0f,
                                           float hi = 1.0f) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> dist(lo, hi);
    auto t = mlcapsule::nn::Tensor::zeros(dims);
    for (auto& v : t.data) v = dist(rng);
    return t;
}

inline mlcapsule::Bytes random_bytes(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    mlcapsule::Bytes out(n);
    for (auto& b : out) b = static_cast<std::uint8_t>(rng());
    return out;
}

}  // namespace testutil
