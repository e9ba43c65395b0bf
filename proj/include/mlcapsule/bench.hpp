#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mlcapsule/capsule.hpp"

namespace mlcapsule::bench {

// SGX desktop reference numbers carried along for comparison; never asserted.
// factor is the published value (its rounding differs from capsule/plain).
struct PaperReference {
    double capsule_ms = 0.0;
    double plain_ms = 0.0;
    double factor = 0.0;  // 0 derives it from the two times
};

struct BenchRow {
    std::string label;
    double capsule_ms = 0.0;
    double capsule_sd = 0.0;
    double plain_ms = 0.0;
    double plain_sd = 0.0;
    double factor = 0.0;
    // Per-path minima over the repetitions. Scheduling and allocator noise
    // only ever add time, so the minima are the cleanest estimates of the
    // true per-path cost and carry the structural capsule-over-plain margin
    // even where it is a fraction of a percent of the compute.
    double capsule_min_ms = 0.0;
    double plain_min_ms = 0.0;
    bool budget_exceeded = false;
    std::optional<PaperReference> reference;  // labeled "paper (SGX)" in reports
};

struct BenchReport {
    std::string title;
    std::vector<BenchRow> rows;
    std::uint32_t repetitions = 100;
    std::uint32_t warmup = 5;
    std::uint64_t memory_budget_bytes = 0;
    std::uint32_t chunk_size = crypto::kDefaultChunkSize;
    std::string environment;
};

struct BenchOptions {
    std::uint32_t repetitions = 100;
    std::uint32_t warmup = 5;
    std::uint64_t memory_budget_bytes = 90ull * 1024 * 1024;
    std::uint32_t chunk_size = crypto::kDefaultChunkSize;
};

// Times one layer. The capsule path covers allocate, copy-in of the sealed
// data, unseal, compute and free; the plain path times only the compute.
BenchRow bench_layer(const nn::LayerSpec& spec, const std::vector<std::uint32_t>& input_shape,
                     const BenchOptions& opts, std::optional<PaperReference> reference = {},
                     std::uint64_t seed = 42);

// Dense suite over the square sizes used in the reference tables.
BenchReport bench_dense_suite(const BenchOptions& opts);
// Convolution and depthwise suites over the reference input sizes (scaled
// spatially by `scale` to keep desk runs short; 1 reproduces full size).
BenchReport bench_conv_suite(const BenchOptions& opts, std::uint32_t scale = 1);

// End-to-end capsule_forward vs forward for whole networks.
BenchRow bench_network(const nn::ModelDef& def, const nn::ModelSecrets& secrets,
                       const std::string& label, const BenchOptions& opts,
                       std::optional<PaperReference> reference = {}, std::uint64_t seed = 42);

std::string to_markdown(const BenchReport& report);
std::string to_csv(const BenchReport& report);

std::string environment_string();

// Small CNN for the network benchmark and tests.
std::pair<nn::ModelDef, nn::ModelSecrets> make_toy_cnn(std::uint64_t seed);

}  // namespace mlcapsule::bench
