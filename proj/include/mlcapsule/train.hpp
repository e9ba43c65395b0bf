#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "mlcapsule/layers.hpp"

namespace mlcapsule::nn {

struct Dataset {
    std::vector<std::vector<float>> inputs;  // one flattened feature vector per sample
    std::vector<std::uint32_t> labels;
    std::uint32_t feature_dim = 0;
    std::uint32_t class_count = 0;

    std::size_t size() const { return inputs.size(); }
    void validate() const;
};

struct TrainConfig {
    std::uint32_t epochs = 100;
    float learning_rate = 0.1f;
    std::uint64_t seed = 1;
};

struct TrainResult {
    ModelSecrets secrets;
    float train_accuracy = 0.0f;
    std::vector<float> epoch_losses;
};

// Cross-entropy SGD for dense/relu/softmax architectures only; deterministic
// given the seed. Throws DivergenceError if the loss goes non-finite,
// InvalidArgument for unsupported layer kinds.
TrainResult train_toy(const Dataset& data, const ModelDef& arch, const TrainConfig& cfg);

// Seeded initialization identical to the trainer's.
ModelSecrets init_dense_secrets(const ModelDef& arch, std::uint64_t seed);

float accuracy(const ModelDef& def, const ModelSecrets& secrets, const Dataset& data);

struct GradCheckResult {
    double max_rel_error = 0.0;
    double max_abs_analytic = 0.0;
    double max_abs_fd = 0.0;
};

// Compares the trainer's analytic gradient against central finite differences
// over all parameters, in double precision, on the given sample batch.
// epsilon must be positive. Optional starting secrets override the seeded
// initialization (useful for probing flat regions).
GradCheckResult grad_check(const ModelDef& arch, const Dataset& sample, double epsilon,
                           std::uint64_t seed, const ModelSecrets* start = nullptr);

// Mean cross-entropy loss over a dataset, computed in double precision.
double dataset_loss(const ModelDef& arch, const ModelSecrets& secrets, const Dataset& data);

}  // namespace mlcapsule::nn
