#include "mlcapsule/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mlcapsule/error.hpp"

namespace mlcapsule::nn {

namespace {

void require_dense_arch(const ModelDef& arch) {
    arch.validate();
    for (const auto& l : arch.layers) {
        if (l.kind != LayerKind::Dense && l.kind != LayerKind::Relu &&
            l.kind != LayerKind::Softmax) {
            throw Error(ErrorCode::InvalidArgument,
                        "trainer supports dense/relu/softmax architectures only");
        }
    }
}

// Dense-network forward/backward shared between the f32 trainer and the f64
// gradient check.
template <typename T>
struct DenseNet {
    struct Layer {
        std::uint32_t in, out;
        bool relu_after;
        std::vector<T> w;  // row-major out x in
        std::vector<T> b;
    };
    std::vector<Layer> layers;

    static DenseNet from_arch(const ModelDef& arch, const ModelSecrets& secrets) {
        DenseNet net;
        std::size_t p = 0;
        for (std::size_t i = 0; i < arch.layers.size(); ++i) {
            const auto& spec = arch.layers[i];
            if (spec.kind != LayerKind::Dense) continue;
            Layer l;
            l.in = spec.in_features;
            l.out = spec.out_features;
            l.relu_after = i + 1 < arch.layers.size() &&
                           arch.layers[i + 1].kind == LayerKind::Relu;
            const auto& lp = secrets.params[p++];
            l.w.assign(lp.weights.data.begin(), lp.weights.data.end());
            l.b.assign(lp.bias.data.begin(), lp.bias.data.end());
            net.layers.push_back(std::move(l));
        }
        return net;
    }

    ModelSecrets to_secrets() const {
        ModelSecrets s;
        for (const auto& l : layers) {
            LayerParams p;
            p.weights = Tensor({l.out, l.in}, std::vector<float>(l.w.begin(), l.w.end()));
            p.bias = Tensor({l.out}, std::vector<float>(l.b.begin(), l.b.end()));
            s.params.push_back(std::move(p));
        }
        return s;
    }

    struct Trace {
        // activations[0] is the input; activations[i+1] the post-layer-i
        // activation (after relu when present). pre[i] holds layer i's
        // pre-activation.
        std::vector<std::vector<T>> activations;
        std::vector<std::vector<T>> pre;
        std::vector<T> probs;
        T loss;
    };

    Trace forward(const std::vector<float>& x, std::uint32_t label) const {
        Trace t;
        t.activations.emplace_back(x.begin(), x.end());
        for (const auto& l : layers) {
            const auto& a = t.activations.back();
            std::vector<T> z(l.out);
            for (std::uint32_t i = 0; i < l.out; ++i) {
                T acc = l.b[i];
                const T* row = l.w.data() + static_cast<std::size_t>(i) * l.in;
                for (std::uint32_t j = 0; j < l.in; ++j) acc += row[j] * a[j];
                z[i] = acc;
            }
            t.pre.push_back(z);
            if (l.relu_after) {
                for (auto& v : z) v = std::max<T>(v, 0);
            }
            t.activations.push_back(std::move(z));
        }
        // stable softmax + cross entropy on the final pre-activation
        const auto& logits = t.pre.back();
        T peak = *std::max_element(logits.begin(), logits.end());
        T sum = 0;
        t.probs.resize(logits.size());
        for (std::size_t i = 0; i < logits.size(); ++i) {
            t.probs[i] = std::exp(logits[i] - peak);
            sum += t.probs[i];
        }
        for (auto& p : t.probs) p /= sum;
        t.loss = -std::log(std::max<T>(t.probs[label], static_cast<T>(1e-30)));
        return t;
    }

    struct Grads {
        std::vector<std::vector<T>> w;
        std::vector<std::vector<T>> b;

        explicit Grads(const DenseNet& net) {
            for (const auto& l : net.layers) {
                w.emplace_back(l.w.size(), T(0));
                b.emplace_back(l.b.size(), T(0));
            }
        }
        void add(const Grads& other) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                for (std::size_t j = 0; j < w[i].size(); ++j) w[i][j] += other.w[i][j];
                for (std::size_t j = 0; j < b[i].size(); ++j) b[i][j] += other.b[i][j];
            }
        }
        void scale(T f) {
            for (auto& m : w) {
                for (auto& v : m) v *= f;
            }
            for (auto& m : b) {
                for (auto& v : m) v *= f;
            }
        }
    };

    Grads backward(const Trace& t, std::uint32_t label) const {
        Grads g(*this);
        // softmax + cross entropy: dL/dz = p - onehot
        std::vector<T> dz = t.probs;
        dz[label] -= 1;
        for (std::size_t li = layers.size(); li-- > 0;) {
            const auto& l = layers[li];
            const auto& a_in = t.activations[li];
            for (std::uint32_t i = 0; i < l.out; ++i) {
                g.b[li][i] = dz[i];
                T* wrow = g.w[li].data() + static_cast<std::size_t>(i) * l.in;
                for (std::uint32_t j = 0; j < l.in; ++j) wrow[j] = dz[i] * a_in[j];
            }
            if (li == 0) break;
            std::vector<T> da(l.in, T(0));
            for (std::uint32_t i = 0; i < l.out; ++i) {
                const T* wrow = l.w.data() + static_cast<std::size_t>(i) * l.in;
                for (std::uint32_t j = 0; j < l.in; ++j) da[j] += wrow[j] * dz[i];
            }
            const auto& prev = layers[li - 1];
            if (prev.relu_after) {
                const auto& pre = t.pre[li - 1];
                for (std::uint32_t j = 0; j < l.in; ++j) {
                    if (pre[j] <= 0) da[j] = 0;
                }
            }
            dz = std::move(da);
        }
        return g;
    }

    void sgd_step(const Grads& g, T lr) {
        for (std::size_t li = 0; li < layers.size(); ++li) {
            auto& l = layers[li];
            for (std::size_t j = 0; j < l.w.size(); ++j) l.w[j] -= lr * g.w[li][j];
            for (std::size_t j = 0; j < l.b.size(); ++j) l.b[j] -= lr * g.b[li][j];
        }
    }
};

}  // namespace

void Dataset::validate() const {
    if (inputs.empty()) throw Error(ErrorCode::InvalidArgument, "empty dataset");
    if (inputs.size() != labels.size()) {
        throw Error(ErrorCode::InvalidArgument, "inputs and labels differ in length");
    }
    if (class_count < 2) throw Error(ErrorCode::InvalidArgument, "need at least two classes");
    for (const auto& x : inputs) {
        if (x.size() != feature_dim) {
            throw Error(ErrorCode::InvalidArgument, "sample does not match feature_dim");
        }
    }
    for (auto y : labels) {
        if (y >= class_count) throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
}

ModelSecrets init_dense_secrets(const ModelDef& arch, std::uint64_t seed) {
    require_dense_arch(arch);
    std::mt19937_64 rng(seed);
    ModelSecrets secrets;
    for (const auto& shape : arch.param_shapes()) {
        const std::uint32_t fan_out = shape.weights[0];
        const std::uint32_t fan_in = shape.weights[1];
        const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
        std::uniform_real_distribution<float> dist(-limit, limit);
        LayerParams p;
        p.weights = Tensor::zeros({fan_out, fan_in});
        for (auto& v : p.weights.data) v = dist(rng);
        p.bias = Tensor::zeros({fan_out});
        secrets.params.push_back(std::move(p));
    }
    return secrets;
}

TrainResult train_toy(const Dataset& data, const ModelDef& arch, const TrainConfig& cfg) {
    data.validate();
    require_dense_arch(arch);
    if (shape_size(arch.input_shape) != data.feature_dim || arch.class_count != data.class_count) {
        throw Error(ErrorCode::InvalidArgument, "dataset does not match architecture");
    }

    ModelSecrets init = init_dense_secrets(arch, cfg.seed);
    auto net = DenseNet<float>::from_arch(arch, init);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    TrainResult result;
    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t idx : order) {
            auto trace = net.forward(data.inputs[idx], data.labels[idx]);
            if (!std::isfinite(trace.loss)) {
                throw Error(ErrorCode::DivergenceError,
                            "loss became non-finite in epoch " + std::to_string(epoch));
            }
            loss_sum += trace.loss;
            auto grads = net.backward(trace, data.labels[idx]);
            net.sgd_step(grads, cfg.learning_rate);
        }
        result.epoch_losses.push_back(static_cast<float>(loss_sum / data.size()));
    }

    result.secrets = net.to_secrets();
    result.train_accuracy = accuracy(arch, result.secrets, data);
    return result;
}

float accuracy(const ModelDef& def, const ModelSecrets& secrets, const Dataset& data) {
    data.validate();
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        Tensor x(def.input_shape, data.inputs[i]);
        Tensor p = forward(def, secrets, x);
        if (argmax(p) == data.labels[i]) ++hits;
    }
    return static_cast<float>(hits) / static_cast<float>(data.size());
}

double dataset_loss(const ModelDef& arch, const ModelSecrets& secrets, const Dataset& data) {
    require_dense_arch(arch);
    auto net = DenseNet<double>::from_arch(arch, secrets);
    double sum = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        sum += net.forward(data.inputs[i], data.labels[i]).loss;
    }
    return sum / static_cast<double>(data.size());
}

GradCheckResult grad_check(const ModelDef& arch, const Dataset& sample, double epsilon,
                           std::uint64_t seed, const ModelSecrets* start) {
    if (epsilon <= 0.0) {
        throw Error(ErrorCode::InvalidArgument, "epsilon must be positive");
    }
    sample.validate();
    require_dense_arch(arch);

    ModelSecrets init = start ? *start : init_dense_secrets(arch, seed);
    check_secrets(arch, init);
    auto net = DenseNet<double>::from_arch(arch, init);

    // analytic mean gradient over the batch
    DenseNet<double>::Grads analytic(net);
    for (std::size_t i = 0; i < sample.size(); ++i) {
        auto trace = net.forward(sample.inputs[i], sample.labels[i]);
        analytic.add(net.backward(trace, sample.labels[i]));
    }
    analytic.scale(1.0 / static_cast<double>(sample.size()));

    auto batch_loss = [&]() {
        double sum = 0.0;
        for (std::size_t i = 0; i < sample.size(); ++i) {
            sum += net.forward(sample.inputs[i], sample.labels[i]).loss;
        }
        return sum / static_cast<double>(sample.size());
    };

    GradCheckResult result;
    auto probe = [&](double& param, double analytic_grad) {
        const double saved = param;
        param = saved + epsilon;
        double up = batch_loss();
        param = saved - epsilon;
        double down = batch_loss();
        param = saved;
        const double fd = (up - down) / (2.0 * epsilon);
        // below the absolute floor both sides are numerically zero and agree;
        // above it the comparison is relative
        constexpr double kAbsFloor = 1e-7;
        if (std::abs(analytic_grad) >= kAbsFloor || std::abs(fd) >= kAbsFloor) {
            result.max_rel_error =
                std::max(result.max_rel_error,
                         std::abs(analytic_grad - fd) / (std::abs(analytic_grad) + std::abs(fd)));
        }
        result.max_abs_analytic = std::max(result.max_abs_analytic, std::abs(analytic_grad));
        result.max_abs_fd = std::max(result.max_abs_fd, std::abs(fd));
    };

    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        auto& l = net.layers[li];
        for (std::size_t j = 0; j < l.w.size(); ++j) probe(l.w[j], analytic.w[li][j]);
        for (std::size_t j = 0; j < l.b.size(); ++j) probe(l.b[j], analytic.b[li][j]);
    }
    return result;
}

}  // namespace mlcapsule::nn
