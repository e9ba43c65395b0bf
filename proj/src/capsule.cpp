#include "mlcapsule/capsule.hpp"

#include <algorithm>
#include <cstring>

#include "mlcapsule/error.hpp"
#include "mlcapsule/model_io.hpp"

namespace mlcapsule::nn {

Bytes CapsuleLayer::serialize() const {
    Bytes out;
    put_lp(out, spec.serialize());
    put_lp(out, sealed_params);
    return out;
}

CapsuleLayer CapsuleLayer::parse(ByteView raw) {
    ByteReader r(raw);
    CapsuleLayer l;
    l.spec = LayerSpec::parse(r.lp());
    l.sealed_params = r.lp();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after capsule layer");
    return l;
}

Bytes serialize_capsule_layers(const std::vector<CapsuleLayer>& layers) {
    Bytes out;
    put_u32le(out, static_cast<std::uint32_t>(layers.size()));
    for (const auto& l : layers) put_lp(out, l.serialize());
    return out;
}

std::vector<CapsuleLayer> parse_capsule_layers(ByteView raw) {
    ByteReader r(raw);
    std::uint32_t count = r.u32le();
    std::vector<CapsuleLayer> layers;
    layers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) layers.push_back(CapsuleLayer::parse(r.lp()));
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after capsule layers");
    return layers;
}

std::vector<CapsuleLayer> seal_model(const ModelDef& def, const ModelSecrets& secrets,
                                     const crypto::SealKey& key,
                                     const crypto::Digest& measurement,
                                     std::uint32_t chunk_size) {
    def.validate();
    check_secrets(def, secrets);
    std::vector<CapsuleLayer> out;
    out.reserve(def.layers.size());
    std::size_t p = 0;
    for (const auto& spec : def.layers) {
        std::vector<Tensor> tensors;
        if (spec.has_params()) {
            tensors.push_back(secrets.params[p].weights);
            tensors.push_back(secrets.params[p].bias);
            ++p;
        }
        CapsuleLayer layer;
        layer.spec = spec;
        layer.sealed_params = crypto::seal(key, measurement, write_weights(tensors), chunk_size);
        out.push_back(std::move(layer));
    }
    return out;
}

std::span<std::uint8_t> ScratchArena::obtain(std::size_t n) {
    if (buf_.size() < n) buf_.resize(n, 0);
    return std::span(buf_.data(), n);
}

void ScratchArena::wipe() {
    crypto::memzero(buf_);
}

bool ScratchArena::all_zero() const {
    return std::all_of(buf_.begin(), buf_.end(), [](std::uint8_t b) { return b == 0; });
}

std::uint64_t layer_working_set(const LayerSpec& spec, const CapsuleLayer& layer,
                                std::size_t in_elems, std::size_t out_elems) {
    std::uint64_t plain_params = 0;
    if (spec.has_params()) {
        // header + two tensor records; close enough to the MLCW payload size
        plain_params = crypto::parse_sealed_header(layer.sealed_params).total_len;
    }
    std::uint32_t chunk = crypto::parse_sealed_header(layer.sealed_params).chunk_size;
    std::uint64_t staging = std::min<std::uint64_t>(
        layer.sealed_params.size(), 2ull * chunk);  // chunked copy-in, two chunks in flight
    return plain_params + staging + 4ull * (in_elems + out_elems);
}

Tensor capsule_forward(const ModelDef& def, const std::vector<CapsuleLayer>& layers,
                       const crypto::SealKey& key, const crypto::Digest& measurement,
                       const Tensor& x, const CapsuleForwardOptions& opts) {
    def.validate();
    if (layers.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no capsule layers");
    }
    if (layers.size() != def.layers.size()) {
        throw Error(ErrorCode::SchemaError, "capsule layer count does not match definition");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (!(layers[i].spec == def.layers[i])) {
            throw Error(ErrorCode::SchemaError,
                        "capsule layer " + std::to_string(i) + " spec drifted from definition");
        }
    }
    if (x.dims != def.input_shape) {
        throw Error(ErrorCode::ShapeMismatch, "input shape does not match model definition");
    }

    ScratchArena local;
    ScratchArena& arena = opts.scratch ? *opts.scratch : local;
    auto chain = def.shape_chain();

    Tensor act = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& layer = layers[i];

        if (opts.memory_budget_bytes != 0) {
            std::uint64_t need = layer_working_set(layer.spec, layer, shape_size(chain[i]),
                                                   shape_size(chain[i + 1]));
            if (need > opts.memory_budget_bytes) {
                throw Error(ErrorCode::BudgetExceeded,
                            "layer " + std::to_string(i) + " working set " +
                                std::to_string(need) + " exceeds budget " +
                                std::to_string(opts.memory_budget_bytes));
            }
        }

        Bytes plain = crypto::unseal(key, measurement, layer.sealed_params);
        auto scratch = arena.obtain(plain.size());
        std::copy(plain.begin(), plain.end(), scratch.begin());
        crypto::memzero(plain);

        LayerParams params;
        const LayerParams* params_ptr = nullptr;
        {
            auto tensors = read_weights(ByteView(scratch.data(), scratch.size()));
            if (layer.spec.has_params()) {
                if (tensors.size() != 2) {
                    throw Error(ErrorCode::SchemaError,
                                "layer " + std::to_string(i) + " blob holds " +
                                    std::to_string(tensors.size()) + " tensors, expected 2");
                }
                params.weights = std::move(tensors[0]);
                params.bias = std::move(tensors[1]);
                params_ptr = &params;
            } else if (!tensors.empty()) {
                throw Error(ErrorCode::SchemaError,
                            "parameterless layer " + std::to_string(i) + " carries tensors");
            }
        }
        arena.wipe();

        auto wipe_params = [&params] {
            auto wipe = [](std::vector<float>& v) {
                if (!v.empty()) {
                    crypto::memzero(std::span(reinterpret_cast<std::uint8_t*>(v.data()),
                                              v.size() * sizeof(float)));
                }
            };
            wipe(params.weights.data);
            wipe(params.bias.data);
        };
        try {
            act = apply_layer(layer.spec, params_ptr, act);
        } catch (...) {
            wipe_params();
            throw;
        }
        // unsealed weights leave memory before the next layer runs
        wipe_params();
    }
    return act;
}

}  // namespace mlcapsule::nn
