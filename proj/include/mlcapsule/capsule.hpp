#pragma once

#include <cstdint>
#include <vector>

#include "mlcapsule/crypto.hpp"
#include "mlcapsule/layers.hpp"

namespace mlcapsule::nn {

// One network layer with its parameters at rest: the public spec plus a
// sealed blob holding that layer's tensors (empty tensor list for
// parameterless layers, still authenticated).
struct CapsuleLayer {
    LayerSpec spec;
    Bytes sealed_params;

    Bytes serialize() const;
    static CapsuleLayer parse(ByteView raw);
};

Bytes serialize_capsule_layers(const std::vector<CapsuleLayer>& layers);
std::vector<CapsuleLayer> parse_capsule_layers(ByteView raw);

// Seals each layer's parameters separately under (key, measurement).
std::vector<CapsuleLayer> seal_model(const ModelDef& def, const ModelSecrets& secrets,
                                     const crypto::SealKey& key,
                                     const crypto::Digest& measurement,
                                     std::uint32_t chunk_size = crypto::kDefaultChunkSize);

// Observable scratch space for the unsealed parameter bytes; after a
// capsule_forward call every byte it held has been wiped.
class ScratchArena {
public:
    std::span<std::uint8_t> obtain(std::size_t n);
    void wipe();
    bool all_zero() const;
    std::size_t capacity() const { return buf_.size(); }

private:
    std::vector<std::uint8_t> buf_;
};

struct CapsuleForwardOptions {
    // Simulated enclave memory ceiling in bytes; 0 disables the check. The
    // per-layer working set is plaintext parameters + two cipher chunks +
    // both activations.
    std::uint64_t memory_budget_bytes = 0;
    ScratchArena* scratch = nullptr;
};

// Layer-wise inference: unseal, compute, zeroize, advance. Output equals
// forward() on the unsealed secrets; aborts on the first unseal failure.
Tensor capsule_forward(const ModelDef& def, const std::vector<CapsuleLayer>& layers,
                       const crypto::SealKey& key, const crypto::Digest& measurement,
                       const Tensor& x, const CapsuleForwardOptions& opts = {});

// Working-set estimate used by the budget check and the benchmarks.
std::uint64_t layer_working_set(const LayerSpec& spec, const CapsuleLayer& layer,
                                std::size_t in_elems, std::size_t out_elems);

}  // namespace mlcapsule::nn
