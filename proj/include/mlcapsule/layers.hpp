#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcapsule/bytes.hpp"
#include "mlcapsule/tensor.hpp"

namespace mlcapsule::nn {

enum class LayerKind : std::uint8_t {
    Dense = 0,
    Conv2d = 1,
    DepthwiseConv2d = 2,
    Relu = 3,
    Maxpool = 4,
    Softmax = 5,
};

enum class Padding : std::uint8_t { Valid = 0, Same = 1 };

std::string_view layer_kind_name(LayerKind kind);
LayerKind layer_kind_from_name(std::string_view name);

struct LayerSpec {
    LayerKind kind = LayerKind::Relu;

    // dense
    std::uint32_t in_features = 0;
    std::uint32_t out_features = 0;

    // conv2d / depthwise_conv2d (depthwise uses in_channels only)
    std::uint32_t in_channels = 0;
    std::uint32_t out_channels = 0;
    std::uint32_t kernel_h = 0;
    std::uint32_t kernel_w = 0;
    std::uint32_t stride = 1;
    Padding padding = Padding::Valid;

    // maxpool
    std::uint32_t pool_size = 0;
    std::uint32_t pool_stride = 0;  // 0 means equal to pool_size

    bool has_params() const {
        return kind == LayerKind::Dense || kind == LayerKind::Conv2d ||
               kind == LayerKind::DepthwiseConv2d;
    }

    // Shape of this layer's output given its input shape; validates the
    // input. Throws SchemaError on inconsistent configuration.
    std::vector<std::uint32_t> output_shape(const std::vector<std::uint32_t>& input) const;

    Bytes serialize() const;
    static LayerSpec parse(ByteView raw);
    bool operator==(const LayerSpec&) const = default;
};

// Public architecture description: layer list, input shape, class count.
struct ModelDef {
    std::vector<LayerSpec> layers;
    std::vector<std::uint32_t> input_shape;
    std::uint32_t class_count = 0;

    // Chain consistency, final softmax, class count. Throws SchemaError.
    void validate() const;

    // Shapes flowing through the network; index 0 is the input shape,
    // index i+1 the output of layer i.
    std::vector<std::vector<std::uint32_t>> shape_chain() const;

    // Expected weight/bias shapes per parameterized layer, in layer order.
    struct ParamShape {
        std::size_t layer_index;
        std::vector<std::uint32_t> weights;
        std::vector<std::uint32_t> bias;
    };
    std::vector<ParamShape> param_shapes() const;

    bool operator==(const ModelDef&) const = default;
};

struct LayerParams {
    Tensor weights;
    Tensor bias;

    bool operator==(const LayerParams&) const = default;
};

// Secret side of the model: one entry per parameterized layer, in order.
struct ModelSecrets {
    std::vector<LayerParams> params;

    bool operator==(const ModelSecrets&) const = default;
};

// Shapes of secrets must match the definition exactly; throws SchemaError.
void check_secrets(const ModelDef& def, const ModelSecrets& secrets);

// ---- kernels ----

// y_i = sum_j W[i,j] x_j + b_i. W has dims {m, n}, x is flattened.
Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias);

// Cross-correlation over CHW input; filters {out_ch, in_ch, kh, kw}.
// Output dims: floor((in + 2*pad - k)/stride) + 1.
Tensor conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias, std::uint32_t stride,
              Padding padding);

// Per-channel filters {ch, kh, kw}; no cross-channel mixing.
Tensor depthwise_conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias,
                        std::uint32_t stride, Padding padding);

Tensor relu(const Tensor& x);

// Window/stride pooling without padding over CHW (or HW) input.
Tensor maxpool(const Tensor& x, std::uint32_t size, std::uint32_t stride);

// Numerically stable softmax over the whole (flattened) tensor.
Tensor softmax(const Tensor& x);

// Applies one layer. `params` must be non-null for parameterized kinds.
Tensor apply_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& x);

// Full forward pass; output is a valid posterior of length class_count.
Tensor forward(const ModelDef& def, const ModelSecrets& secrets, const Tensor& x);

std::uint32_t argmax(const Tensor& posterior);

// ---- model definition document (text, "key value" lines) ----

std::string write_model_doc(const ModelDef& def);
ModelDef parse_model_doc(std::string_view text);

}  // namespace mlcapsule::nn
