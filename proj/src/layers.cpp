#include "mlcapsule/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mlcapsule/error.hpp"

namespace mlcapsule::nn {

namespace {

std::uint32_t conv_out_extent(std::uint32_t in, std::uint32_t k, std::uint32_t stride,
                              std::uint32_t pad, const char* what) {
    if (stride == 0) throw Error(ErrorCode::SchemaError, std::string(what) + ": zero stride");
    std::int64_t span = static_cast<std::int64_t>(in) + 2 * static_cast<std::int64_t>(pad) -
                        static_cast<std::int64_t>(k);
    if (span < 0) {
        throw Error(ErrorCode::SchemaError,
                    std::string(what) + ": kernel larger than padded input");
    }
    return static_cast<std::uint32_t>(span / stride + 1);
}

std::uint32_t pad_for(const LayerSpec& s) {
    return s.padding == Padding::Same ? (s.kernel_h - 1) / 2 : 0;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw Error(ErrorCode::SchemaError, msg);
}

std::string shape_str(const std::vector<std::uint32_t>& dims) {
    std::string out = "[";
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(dims[i]);
    }
    return out + "]";
}

}  // namespace

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::DepthwiseConv2d: return "depthwise_conv2d";
        case LayerKind::Relu: return "relu";
        case LayerKind::Maxpool: return "maxpool";
        case LayerKind::Softmax: return "softmax";
    }
    return "unknown";
}

LayerKind layer_kind_from_name(std::string_view name) {
    if (name == "dense") return LayerKind::Dense;
    if (name == "conv2d") return LayerKind::Conv2d;
    if (name == "depthwise_conv2d") return LayerKind::DepthwiseConv2d;
    if (name == "relu") return LayerKind::Relu;
    if (name == "maxpool") return LayerKind::Maxpool;
    if (name == "softmax") return LayerKind::Softmax;
    throw Error(ErrorCode::ParseError, "unknown layer kind: " + std::string(name));
}

std::vector<std::uint32_t> LayerSpec::output_shape(const std::vector<std::uint32_t>& input) const {
    switch (kind) {
        case LayerKind::Dense: {
            require(in_features > 0 && out_features > 0, "dense: zero feature count");
            require(shape_size(input) == in_features,
                    "dense: input " + shape_str(input) + " does not flatten to " +
                        std::to_string(in_features));
            return {out_features};
        }
        case LayerKind::Conv2d: {
            require(input.size() == 3, "conv2d: input must be CHW");
            require(input[0] == in_channels, "conv2d: channel count mismatch");
            require(kernel_h > 0 && kernel_w > 0 && out_channels > 0, "conv2d: bad config");
            std::uint32_t p = pad_for(*this);
            return {out_channels, conv_out_extent(input[1], kernel_h, stride, p, "conv2d"),
                    conv_out_extent(input[2], kernel_w, stride, p, "conv2d")};
        }
        case LayerKind::DepthwiseConv2d: {
            require(input.size() == 3, "depthwise_conv2d: input must be CHW");
            require(input[0] == in_channels, "depthwise_conv2d: channel count mismatch");
            require(kernel_h > 0 && kernel_w > 0, "depthwise_conv2d: bad kernel");
            std::uint32_t p = pad_for(*this);
            return {in_channels,
                    conv_out_extent(input[1], kernel_h, stride, p, "depthwise_conv2d"),
                    conv_out_extent(input[2], kernel_w, stride, p, "depthwise_conv2d")};
        }
        case LayerKind::Relu:
        case LayerKind::Softmax:
            return input;
        case LayerKind::Maxpool: {
            require(input.size() == 2 || input.size() == 3, "maxpool: input must be HW or CHW");
            require(pool_size > 0, "maxpool: zero window");
            std::uint32_t s = pool_stride == 0 ? pool_size : pool_stride;
            std::uint32_t h = input[input.size() - 2];
            std::uint32_t w = input[input.size() - 1];
            require(h >= pool_size && w >= pool_size, "maxpool: window larger than input");
            std::uint32_t oh = (h - pool_size) / s + 1;
            std::uint32_t ow = (w - pool_size) / s + 1;
            if (input.size() == 2) return {oh, ow};
            return {input[0], oh, ow};
        }
    }
    throw Error(ErrorCode::SchemaError, "unknown layer kind");
}

Bytes LayerSpec::serialize() const {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(kind));
    put_u32le(out, in_features);
    put_u32le(out, out_features);
    put_u32le(out, in_channels);
    put_u32le(out, out_channels);
    put_u32le(out, kernel_h);
    put_u32le(out, kernel_w);
    put_u32le(out, stride);
    out.push_back(static_cast<std::uint8_t>(padding));
    put_u32le(out, pool_size);
    put_u32le(out, pool_stride);
    return out;
}

LayerSpec LayerSpec::parse(ByteView raw) {
    ByteReader r(raw);
    LayerSpec s;
    std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(LayerKind::Softmax)) {
        throw Error(ErrorCode::ParseError, "bad layer kind byte");
    }
    s.kind = static_cast<LayerKind>(kind);
    s.in_features = r.u32le();
    s.out_features = r.u32le();
    s.in_channels = r.u32le();
    s.out_channels = r.u32le();
    s.kernel_h = r.u32le();
    s.kernel_w = r.u32le();
    s.stride = r.u32le();
    std::uint8_t pad = r.u8();
    if (pad > 1) throw Error(ErrorCode::ParseError, "bad padding byte");
    s.padding = static_cast<Padding>(pad);
    s.pool_size = r.u32le();
    s.pool_stride = r.u32le();
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after layer spec");
    return s;
}

std::vector<std::vector<std::uint32_t>> ModelDef::shape_chain() const {
    std::vector<std::vector<std::uint32_t>> chain;
    chain.push_back(input_shape);
    for (const auto& layer : layers) {
        chain.push_back(layer.output_shape(chain.back()));
    }
    return chain;
}

void ModelDef::validate() const {
    require(!layers.empty(), "model has no layers");
    require(!input_shape.empty() && shape_size(input_shape) > 0, "bad input shape");
    require(class_count >= 2, "class count must be at least 2");
    require(layers.back().kind == LayerKind::Softmax, "final layer must be softmax");
    auto chain = shape_chain();
    const auto& out = chain.back();
    require(shape_size(out) == class_count,
            "final output " + shape_str(out) + " does not match class count " +
                std::to_string(class_count));
}

std::vector<ModelDef::ParamShape> ModelDef::param_shapes() const {
    std::vector<ParamShape> shapes;
    auto chain = shape_chain();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        switch (l.kind) {
            case LayerKind::Dense:
                shapes.push_back({i, {l.out_features, l.in_features}, {l.out_features}});
                break;
            case LayerKind::Conv2d:
                shapes.push_back(
                    {i, {l.out_channels, l.in_channels, l.kernel_h, l.kernel_w}, {l.out_channels}});
                break;
            case LayerKind::DepthwiseConv2d:
                shapes.push_back({i, {l.in_channels, l.kernel_h, l.kernel_w}, {l.in_channels}});
                break;
            default:
                break;
        }
    }
    return shapes;
}

void check_secrets(const ModelDef& def, const ModelSecrets& secrets) {
    auto shapes = def.param_shapes();
    if (shapes.size() != secrets.params.size()) {
        throw Error(ErrorCode::SchemaError,
                    "model has " + std::to_string(shapes.size()) + " parameterized layers, got " +
                        std::to_string(secrets.params.size()) + " parameter sets");
    }
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        if (secrets.params[i].weights.dims != shapes[i].weights ||
            secrets.params[i].bias.dims != shapes[i].bias) {
            throw Error(ErrorCode::SchemaError,
                        "parameter shapes for layer " + std::to_string(shapes[i].layer_index) +
                            " do not match the definition");
        }
    }
}

Tensor dense(const Tensor& x, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2 || bias.rank() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "dense: weights must be rank 2, bias rank 1");
    }
    const std::uint32_t m = weights.dims[0];
    const std::uint32_t n = weights.dims[1];
    if (x.size() != n || bias.dims[0] != m) {
        throw Error(ErrorCode::ShapeMismatch, "dense: got x of " + std::to_string(x.size()) +
                                                  ", W " + std::to_string(m) + "x" +
                                                  std::to_string(n));
    }
    Tensor y = Tensor::zeros({m});
    for (std::uint32_t i = 0; i < m; ++i) {
        float acc = bias.data[i];
        const float* row = weights.data.data() + static_cast<std::size_t>(i) * n;
        for (std::uint32_t j = 0; j < n; ++j) acc += row[j] * x.data[j];
        y.data[i] = acc;
    }
    y.ensure_finite("dense");
    return y;
}

Tensor conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias, std::uint32_t stride,
              Padding padding) {
    if (x.rank() != 3 || filters.rank() != 4 || bias.rank() != 1) {
        throw Error(ErrorCode::ShapeMismatch, "conv2d: expects x CHW, filters OIHW, bias O");
    }
    const std::uint32_t in_ch = x.dims[0], h = x.dims[1], w = x.dims[2];
    const std::uint32_t out_ch = filters.dims[0], kh = filters.dims[2], kw = filters.dims[3];
    if (filters.dims[1] != in_ch || bias.dims[0] != out_ch) {
        throw Error(ErrorCode::ShapeMismatch, "conv2d: channel counts do not match");
    }
    if (stride == 0) throw Error(ErrorCode::ShapeMismatch, "conv2d: zero stride");
    const std::uint32_t pad = padding == Padding::Same ? (kh - 1) / 2 : 0;
    if (h + 2 * pad < kh || w + 2 * pad < kw) {
        throw Error(ErrorCode::ShapeMismatch, "conv2d: kernel larger than padded input");
    }
    const std::uint32_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::uint32_t ow = (w + 2 * pad - kw) / stride + 1;

    Tensor y = Tensor::zeros({out_ch, oh, ow});
    for (std::uint32_t oc = 0; oc < out_ch; ++oc) {
        for (std::uint32_t oy = 0; oy < oh; ++oy) {
            for (std::uint32_t ox = 0; ox < ow; ++ox) {
                float acc = bias.data[oc];
                for (std::uint32_t ic = 0; ic < in_ch; ++ic) {
                    const float* plane = x.data.data() + static_cast<std::size_t>(ic) * h * w;
                    const float* filt = filters.data.data() +
                                        ((static_cast<std::size_t>(oc) * in_ch + ic) * kh) * kw;
                    for (std::uint32_t fy = 0; fy < kh; ++fy) {
                        const std::int64_t iy =
                            static_cast<std::int64_t>(oy) * stride + fy - pad;
                        if (iy < 0 || iy >= h) continue;
                        for (std::uint32_t fx = 0; fx < kw; ++fx) {
                            const std::int64_t ix =
                                static_cast<std::int64_t>(ox) * stride + fx - pad;
                            if (ix < 0 || ix >= w) continue;
                            acc += plane[iy * w + ix] * filt[fy * kw + fx];
                        }
                    }
                }
                y.data[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y.ensure_finite("conv2d");
    return y;
}

Tensor depthwise_conv2d(const Tensor& x, const Tensor& filters, const Tensor& bias,
                        std::uint32_t stride, Padding padding) {
    if (x.rank() != 3 || filters.rank() != 3 || bias.rank() != 1) {
        throw Error(ErrorCode::ShapeMismatch,
                    "depthwise_conv2d: expects x CHW, filters CHW, bias C");
    }
    const std::uint32_t ch = x.dims[0], h = x.dims[1], w = x.dims[2];
    const std::uint32_t kh = filters.dims[1], kw = filters.dims[2];
    if (filters.dims[0] != ch || bias.dims[0] != ch) {
        throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d: channel counts do not match");
    }
    if (stride == 0) throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d: zero stride");
    const std::uint32_t pad = padding == Padding::Same ? (kh - 1) / 2 : 0;
    if (h + 2 * pad < kh || w + 2 * pad < kw) {
        throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d: kernel larger than padded input");
    }
    const std::uint32_t oh = (h + 2 * pad - kh) / stride + 1;
    const std::uint32_t ow = (w + 2 * pad - kw) / stride + 1;

    Tensor y = Tensor::zeros({ch, oh, ow});
    for (std::uint32_t c = 0; c < ch; ++c) {
        const float* plane = x.data.data() + static_cast<std::size_t>(c) * h * w;
        const float* filt = filters.data.data() + static_cast<std::size_t>(c) * kh * kw;
        for (std::uint32_t oy = 0; oy < oh; ++oy) {
            for (std::uint32_t ox = 0; ox < ow; ++ox) {
                float acc = bias.data[c];
                for (std::uint32_t fy = 0; fy < kh; ++fy) {
                    const std::int64_t iy = static_cast<std::int64_t>(oy) * stride + fy - pad;
                    if (iy < 0 || iy >= h) continue;
                    for (std::uint32_t fx = 0; fx < kw; ++fx) {
                        const std::int64_t ix = static_cast<std::int64_t>(ox) * stride + fx - pad;
                        if (ix < 0 || ix >= w) continue;
                        acc += plane[iy * w + ix] * filt[fy * kw + fx];
                    }
                }
                y.data[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = acc;
            }
        }
    }
    y.ensure_finite("depthwise_conv2d");
    return y;
}

Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (float& v : y.data) v = std::max(v, 0.0f);
    y.ensure_finite("relu");
    return y;
}

Tensor maxpool(const Tensor& x, std::uint32_t size, std::uint32_t stride) {
    if (x.rank() != 2 && x.rank() != 3) {
        throw Error(ErrorCode::ShapeMismatch, "maxpool: input must be HW or CHW");
    }
    if (size == 0) throw Error(ErrorCode::ShapeMismatch, "maxpool: zero window");
    if (stride == 0) stride = size;
    const bool chw = x.rank() == 3;
    const std::uint32_t ch = chw ? x.dims[0] : 1;
    const std::uint32_t h = x.dims[chw ? 1 : 0];
    const std::uint32_t w = x.dims[chw ? 2 : 1];
    if (h < size || w < size) {
        throw Error(ErrorCode::ShapeMismatch, "maxpool: window larger than input");
    }
    const std::uint32_t oh = (h - size) / stride + 1;
    const std::uint32_t ow = (w - size) / stride + 1;

    Tensor y = chw ? Tensor::zeros({ch, oh, ow}) : Tensor::zeros({oh, ow});
    for (std::uint32_t c = 0; c < ch; ++c) {
        const float* plane = x.data.data() + static_cast<std::size_t>(c) * h * w;
        for (std::uint32_t oy = 0; oy < oh; ++oy) {
            for (std::uint32_t ox = 0; ox < ow; ++ox) {
                float best = plane[(oy * stride) * w + ox * stride];
                for (std::uint32_t fy = 0; fy < size; ++fy) {
                    for (std::uint32_t fx = 0; fx < size; ++fx) {
                        best = std::max(best, plane[(oy * stride + fy) * w + ox * stride + fx]);
                    }
                }
                y.data[(static_cast<std::size_t>(c) * oh + oy) * ow + ox] = best;
            }
        }
    }
    y.ensure_finite("maxpool");
    return y;
}

Tensor softmax(const Tensor& x) {
    if (x.size() == 0) throw Error(ErrorCode::ShapeMismatch, "softmax: empty input");
    Tensor y = x;
    float peak = *std::max_element(y.data.begin(), y.data.end());
    double sum = 0.0;
    for (float& v : y.data) {
        v = std::exp(v - peak);
        sum += v;
    }
    for (float& v : y.data) v = static_cast<float>(v / sum);
    y.ensure_finite("softmax");
    return y;
}

Tensor apply_layer(const LayerSpec& spec, const LayerParams* params, const Tensor& x) {
    switch (spec.kind) {
        case LayerKind::Dense:
            if (!params) throw Error(ErrorCode::ShapeMismatch, "dense: missing parameters");
            if (x.rank() != 1) {
                // auto-flatten; dense consumes the whole activation
                Tensor flat({static_cast<std::uint32_t>(x.size())}, x.data);
                return dense(flat, params->weights, params->bias);
            }
            return dense(x, params->weights, params->bias);
        case LayerKind::Conv2d:
            if (!params) throw Error(ErrorCode::ShapeMismatch, "conv2d: missing parameters");
            return conv2d(x, params->weights, params->bias, spec.stride, spec.padding);
        case LayerKind::DepthwiseConv2d:
            if (!params) {
                throw Error(ErrorCode::ShapeMismatch, "depthwise_conv2d: missing parameters");
            }
            return depthwise_conv2d(x, params->weights, params->bias, spec.stride, spec.padding);
        case LayerKind::Relu:
            return relu(x);
        case LayerKind::Maxpool:
            return maxpool(x, spec.pool_size, spec.pool_stride);
        case LayerKind::Softmax:
            return softmax(x);
    }
    throw Error(ErrorCode::SchemaError, "unknown layer kind");
}

Tensor forward(const ModelDef& def, const ModelSecrets& secrets, const Tensor& x) {
    def.validate();
    check_secrets(def, secrets);
    if (x.dims != def.input_shape) {
        throw Error(ErrorCode::ShapeMismatch, "input shape does not match model definition");
    }
    Tensor act = x;
    std::size_t param_idx = 0;
    for (const auto& layer : def.layers) {
        const LayerParams* p = layer.has_params() ? &secrets.params[param_idx++] : nullptr;
        act = apply_layer(layer, p, act);
    }
    return act;
}

std::uint32_t argmax(const Tensor& posterior) {
    if (posterior.size() == 0) throw Error(ErrorCode::ShapeMismatch, "argmax: empty tensor");
    return static_cast<std::uint32_t>(
        std::max_element(posterior.data.begin(), posterior.data.end()) - posterior.data.begin());
}

// ---- model definition document ----

std::string write_model_doc(const ModelDef& def) {
    std::ostringstream out;
    out << "input";
    for (auto d : def.input_shape) out << " " << d;
    out << "\nclasses " << def.class_count << "\n";
    for (const auto& l : def.layers) {
        out << "layer " << layer_kind_name(l.kind);
        switch (l.kind) {
            case LayerKind::Dense:
                out << " in=" << l.in_features << " out=" << l.out_features;
                break;
            case LayerKind::Conv2d:
                out << " in=" << l.in_channels << " out=" << l.out_channels << " kernel="
                    << l.kernel_h << "x" << l.kernel_w << " stride=" << l.stride
                    << " pad=" << (l.padding == Padding::Same ? "same" : "valid");
                break;
            case LayerKind::DepthwiseConv2d:
                out << " channels=" << l.in_channels << " kernel=" << l.kernel_h << "x"
                    << l.kernel_w << " stride=" << l.stride
                    << " pad=" << (l.padding == Padding::Same ? "same" : "valid");
                break;
            case LayerKind::Maxpool:
                out << " size=" << l.pool_size;
                if (l.pool_stride != 0) out << " stride=" << l.pool_stride;
                break;
            case LayerKind::Relu:
            case LayerKind::Softmax:
                break;
        }
        out << "\n";
    }
    return out.str();
}

namespace {

std::uint32_t parse_u32(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        unsigned long v = std::stoul(s, &pos);
        if (pos != s.size() || v > 0xfffffffful) throw std::invalid_argument(s);
        return static_cast<std::uint32_t>(v);
    } catch (const std::exception&) {
        throw Error(ErrorCode::ParseError, "bad integer '" + s + "' in " + context);
    }
}

struct Attrs {
    std::vector<std::pair<std::string, std::string>> kv;

    const std::string* find(const std::string& key) const {
        for (const auto& [k, v] : kv) {
            if (k == key) return &v;
        }
        return nullptr;
    }
    std::uint32_t u32(const std::string& key, const std::string& context) const {
        const std::string* v = find(key);
        if (!v) throw Error(ErrorCode::ParseError, "missing attribute " + key + " in " + context);
        return parse_u32(*v, context);
    }
};

void parse_kernel_attr(const Attrs& attrs, LayerSpec& s, const std::string& context) {
    const std::string* v = attrs.find("kernel");
    if (!v) throw Error(ErrorCode::ParseError, "missing attribute kernel in " + context);
    auto x = v->find('x');
    if (x == std::string::npos) {
        s.kernel_h = s.kernel_w = parse_u32(*v, context);
    } else {
        s.kernel_h = parse_u32(v->substr(0, x), context);
        s.kernel_w = parse_u32(v->substr(x + 1), context);
    }
}

Padding parse_pad_attr(const Attrs& attrs, const std::string& context) {
    const std::string* v = attrs.find("pad");
    if (!v || *v == "valid") return Padding::Valid;
    if (*v == "same") return Padding::Same;
    throw Error(ErrorCode::ParseError, "bad pad value '" + *v + "' in " + context);
}

}  // namespace

ModelDef parse_model_doc(std::string_view text) {
    ModelDef def;
    bool saw_input = false, saw_classes = false;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word) || word[0] == '#') continue;
        const std::string context = "line " + std::to_string(line_no);

        if (word == "input") {
            std::string tok;
            while (ls >> tok) def.input_shape.push_back(parse_u32(tok, context));
            if (def.input_shape.empty()) {
                throw Error(ErrorCode::ParseError, "input needs at least one dimension");
            }
            saw_input = true;
        } else if (word == "classes") {
            std::string tok;
            if (!(ls >> tok)) throw Error(ErrorCode::ParseError, "classes needs a count");
            def.class_count = parse_u32(tok, context);
            saw_classes = true;
        } else if (word == "layer") {
            std::string kind_name;
            if (!(ls >> kind_name)) throw Error(ErrorCode::ParseError, "layer needs a kind");
            LayerSpec s;
            s.kind = layer_kind_from_name(kind_name);
            Attrs attrs;
            std::string tok;
            while (ls >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) {
                    throw Error(ErrorCode::ParseError, "bad attribute '" + tok + "' in " + context);
                }
                attrs.kv.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
            }
            switch (s.kind) {
                case LayerKind::Dense:
                    s.in_features = attrs.u32("in", context);
                    s.out_features = attrs.u32("out", context);
                    break;
                case LayerKind::Conv2d:
                    s.in_channels = attrs.u32("in", context);
                    s.out_channels = attrs.u32("out", context);
                    parse_kernel_attr(attrs, s, context);
                    s.stride = attrs.find("stride") ? attrs.u32("stride", context) : 1;
                    s.padding = parse_pad_attr(attrs, context);
                    break;
                case LayerKind::DepthwiseConv2d:
                    s.in_channels = attrs.u32("channels", context);
                    parse_kernel_attr(attrs, s, context);
                    s.stride = attrs.find("stride") ? attrs.u32("stride", context) : 1;
                    s.padding = parse_pad_attr(attrs, context);
                    break;
                case LayerKind::Maxpool:
                    s.pool_size = attrs.u32("size", context);
                    s.pool_stride = attrs.find("stride") ? attrs.u32("stride", context) : 0;
                    break;
                case LayerKind::Relu:
                case LayerKind::Softmax:
                    break;
            }
            def.layers.push_back(s);
        } else {
            throw Error(ErrorCode::ParseError, "unknown directive '" + word + "' on " + context);
        }
    }
    if (!saw_input || !saw_classes) {
        throw Error(ErrorCode::ParseError, "model document needs input and classes lines");
    }
    def.validate();
    return def;
}

}  // namespace mlcapsule::nn
