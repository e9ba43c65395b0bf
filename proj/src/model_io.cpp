#include "mlcapsule/model_io.hpp"

#include <sys/stat.h>

#include <bit>
#include <cstdio>
#include <fstream>

#include "mlcapsule/error.hpp"

namespace mlcapsule::nn {

namespace {

constexpr std::uint16_t kWeightsVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_f32le(Bytes& out, float v) {
    put_u32le(out, std::bit_cast<std::uint32_t>(v));
}

float take_f32le(ByteReader& r) {
    return std::bit_cast<float>(r.u32le());
}

}  // namespace

Bytes serialize_tensor(const Tensor& t) {
    Bytes out;
    out.push_back(kDtypeF32);
    if (t.dims.size() > 255) throw Error(ErrorCode::SchemaError, "tensor rank above 255");
    out.push_back(static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put_u32le(out, d);
    out.reserve(out.size() + t.data.size() * 4);
    for (float v : t.data) put_f32le(out, v);
    return out;
}

namespace {

Tensor parse_tensor_from(ByteReader& r) {
    std::uint8_t dtype = r.u8();
    if (dtype != kDtypeF32) throw Error(ErrorCode::ParseError, "unsupported dtype");
    std::uint8_t rank = r.u8();
    std::vector<std::uint32_t> dims;
    dims.reserve(rank);
    std::size_t total = 1;
    for (std::uint8_t i = 0; i < rank; ++i) {
        dims.push_back(r.u32le());
        total *= dims.back();
    }
    if (r.remaining() < total * 4) {
        throw Error(ErrorCode::ParseError, "weights payload truncated");
    }
    std::vector<float> data;
    data.reserve(total);
    for (std::size_t i = 0; i < total; ++i) data.push_back(take_f32le(r));
    return Tensor(std::move(dims), std::move(data));
}

}  // namespace

Tensor parse_tensor(ByteView raw) {
    ByteReader r(raw);
    Tensor t = parse_tensor_from(r);
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after tensor");
    return t;
}

Bytes write_weights(const std::vector<Tensor>& tensors) {
    Bytes out;
    out.insert(out.end(), {'M', 'L', 'C', 'W'});
    put_u16le(out, kWeightsVersion);
    put_u32le(out, static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
        Bytes enc = serialize_tensor(t);
        out.insert(out.end(), enc.begin(), enc.end());
    }
    return out;
}

std::vector<Tensor> read_weights(ByteView raw) {
    ByteReader r(raw);
    r.expect_magic("MLCW");
    std::uint16_t version = r.u16le();
    if (version != kWeightsVersion) {
        throw Error(ErrorCode::ParseError, "unsupported weights version");
    }
    std::uint32_t count = r.u32le();
    std::vector<Tensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) tensors.push_back(parse_tensor_from(r));
    if (!r.done()) throw Error(ErrorCode::ParseError, "trailing bytes after weights");
    return tensors;
}

Bytes serialize_secrets(const ModelSecrets& secrets) {
    std::vector<Tensor> tensors;
    tensors.reserve(secrets.params.size() * 2);
    for (const auto& p : secrets.params) {
        tensors.push_back(p.weights);
        tensors.push_back(p.bias);
    }
    return write_weights(tensors);
}

ModelSecrets parse_secrets(const ModelDef& def, ByteView raw) {
    auto tensors = read_weights(raw);
    auto shapes = def.param_shapes();
    if (tensors.size() != shapes.size() * 2) {
        throw Error(ErrorCode::SchemaError, "weights stream holds " +
                                                std::to_string(tensors.size()) +
                                                " tensors, definition expects " +
                                                std::to_string(shapes.size() * 2));
    }
    ModelSecrets secrets;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        LayerParams p;
        p.weights = std::move(tensors[2 * i]);
        p.bias = std::move(tensors[2 * i + 1]);
        secrets.params.push_back(std::move(p));
    }
    check_secrets(def, secrets);
    return secrets;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

void write_file(const std::filesystem::path& path, ByteView data) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::StorageUnavailable, "cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorCode::StorageUnavailable, "short write to " + path.string());
}

void write_file_private(const std::filesystem::path& path, ByteView data) {
    write_file(path, data);
    ::chmod(path.c_str(), 0600);
}

void export_weights(const std::filesystem::path& def_path,
                    const std::filesystem::path& weights_path, const ModelDef& def,
                    const ModelSecrets& secrets) {
    def.validate();
    check_secrets(def, secrets);
    std::string doc = write_model_doc(def);
    write_file(def_path, to_bytes(doc));
    write_file(weights_path, serialize_secrets(secrets));
}

std::pair<ModelDef, ModelSecrets> import_weights(const std::filesystem::path& def_path,
                                                 const std::filesystem::path& weights_path) {
    ModelDef def = parse_model_doc(to_string(read_file(def_path)));
    ModelSecrets secrets = parse_secrets(def, read_file(weights_path));
    return {std::move(def), std::move(secrets)};
}

}  // namespace mlcapsule::nn
