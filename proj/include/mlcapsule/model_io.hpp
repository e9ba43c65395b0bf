#pragma once

#include <filesystem>
#include <string>

#include "mlcapsule/layers.hpp"

namespace mlcapsule::nn {

// Weights container ("MLCW"): u16 version, u32 tensor count, then per tensor
// u8 dtype (0 = f32), u8 rank, rank u32 dims, row-major f32 payload. All
// integers little-endian.
Bytes write_weights(const std::vector<Tensor>& tensors);
std::vector<Tensor> read_weights(ByteView raw);

// ModelSecrets as an MLCW stream: weights then bias per parameterized layer.
Bytes serialize_secrets(const ModelSecrets& secrets);
// Checks tensor shapes against the definition; throws SchemaError.
ModelSecrets parse_secrets(const ModelDef& def, ByteView raw);

Bytes serialize_tensor(const Tensor& t);
Tensor parse_tensor(ByteView raw);

// File helpers used by the CLI.
void export_weights(const std::filesystem::path& def_path,
                    const std::filesystem::path& weights_path, const ModelDef& def,
                    const ModelSecrets& secrets);
std::pair<ModelDef, ModelSecrets> import_weights(const std::filesystem::path& def_path,
                                                 const std::filesystem::path& weights_path);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, ByteView data);
void write_file_private(const std::filesystem::path& path, ByteView data);  // 0600

}  // namespace mlcapsule::nn
