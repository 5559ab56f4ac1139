#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "ia/data_model.hpp"
#include "ia/tensor.hpp"

namespace ia {

// IGHM heatmap file: magic "IGHM", u32 LE rows, u32 LE cols, rows*cols
// 32-bit LE floats, row-major.
void save_heatmap_ighm(const std::string& path, const AttentionMap& m);
AttentionMap load_heatmap_ighm(const std::string& path);

// 8-bit grayscale PNG, values * 255 rounded.
void save_heatmap_png(const std::string& path, const AttentionMap& m);

void save_split(const std::string& path, const SplitManifest& m);
SplitManifest load_split(const std::string& path);

// Named tensor records for checkpoints and cached encoder features:
// u32 name_len, name bytes, u8 dtype (0 = f32, 1 = f64), u32 rows, u32 cols,
// then the row-major payload, all little-endian.
struct NamedTensor {
    std::string name;
    Tensor t;
    bool f64 = true;
};

void write_tensor_record(std::ostream& out, const NamedTensor& nt);
NamedTensor read_tensor_record(std::istream& in);

void save_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensor_file(const std::string& path);

// Checkpoint archive: magic "IACKPT01", u32 json length, config JSON, u32
// tensor count, tensor records. Model parameters are stored as f64 so that
// resuming training is bit-exact.
struct CheckpointFile {
    nlohmann::json config;
    std::vector<NamedTensor> tensors;
};

void save_checkpoint_file(const std::string& path, const CheckpointFile& ck);
CheckpointFile load_checkpoint_file(const std::string& path);

// Atomic small-file write: temp file in the same directory, then rename.
void atomic_write_text(const std::string& path, const std::string& text);

}  // namespace ia
