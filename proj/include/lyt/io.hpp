#pragma once
// Binary and text file formats: LYTV1 video clips, LYTC1 checkpoints.
//
// Clip files:  magic "LYTV1", then T,H,W,C as little-endian u32, then
//              T*H*W*C little-endian f32 values, row-major T -> H -> W -> C.
//              Clip metadata that is not part of the pixel payload (fps,
//              background, seed, source) lives in the dataset manifest.
//
// Checkpoints: magic "LYTC1", a config record (u32 byte length + UTF-8
//              key=value text), u32 tensor count, then per tensor:
//              u32 name length + name bytes + u32 ndim + ndim u32 dims +
//              little-endian f32 data.  The file ends with a u64 FNV-1a
//              checksum over every preceding byte.  Values are stored as
//              f32; together with the trainer's f32-grid parameter rule
//              this makes save/load round trips bit-exact.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lyt/common.hpp"
#include "lyt/render.hpp"

namespace lyt {

/// One named tensor as stored in a checkpoint: name, shape, row-major values.
struct NamedTensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<real> values;
};

/// Parsed checkpoint: the config record plus all tensors in file order.
struct CheckpointData {
    std::string config;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
};

void write_clip(const VideoClip& clip, const std::filesystem::path& path);

/// Reads pixel payload and dimensions. Metadata fields (fps, background,
/// seed, source) are left at defaults for the caller to fill from the
/// manifest.
VideoClip read_clip(const std::filesystem::path& path);

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& ckpt);

/// Throws IoError on bad magic, truncation, or checksum mismatch.
CheckpointData read_checkpoint(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace lyt
