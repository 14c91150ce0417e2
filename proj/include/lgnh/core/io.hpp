#pragma once

#include <filesystem>

#include "lgnh/core/raster.hpp"

namespace lgnh::io {

/// Reads 8- or 16-bit gray/RGB/RGBA PNGs; values are divided by the bit-depth
/// maximum. Gray inputs are replicated into three channels, alpha is dropped.
RgbTile read_rgb_png(const std::filesystem::path& path);
void write_rgb_png(const std::filesystem::path& path, const RgbTile& tile);

/// 16-bit single-channel PNG holding label values verbatim.
InstanceMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const InstanceMask& mask);

/// Float32 raster: magic "LGNH", u32 width, u32 height, u32 reserved (0),
/// then width*height little-endian float32 values, row-major.
void write_heatmap(const std::filesystem::path& path, const Heatmap& heatmap);
Heatmap read_heatmap(const std::filesystem::path& path);
/// 8-bit preview, value = round(255 p).
void write_heatmap_preview(const std::filesystem::path& path, const Heatmap& heatmap);

}  // namespace lgnh::io
