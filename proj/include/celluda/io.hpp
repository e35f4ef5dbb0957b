#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/point_set.hpp>

#include <filesystem>

namespace celluda::io {

/// CSV with header `row,col`, one point per line.
void write_points_csv(const std::filesystem::path& path, const PointSet& points);
PointSet read_points_csv(const std::filesystem::path& path, int height, int width);

/// Lossless heatmap file: magic "CELLHMAP", u32 version, i32 height, i32
/// width, f64 sigma, then height*width f64 values row-major, little-endian.
void save_heatmap(const std::filesystem::path& path, const Heatmap& heatmap);
Heatmap load_heatmap(const std::filesystem::path& path);

/// 8-bit grayscale rendering, values rounded to the nearest integer.
void save_heatmap_png(const std::filesystem::path& path, const Heatmap& heatmap);

/// Reads an 8- or 16-bit grayscale PNG/TIFF as raw intensities.
Image read_image(const std::filesystem::path& path);

/// Writes an image clamped to [0, 255] and rounded, as 8-bit grayscale.
void write_image_u8(const std::filesystem::path& path, const Image& image);

/// Writes `content` to `path` via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

} // namespace celluda::io
