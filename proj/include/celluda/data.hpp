#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/patch.hpp>
#include <celluda/point_set.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace celluda {

/// Full microscopy frame with its annotated centroids.
struct AnnotatedImage
{
    Image image;
    std::vector<Point> centroids;
    std::string condition;
    int frame_index = 0;
};

/// A patch together with the centroids that fall inside it, in patch
/// coordinates. `row0`/`col0` locate the window in its frame.
struct AnnotatedPatch
{
    Patch patch;
    PointSet points;
    int row0 = 0;
    int col0 = 0;
};

/// Window origins along one axis: 0, stride, 2*stride, ... with the last
/// window anchored at `extent - size`.
std::vector<int> window_origins(int extent, int size, int stride);

/// Sliding-window tiling; a centroid belongs to the window containing its
/// integer pixel, and to every overlapping window that does when stride < size.
std::vector<AnnotatedPatch> extract_patches(const AnnotatedImage& img, int size = kDefaultPatchSize,
                                            int stride = kDefaultPatchSize, Domain domain = Domain::source);

/// Affine min-max rescale to [0, 255]; constant images map to 0.
Image normalize(const Image& image);

/// Reads `frame,row,col` rows and binds each frame to `frame_{index}.png`
/// (or .tif/.tiff) next to the CSV. Frames are normalized on load.
std::vector<AnnotatedImage> load_annotations(const std::filesystem::path& csv, const std::string& condition = {});

/// Uniform seeded sample of `n` patch indices among those with at least one
/// cell, returned in ascending order.
std::vector<std::size_t> sample_labeled(const std::vector<AnnotatedPatch>& patches, std::size_t n, std::uint64_t seed);

/// Patch dataset on disk.
///
/// A directory holds `manifest.json` (`patches`: list of {id, image, gt}),
/// 8-bit images and `row,col` ground-truth CSVs. A directory with
/// `annotations.csv` instead is read as annotated frames and tiled.
struct Dataset
{
    std::vector<AnnotatedPatch> patches;
    bool has_truth = false;
    nlohmann::json manifest;
};

Dataset load_dataset(const std::filesystem::path& dir, Domain domain);
void save_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedPatch>& patches,
                  const nlohmann::json& extra = nlohmann::json::object());

} // namespace celluda
