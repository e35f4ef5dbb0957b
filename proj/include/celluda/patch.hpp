#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/point_set.hpp>

#include <string>

namespace celluda {

inline constexpr int kDefaultPatchSize = 128;

enum class Domain
{
    source,
    target
};

/// Grayscale window on the 0..255 scale. `source_id` names the origin image
/// and window offset and is unique within a dataset.
struct Patch
{
    Image pixels;
    std::string source_id;
    Domain domain = Domain::source;

    int height() const { return static_cast<int>(pixels.rows()); }
    int width() const { return static_cast<int>(pixels.cols()); }
};

enum class LabelOrigin
{
    annotated,
    pseudo
};

/// Training pair for the detector; the heatmap is rendered from `points`.
struct LabeledSample
{
    Patch patch;
    PointSet points;
    Heatmap heatmap;
    LabelOrigin origin = LabelOrigin::annotated;
    int iteration_added = 0;
};

/// Renders the heatmap for `points` and checks the shapes agree.
LabeledSample make_labeled_sample(Patch patch, PointSet points, double sigma,
                                  LabelOrigin origin = LabelOrigin::annotated, int iteration_added = 0);

} // namespace celluda
