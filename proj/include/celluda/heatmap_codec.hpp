#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/point_set.hpp>

#include <cstdint>
#include <optional>
#include <utility>

namespace celluda {

inline constexpr double kDefaultPeakThreshold = 100.0;
inline constexpr double kDefaultSigma = 6.0;
inline constexpr double kDefaultNegativeMinDistance = 15.0;
inline constexpr int kNegativeMaxAttempts = 1000;

/// Renders amplitude * max_n exp(-|u - z_n|^2 / sigma^2). Per-cell Gaussians
/// are composed by pixelwise maximum. An empty point set gives an all-zero map.
Heatmap generate_heatmap(const PointSet& points, double sigma, double amplitude = kHeatmapMax);

/// Pixels strictly above `threshold` that are maximal inside the square
/// window of radius `min_separation`. Equal values inside a window are
/// resolved toward the smaller row, then the smaller column, so a tied
/// plateau yields one peak. Output is in row-major order.
PointSet detect_peaks(const Heatmap& heatmap, double threshold, int min_separation);

struct PseudoLabel
{
    Heatmap heatmap;
    PointSet points;
};

/// Re-renders a possibly distorted prediction as clean Gaussians at its
/// detected peaks (window radius floor(sigma)).
PseudoLabel regenerate_pseudo_heatmap(const Heatmap& prediction, double threshold, double sigma);

enum class PerturbationMode
{
    add,
    remove,
    shift
};

const char* to_string(PerturbationMode mode);

struct NegativePerturbation
{
    PerturbationMode mode = PerturbationMode::add;
    /// Added point, removed point, or the shift source.
    Point affected_point;
    /// Destination minus source, SHIFT only.
    std::optional<Point> shift_vector;
};

struct NegativeSample
{
    Heatmap heatmap;
    PointSet points;
    NegativePerturbation perturbation;
};

/// Builds an incorrect heatmap from a correct point set by adding, removing
/// or shifting exactly one Gaussian. Destinations of ADD/SHIFT are integer
/// pixels inside the patch at least `min_dist` from every original centroid,
/// drawn by rejection sampling (kNegativeMaxAttempts); when that fails the
/// sample falls back to REMOVE. An empty point set always uses ADD.
NegativeSample synthesize_negative(const PointSet& points, double sigma, std::uint64_t seed,
                                   double min_dist = kDefaultNegativeMinDistance,
                                   std::optional<PerturbationMode> forced_mode = std::nullopt);

} // namespace celluda
