#pragma once

#include <celluda/data.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace celluda {

enum class CellShape
{
    round,
    elongated
};

const char* to_string(CellShape s);
CellShape cell_shape_from_string(const std::string& s);

/// Generator for phase-contrast-like patches: each cell is an ellipse with a
/// dark interior ringed by a bright halo, on a noisy background.
///
/// `aspect` is the major/minor axis ratio and `radius` the equivalent radius
/// sqrt(a*b), so elongation keeps cell area fixed.
struct SyntheticDomainSpec
{
    CellShape shape = CellShape::round;
    double aspect_min = 1.0;
    double aspect_max = 1.3;
    double radius_min = 6.0;
    double radius_max = 9.0;
    int cells_min = 1;
    int cells_max = 8;
    double min_separation = 12.0;
    /// Centroids keep at least this distance from the patch border.
    double border = 4.0;
    double background = 110.0;
    double halo = 90.0;
    double halo_width = 1.5;
    double interior = 55.0;
    double noise_sigma = 6.0;
    int patch_size = kDefaultPatchSize;

    static SyntheticDomainSpec round_preset();
    static SyntheticDomainSpec elongated_preset();

    /// Throws UsageError on inconsistent ranges.
    void validate() const;
};

nlohmann::json to_json(const SyntheticDomainSpec& spec);
SyntheticDomainSpec spec_from_json(const nlohmann::json& j);

/// Renders `n` patches. Patch i depends only on (spec, seed, i). Throws
/// DataError when the separation constraint cannot be met.
std::vector<AnnotatedPatch> generate_synthetic_dataset(const SyntheticDomainSpec& spec, int n, std::uint64_t seed,
                                                       Domain domain = Domain::source);

/// Axis ratio sqrt(l1/l2) of the covariance of each 4-connected component of
/// pixels below `threshold` with at least `min_area` pixels.
std::vector<double> blob_aspect_ratios(const Image& image, double threshold, int min_area = 12);

/// Mean of blob_aspect_ratios at the spec's mid-interior level, 1 when no
/// blob is found.
double shape_statistic(const Image& image, const SyntheticDomainSpec& spec);

} // namespace celluda
