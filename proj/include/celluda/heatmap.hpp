#pragma once

#include <Eigen/Core>

namespace celluda {

/// Row-major single-channel raster; rows index image rows.
using Image = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kHeatmapMax = 255.0;

/// Cell-position heatmap on the 0..255 scale.
///
/// Values are finite and inside [0, 255]; the constructor rejects anything
/// else with UsageError. `sigma` records the Gaussian width used to render it
/// (0 for raw network predictions).
class Heatmap
{
public:
    Heatmap() = default;
    Heatmap(Image values, double sigma);

    static Heatmap zeros(int height, int width, double sigma);

    const Image& values() const noexcept { return values_; }
    double sigma() const noexcept { return sigma_; }
    int height() const noexcept { return static_cast<int>(values_.rows()); }
    int width() const noexcept { return static_cast<int>(values_.cols()); }
    double operator()(int r, int c) const { return values_(r, c); }

    /// Exact pixelwise equality (sigma is metadata and not compared).
    friend bool operator==(const Heatmap& a, const Heatmap& b)
    {
        return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols()
            && (a.values_ == b.values_).all();
    }

private:
    Image values_;
    double sigma_ = 0.0;
};

} // namespace celluda
