#include <celluda/errors.hpp>
#include <celluda/heatmap.hpp>
#include <celluda/point_set.hpp>

#include <algorithm>
#include <sstream>

namespace celluda {

PointSet::PointSet(int height, int width) : height_(height), width_(width)
{
    if (height <= 0 || width <= 0) throw UsageError("PointSet: patch shape must be positive");
}

PointSet::PointSet(std::vector<Point> points, int height, int width) : PointSet(height, width)
{
    points_.reserve(points.size());
    for (const auto& p : points) add(p);
}

bool PointSet::contains(const Point& p) const noexcept
{
    return std::find(points_.begin(), points_.end(), p) != points_.end();
}

void PointSet::add(const Point& p)
{
    if (!(p.row >= 0.0 && p.row < height_ && p.col >= 0.0 && p.col < width_)) {
        std::ostringstream os;
        os << "PointSet: point (" << p.row << ", " << p.col << ") outside patch " << height_ << "x" << width_;
        throw UsageError(os.str());
    }
    if (contains(p)) {
        std::ostringstream os;
        os << "PointSet: duplicate point (" << p.row << ", " << p.col << ")";
        throw UsageError(os.str());
    }
    points_.push_back(p);
}

Heatmap::Heatmap(Image values, double sigma) : values_(std::move(values)), sigma_(sigma)
{
    if (!values_.allFinite()) throw UsageError("Heatmap: non-finite value");
    if (values_.size() > 0 && (values_.minCoeff() < 0.0 || values_.maxCoeff() > kHeatmapMax))
        throw UsageError("Heatmap: value outside [0, 255]");
}

Heatmap Heatmap::zeros(int height, int width, double sigma)
{
    return Heatmap(Image::Zero(height, width), sigma);
}

} // namespace celluda
