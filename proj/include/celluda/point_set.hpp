#pragma once

#include <cmath>
#include <compare>
#include <vector>

namespace celluda {

/// Pixel coordinates, row first.
struct Point
{
    double row = 0.0;
    double col = 0.0;

    friend auto operator<=>(const Point&, const Point&) = default;
};

inline double squared_distance(const Point& a, const Point& b)
{
    const double dr = a.row - b.row;
    const double dc = a.col - b.col;
    return dr * dr + dc * dc;
}

inline double distance(const Point& a, const Point& b)
{
    return std::sqrt(squared_distance(a, b));
}

/// Cell centroids inside one patch of shape height x width.
///
/// Every point lies in [0, height) x [0, width) and no two points coincide;
/// both are checked on insertion and violations throw UsageError.
class PointSet
{
public:
    PointSet() = default;
    PointSet(int height, int width);
    PointSet(std::vector<Point> points, int height, int width);

    void add(const Point& p);

    const std::vector<Point>& points() const noexcept { return points_; }
    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    bool contains(const Point& p) const noexcept;

    const Point& operator[](std::size_t i) const { return points_[i]; }
    auto begin() const noexcept { return points_.begin(); }
    auto end() const noexcept { return points_.end(); }

    friend bool operator==(const PointSet&, const PointSet&) = default;

private:
    std::vector<Point> points_;
    int height_ = 0;
    int width_ = 0;
};

} // namespace celluda
