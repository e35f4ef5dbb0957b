#pragma once

#include <celluda/heatmap.hpp>
#include <celluda/patch.hpp>
#include <celluda/point_set.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace celluda::render {

/// Three panels side by side: patch, predicted heatmap, and the patch with the
/// heatmap blended in. Detected peaks are red crosses, truth green circles.
void overlay_png(const std::filesystem::path& path, const Patch& patch, const Heatmap& prediction,
                 const PointSet& peaks, const PointSet* truth = nullptr, int scale = 3);

struct Series
{
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart
{
    std::string title;
    std::string x_label;
    std::string y_label;
    /// Fixed y range; both zero means fit to the data.
    double y_min = 0.0;
    double y_max = 0.0;
};

void line_chart_png(const std::filesystem::path& path, const Chart& chart, const std::vector<Series>& series);

/// One bar per category; `labels` annotate the x axis, `notes` sit on the bars.
void bar_chart_png(const std::filesystem::path& path, const Chart& chart, const std::vector<std::string>& labels,
                   const std::vector<double>& values, const std::vector<std::string>& notes = {});

} // namespace celluda::render
