#include <celluda/errors.hpp>
#include <celluda/render.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace celluda::render {

namespace {

const cv::Scalar kInk(40, 40, 40);
const cv::Scalar kGrid(225, 225, 225);
const cv::Scalar kPalette[] = {{180, 119, 31}, {14, 127, 255}, {44, 160, 44}, {40, 39, 214}, {189, 103, 148}};

cv::Mat to_gray8(const Image& img)
{
    cv::Mat m(static_cast<int>(img.rows()), static_cast<int>(img.cols()), CV_8UC1);
    for (int r = 0; r < m.rows; ++r)
        for (int c = 0; c < m.cols; ++c)
            m.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(std::clamp(img(r, c), 0.0, 255.0)));
    return m;
}

void write_png(const std::filesystem::path& path, const cv::Mat& m)
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), m)) throw DataError("cannot write " + path.string());
}

std::string tick(double v)
{
    char buf[32];
    if (std::abs(v) >= 100 || v == std::round(v)) std::snprintf(buf, sizeof buf, "%.0f", v);
    else std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void text(cv::Mat& m, const std::string& s, cv::Point at, double size = 0.45, int thick = 1)
{
    cv::putText(m, s, at, cv::FONT_HERSHEY_SIMPLEX, size, kInk, thick, cv::LINE_AA);
}

struct Frame
{
    cv::Rect area;
    double x0, x1, y0, y1;

    cv::Point map(double x, double y) const
    {
        const double fx = x1 > x0 ? (x - x0) / (x1 - x0) : 0.5;
        const double fy = y1 > y0 ? (y - y0) / (y1 - y0) : 0.5;
        return {area.x + static_cast<int>(std::lround(fx * area.width)),
                area.y + area.height - static_cast<int>(std::lround(fy * area.height))};
    }
};

// Canvas with title, axis labels, horizontal grid and y ticks.
cv::Mat axes(const Chart& chart, Frame& f)
{
    cv::Mat m(480, 720, CV_8UC3, cv::Scalar(255, 255, 255));
    f.area = cv::Rect(80, 70, 600, 340);
    text(m, chart.title, {80, 30}, 0.6, 1);
    text(m, chart.x_label, {f.area.x + f.area.width / 2 - 60, 465});
    text(m, chart.y_label, {10, 56}, 0.4);
    for (int i = 0; i <= 5; ++i) {
        const double y = f.y0 + (f.y1 - f.y0) * i / 5.0;
        const auto p = f.map(f.x0, y);
        cv::line(m, {f.area.x, p.y}, {f.area.x + f.area.width, p.y}, kGrid, 1);
        text(m, tick(y), {18, p.y + 4}, 0.4);
    }
    cv::rectangle(m, f.area, kInk, 1);
    return m;
}

void fit_y(const Chart& chart, double lo, double hi, Frame& f)
{
    if (chart.y_max > chart.y_min) {
        f.y0 = chart.y_min;
        f.y1 = chart.y_max;
        return;
    }
    if (!(hi > lo)) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double pad = 0.08 * (hi - lo);
    f.y0 = lo - pad;
    f.y1 = hi + pad;
}

} // namespace

void overlay_png(const std::filesystem::path& path, const Patch& patch, const Heatmap& prediction,
                 const PointSet& peaks, const PointSet* truth, int scale)
{
    if (scale < 1) throw UsageError("overlay_png: scale must be >= 1");
    if (prediction.height() != patch.height() || prediction.width() != patch.width())
        throw UsageError("overlay_png: heatmap/patch shape mismatch");
    cv::Mat gray, heat, gray_bgr, heat_bgr, blend;
    cv::resize(to_gray8(patch.pixels), gray, {}, scale, scale, cv::INTER_NEAREST);
    cv::resize(to_gray8(prediction.values()), heat, {}, scale, scale, cv::INTER_NEAREST);
    cv::cvtColor(gray, gray_bgr, cv::COLOR_GRAY2BGR);
    cv::applyColorMap(heat, heat_bgr, cv::COLORMAP_JET);
    cv::addWeighted(gray_bgr, 0.6, heat_bgr, 0.4, 0.0, blend);

    auto centre = [&](const Point& p) {
        return cv::Point(static_cast<int>(std::lround((p.col + 0.5) * scale)),
                         static_cast<int>(std::lround((p.row + 0.5) * scale)));
    };
    cv::Mat marked = gray_bgr.clone();
    for (cv::Mat* m : {&marked, &blend}) {
        if (truth)
            for (const auto& p : *truth) cv::circle(*m, centre(p), 4 * scale, cv::Scalar(60, 200, 60), 1, cv::LINE_AA);
        for (const auto& p : peaks)
            cv::drawMarker(*m, centre(p), cv::Scalar(40, 40, 230), cv::MARKER_CROSS, 4 * scale, 2);
    }
    const int gap = 6;
    cv::Mat out(gray.rows, 3 * gray.cols + 2 * gap, CV_8UC3, cv::Scalar(255, 255, 255));
    marked.copyTo(out(cv::Rect(0, 0, gray.cols, gray.rows)));
    heat_bgr.copyTo(out(cv::Rect(gray.cols + gap, 0, gray.cols, gray.rows)));
    blend.copyTo(out(cv::Rect(2 * (gray.cols + gap), 0, gray.cols, gray.rows)));
    write_png(path, out);
}

void line_chart_png(const std::filesystem::path& path, const Chart& chart, const std::vector<Series>& series)
{
    Frame f{};
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw UsageError("line_chart_png: x/y length mismatch in " + s.label);
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
    f.x0 = xlo;
    f.x1 = xhi > xlo ? xhi : xlo + 1.0;
    fit_y(chart, ylo, yhi, f);
    cv::Mat m = axes(chart, f);
    for (int i = 0; i <= 4; ++i) {
        const double x = f.x0 + (f.x1 - f.x0) * i / 4.0;
        const auto p = f.map(x, f.y0);
        text(m, tick(x), {p.x - 10, p.y + 20}, 0.4);
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const auto colour = kPalette[k % std::size(kPalette)];
        std::vector<cv::Point> pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) pts.push_back(f.map(s.x[i], s.y[i]));
        if (pts.size() > 1) cv::polylines(m, pts, false, colour, 2, cv::LINE_AA);
        for (const auto& p : pts) cv::circle(m, p, 4, colour, cv::FILLED, cv::LINE_AA);
        const int ly = f.area.y + 18 + 18 * static_cast<int>(k);
        cv::line(m, {f.area.x + f.area.width - 170, ly - 4}, {f.area.x + f.area.width - 150, ly - 4}, colour, 2);
        text(m, s.label, {f.area.x + f.area.width - 145, ly}, 0.4);
    }
    write_png(path, m);
}

void bar_chart_png(const std::filesystem::path& path, const Chart& chart, const std::vector<std::string>& labels,
                   const std::vector<double>& values, const std::vector<std::string>& notes)
{
    if (labels.size() != values.size()) throw UsageError("bar_chart_png: labels/values length mismatch");
    Frame f{};
    f.x0 = 0.0;
    f.x1 = std::max<double>(1.0, static_cast<double>(values.size()));
    double hi = 0.0;
    for (double v : values) hi = std::max(hi, v);
    fit_y(chart, 0.0, hi, f);
    if (!(chart.y_max > chart.y_min)) f.y0 = 0.0;
    cv::Mat m = axes(chart, f);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto a = f.map(static_cast<double>(i) + 0.15, values[i]);
        const auto b = f.map(static_cast<double>(i) + 0.85, f.y0);
        cv::rectangle(m, cv::Rect(a, b), kPalette[0], cv::FILLED);
        text(m, labels[i], {(a.x + b.x) / 2 - 4 * static_cast<int>(labels[i].size()), b.y + 20}, 0.4);
        if (i < notes.size()) text(m, notes[i], {(a.x + b.x) / 2 - 4 * static_cast<int>(notes[i].size()), a.y - 6}, 0.35);
    }
    write_png(path, m);
}

} // namespace celluda::render
