#include <celluda/errors.hpp>
#include <celluda/heatmap_codec.hpp>
#include <celluda/random.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace celluda {

Heatmap generate_heatmap(const PointSet& points, double sigma, double amplitude)
{
    if (!(sigma > 0.0)) throw UsageError("generate_heatmap: sigma must be positive");
    if (!(amplitude > 0.0 && amplitude <= kHeatmapMax))
        throw UsageError("generate_heatmap: amplitude must be in (0, 255]");

    const int h = points.height();
    const int w = points.width();
    Image values = Image::Zero(h, w);
    if (points.empty()) return Heatmap(std::move(values), sigma);

    const double inv_s2 = 1.0 / (sigma * sigma);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double best = 0.0;
            for (const auto& p : points) {
                const double dr = r - p.row;
                const double dc = c - p.col;
                best = std::max(best, std::exp(-(dr * dr + dc * dc) * inv_s2));
            }
            values(r, c) = amplitude * best;
        }
    }
    return Heatmap(std::move(values), sigma);
}

PointSet detect_peaks(const Heatmap& heatmap, double threshold, int min_separation)
{
    if (!(threshold > 0.0 && threshold < kHeatmapMax))
        throw UsageError("detect_peaks: threshold must be in (0, 255)");
    if (min_separation < 1) throw UsageError("detect_peaks: min_separation must be >= 1");

    const Image& v = heatmap.values();
    const int h = heatmap.height();
    const int w = heatmap.width();
    const int rad = min_separation;
    PointSet peaks(h, w);

    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            const double x = v(r, c);
            if (!(x > threshold)) continue;
            bool is_peak = true;
            for (int rr = std::max(0, r - rad); is_peak && rr <= std::min(h - 1, r + rad); ++rr) {
                for (int cc = std::max(0, c - rad); cc <= std::min(w - 1, c + rad); ++cc) {
                    const double y = v(rr, cc);
                    // A tie loses to any neighbour that precedes it in row-major order.
                    if (y > x || (y == x && (rr < r || (rr == r && cc < c)))) {
                        is_peak = false;
                        break;
                    }
                }
            }
            if (is_peak) peaks.add({static_cast<double>(r), static_cast<double>(c)});
        }
    }
    return peaks;
}

PseudoLabel regenerate_pseudo_heatmap(const Heatmap& prediction, double threshold, double sigma)
{
    if (!(sigma > 0.0)) throw UsageError("regenerate_pseudo_heatmap: sigma must be positive");
    const int window = std::max(1, static_cast<int>(std::floor(sigma)));
    PointSet points = detect_peaks(prediction, threshold, window);
    Heatmap heatmap = generate_heatmap(points, sigma, kHeatmapMax);
    return {std::move(heatmap), std::move(points)};
}

const char* to_string(PerturbationMode mode)
{
    switch (mode) {
    case PerturbationMode::add: return "ADD";
    case PerturbationMode::remove: return "REMOVE";
    case PerturbationMode::shift: return "SHIFT";
    }
    return "?";
}

namespace {

std::optional<Point> sample_free_site(const PointSet& points, double min_dist, Rng& rng)
{
    const double min_d2 = min_dist * min_dist;
    for (int attempt = 0; attempt < kNegativeMaxAttempts; ++attempt) {
        const Point cand{static_cast<double>(uniform_index(rng, points.height())),
                         static_cast<double>(uniform_index(rng, points.width()))};
        bool ok = true;
        for (const auto& p : points) {
            if (squared_distance(p, cand) < min_d2) {
                ok = false;
                break;
            }
        }
        if (ok) return cand;
    }
    return std::nullopt;
}

} // namespace

NegativeSample synthesize_negative(const PointSet& points, double sigma, std::uint64_t seed, double min_dist,
                                   std::optional<PerturbationMode> forced_mode)
{
    if (!(sigma > 0.0)) throw UsageError("synthesize_negative: sigma must be positive");
    if (!(min_dist >= 0.0)) throw UsageError("synthesize_negative: min_dist must be non-negative");

    Rng rng(splitmix64(seed));
    PerturbationMode mode;
    if (forced_mode) {
        mode = *forced_mode;
        if (points.empty() && mode != PerturbationMode::add)
            throw UsageError("synthesize_negative: REMOVE/SHIFT need a non-empty point set");
    } else if (points.empty()) {
        mode = PerturbationMode::add;
    } else {
        static constexpr std::array modes{PerturbationMode::add, PerturbationMode::remove, PerturbationMode::shift};
        mode = modes[uniform_index(rng, modes.size())];
    }

    const std::vector<Point>& src = points.points();
    std::vector<Point> out = src;
    NegativePerturbation pert;
    pert.mode = mode;

    if (mode == PerturbationMode::add || mode == PerturbationMode::shift) {
        const std::size_t victim = (mode == PerturbationMode::shift) ? uniform_index(rng, src.size()) : 0;
        const auto site = sample_free_site(points, min_dist, rng);
        if (site) {
            pert.affected_point = *site;
            if (mode == PerturbationMode::add) {
                out.push_back(*site);
            } else {
                pert.affected_point = src[victim];
                pert.shift_vector = Point{site->row - src[victim].row, site->col - src[victim].col};
                out[victim] = *site;
            }
        } else if (!src.empty()) {
            mode = pert.mode = PerturbationMode::remove;
            pert.shift_vector.reset();
        } else {
            throw UsageError("synthesize_negative: no legal placement site in an empty patch");
        }
    }
    if (mode == PerturbationMode::remove) {
        const std::size_t victim = uniform_index(rng, src.size());
        pert.affected_point = src[victim];
        out.erase(out.begin() + static_cast<std::ptrdiff_t>(victim));
    }

    PointSet neg_points(std::move(out), points.height(), points.width());
    Heatmap heatmap = generate_heatmap(neg_points, sigma, kHeatmapMax);
    return {std::move(heatmap), std::move(neg_points), pert};
}

} // namespace celluda
