#include <celluda/errors.hpp>
#include <celluda/random.hpp>
#include <celluda/synthetic.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace celluda {

const char* to_string(CellShape s) { return s == CellShape::round ? "ROUND" : "ELONGATED"; }

CellShape cell_shape_from_string(const std::string& s)
{
    if (s == "ROUND" || s == "round") return CellShape::round;
    if (s == "ELONGATED" || s == "elongated") return CellShape::elongated;
    throw UsageError("unknown cell shape '" + s + "' (expected ROUND or ELONGATED)");
}

SyntheticDomainSpec SyntheticDomainSpec::round_preset() { return {}; }

SyntheticDomainSpec SyntheticDomainSpec::elongated_preset()
{
    SyntheticDomainSpec s;
    s.shape = CellShape::elongated;
    s.aspect_min = 5.0;
    s.aspect_max = 8.0;
    s.radius_min = 8.0;
    s.radius_max = 11.0;
    s.min_separation = 20.0;
    return s;
}

void SyntheticDomainSpec::validate() const
{
    auto req = [](bool ok, const char* what) {
        if (!ok) throw UsageError(std::string("synthetic spec: ") + what);
    };
    req(aspect_min >= 1.0 && aspect_max >= aspect_min, "aspect range must satisfy 1 <= min <= max");
    req(radius_min > 0.0 && radius_max >= radius_min, "radius range must satisfy 0 < min <= max");
    req(cells_min >= 0 && cells_max >= cells_min, "cell count range must satisfy 0 <= min <= max");
    req(min_separation >= 8.0, "min_separation must be >= 8");
    req(border >= 0.0, "border must be >= 0");
    req(patch_size >= 8 && 2.0 * border < patch_size, "patch_size too small for border");
    req(halo_width > 0.0, "halo_width must be positive");
    req(noise_sigma >= 0.0, "noise_sigma must be >= 0");
    req(std::isfinite(background) && std::isfinite(halo) && std::isfinite(interior), "intensities must be finite");
}

nlohmann::json to_json(const SyntheticDomainSpec& s)
{
    return {{"cell_shape", to_string(s.shape)},
            {"aspect_min", s.aspect_min},
            {"aspect_max", s.aspect_max},
            {"radius_min", s.radius_min},
            {"radius_max", s.radius_max},
            {"cells_min", s.cells_min},
            {"cells_max", s.cells_max},
            {"min_separation", s.min_separation},
            {"border", s.border},
            {"background", s.background},
            {"halo", s.halo},
            {"halo_width", s.halo_width},
            {"interior", s.interior},
            {"noise_sigma", s.noise_sigma},
            {"patch_size", s.patch_size}};
}

SyntheticDomainSpec spec_from_json(const nlohmann::json& j)
{
    SyntheticDomainSpec s = SyntheticDomainSpec::round_preset();
    if (j.contains("cell_shape")) {
        s.shape = cell_shape_from_string(j.at("cell_shape").get<std::string>());
        if (s.shape == CellShape::elongated) s = SyntheticDomainSpec::elongated_preset();
    }
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "cell_shape") continue;
            if (key == "aspect_min") s.aspect_min = value.get<double>();
            else if (key == "aspect_max") s.aspect_max = value.get<double>();
            else if (key == "radius_min") s.radius_min = value.get<double>();
            else if (key == "radius_max") s.radius_max = value.get<double>();
            else if (key == "cells_min") s.cells_min = value.get<int>();
            else if (key == "cells_max") s.cells_max = value.get<int>();
            else if (key == "min_separation") s.min_separation = value.get<double>();
            else if (key == "border") s.border = value.get<double>();
            else if (key == "background") s.background = value.get<double>();
            else if (key == "halo") s.halo = value.get<double>();
            else if (key == "halo_width") s.halo_width = value.get<double>();
            else if (key == "interior") s.interior = value.get<double>();
            else if (key == "noise_sigma") s.noise_sigma = value.get<double>();
            else if (key == "patch_size") s.patch_size = value.get<int>();
            else throw UsageError("synthetic spec: unknown key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("synthetic spec: ") + e.what());
    }
    s.validate();
    return s;
}

namespace {

struct Cell
{
    Point center;
    double a;
    double b;
    double theta;
    double darkness;
};

double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

bool place_cells(const SyntheticDomainSpec& spec, int count, Rng& rng, std::vector<Cell>& cells)
{
    cells.clear();
    const double lo = spec.border;
    const double span = spec.patch_size - 2.0 * spec.border;
    const double sep2 = spec.min_separation * spec.min_separation;
    for (int k = 0; k < count; ++k) {
        bool placed = false;
        for (int attempt = 0; attempt < 2000 && !placed; ++attempt) {
            const Point c{std::floor(lo + span * uniform01(rng)), std::floor(lo + span * uniform01(rng))};
            if (c.row >= spec.patch_size - spec.border || c.col >= spec.patch_size - spec.border) continue;
            placed = std::all_of(cells.begin(), cells.end(),
                                 [&](const Cell& o) { return squared_distance(o.center, c) >= sep2; });
            if (placed) cells.push_back({c, 0, 0, 0, 0});
        }
        if (!placed) return false;
    }
    for (auto& cell : cells) {
        const double r = uniform(rng, spec.radius_min, spec.radius_max);
        const double e = uniform(rng, spec.aspect_min, spec.aspect_max);
        cell.a = r * std::sqrt(e);
        cell.b = r / std::sqrt(e);
        cell.theta = uniform(rng, 0.0, std::numbers::pi);
        cell.darkness = spec.interior * uniform(rng, 0.85, 1.15);
    }
    return true;
}

Image render(const SyntheticDomainSpec& spec, const std::vector<Cell>& cells, Rng& rng)
{
    const int n = spec.patch_size;
    Image halo = Image::Zero(n, n);
    Image dark = Image::Zero(n, n);
    for (const auto& cell : cells) {
        const double ct = std::cos(cell.theta);
        const double st = std::sin(cell.theta);
        const int reach = static_cast<int>(std::ceil(cell.a + 5.0 * spec.halo_width)) + 1;
        const int r0 = std::max(0, static_cast<int>(cell.center.row) - reach);
        const int r1 = std::min(n - 1, static_cast<int>(cell.center.row) + reach);
        const int c0 = std::max(0, static_cast<int>(cell.center.col) - reach);
        const int c1 = std::min(n - 1, static_cast<int>(cell.center.col) + reach);
        for (int r = r0; r <= r1; ++r) {
            for (int c = c0; c <= c1; ++c) {
                const double dy = r - cell.center.row;
                const double dx = c - cell.center.col;
                const double u = ct * dx + st * dy;
                const double v = -st * dx + ct * dy;
                const double rho = std::sqrt(u * u / (cell.a * cell.a) + v * v / (cell.b * cell.b));
                const double grad = std::sqrt(u * u / std::pow(cell.a, 4) + v * v / std::pow(cell.b, 4));
                // First-order distance to the boundary, negative inside.
                const double d = rho > 1e-9 ? (rho - 1.0) * rho / std::max(grad, 1e-9) : -cell.b;
                // Rim sits outside the boundary so the dark body keeps the ellipse's shape.
                const double h = d > 0.0 ? spec.halo * std::exp(-(d * d) / (spec.halo_width * spec.halo_width)) : 0.0;
                const double k = cell.darkness / (1.0 + std::exp(d / 0.6));
                halo(r, c) = std::max(halo(r, c), h);
                dark(r, c) = std::max(dark(r, c), k);
            }
        }
    }
    Image img = spec.background + halo - dark;
    for (Eigen::Index i = 0; i < img.size(); ++i) {
        const double noisy = img.data()[i] + spec.noise_sigma * standard_normal(rng);
        img.data()[i] = std::round(std::clamp(noisy, 0.0, kHeatmapMax));
    }
    return img;
}

} // namespace

std::vector<AnnotatedPatch> generate_synthetic_dataset(const SyntheticDomainSpec& spec, int n, std::uint64_t seed,
                                                       Domain domain)
{
    spec.validate();
    if (n < 1) throw UsageError("generate_synthetic_dataset: n_patches must be >= 1");
    std::vector<AnnotatedPatch> out;
    out.reserve(static_cast<std::size_t>(n));
    std::vector<Cell> cells;
    for (int i = 0; i < n; ++i) {
        Rng rng(substream_seed(seed, "synthetic-patch", static_cast<std::uint64_t>(i)));
        const int count = spec.cells_min + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(spec.cells_max - spec.cells_min + 1)));
        bool ok = false;
        for (int attempt = 0; attempt < 20 && !ok; ++attempt) ok = place_cells(spec, count, rng, cells);
        if (!ok)
            throw DataError("generate_synthetic_dataset: cannot place " + std::to_string(count) + " cells "
                            + std::to_string(spec.min_separation) + " px apart in a " + std::to_string(spec.patch_size)
                            + " px patch");
        AnnotatedPatch ap;
        ap.patch.pixels = render(spec, cells, rng);
        ap.patch.domain = domain;
        char id[64];
        std::snprintf(id, sizeof id, "%s-%llu-%05d", spec.shape == CellShape::round ? "round" : "elong",
                      static_cast<unsigned long long>(seed), i);
        ap.patch.source_id = id;
        ap.points = PointSet(spec.patch_size, spec.patch_size);
        for (const auto& c : cells) ap.points.add(c.center);
        out.push_back(std::move(ap));
    }
    return out;
}

std::vector<double> blob_aspect_ratios(const Image& image, double threshold, int min_area)
{
    const int h = static_cast<int>(image.rows());
    const int w = static_cast<int>(image.cols());
    std::vector<char> seen(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), 0);
    std::vector<std::pair<int, int>> stack;
    std::vector<double> ratios;
    for (int r0 = 0; r0 < h; ++r0) {
        for (int c0 = 0; c0 < w; ++c0) {
            const auto i0 = static_cast<std::size_t>(r0 * w + c0);
            if (seen[i0] || !(image(r0, c0) < threshold)) continue;
            seen[i0] = 1;
            stack.assign(1, {r0, c0});
            double n = 0, sr = 0, sc = 0, srr = 0, scc = 0, src = 0;
            while (!stack.empty()) {
                const auto [r, c] = stack.back();
                stack.pop_back();
                n += 1;
                sr += r;
                sc += c;
                srr += double(r) * r;
                scc += double(c) * c;
                src += double(r) * c;
                const int nb[4][2] = {{r - 1, c}, {r + 1, c}, {r, c - 1}, {r, c + 1}};
                for (const auto& q : nb) {
                    if (q[0] < 0 || q[0] >= h || q[1] < 0 || q[1] >= w) continue;
                    const auto j = static_cast<std::size_t>(q[0] * w + q[1]);
                    if (seen[j] || !(image(q[0], q[1]) < threshold)) continue;
                    seen[j] = 1;
                    stack.push_back({q[0], q[1]});
                }
            }
            if (n < min_area) continue;
            const double mr = sr / n;
            const double mc = sc / n;
            const double vrr = srr / n - mr * mr;
            const double vcc = scc / n - mc * mc;
            const double vrc = src / n - mr * mc;
            const double tr = 0.5 * (vrr + vcc);
            const double disc = std::sqrt(std::max(0.0, 0.25 * (vrr - vcc) * (vrr - vcc) + vrc * vrc));
            const double l1 = tr + disc;
            const double l2 = tr - disc;
            if (l2 <= 1e-12) continue;
            ratios.push_back(std::sqrt(l1 / l2));
        }
    }
    return ratios;
}

double shape_statistic(const Image& image, const SyntheticDomainSpec& spec)
{
    const auto ratios = blob_aspect_ratios(image, spec.background - 0.5 * spec.interior);
    if (ratios.empty()) return 1.0;
    double s = 0.0;
    for (double r : ratios) s += r;
    return s / static_cast<double>(ratios.size());
}

} // namespace celluda
