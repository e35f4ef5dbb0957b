#include <celluda/data.hpp>
#include <celluda/errors.hpp>
#include <celluda/io.hpp>
#include <celluda/random.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace celluda {

std::vector<int> window_origins(int extent, int size, int stride)
{
    if (size < 1 || stride < 1) throw UsageError("extract_patches: size and stride must be positive");
    if (size > extent) throw UsageError("extract_patches: patch size exceeds image");
    std::vector<int> origins;
    for (int o = 0; o + size <= extent; o += stride) origins.push_back(o);
    if (origins.back() + size < extent) origins.push_back(extent - size);
    return origins;
}

std::vector<AnnotatedPatch> extract_patches(const AnnotatedImage& img, int size, int stride, Domain domain)
{
    const int h = static_cast<int>(img.image.rows());
    const int w = static_cast<int>(img.image.cols());
    const auto rows = window_origins(h, size, stride);
    const auto cols = window_origins(w, size, stride);
    std::vector<AnnotatedPatch> out;
    out.reserve(rows.size() * cols.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const int r0 = rows[i];
            const int c0 = cols[j];
            AnnotatedPatch ap;
            ap.row0 = r0;
            ap.col0 = c0;
            ap.patch.pixels = img.image.block(r0, c0, size, size);
            ap.patch.domain = domain;
            char id[96];
            std::snprintf(id, sizeof id, "%s%sf%04d_r%05d_c%05d", img.condition.c_str(),
                          img.condition.empty() ? "" : "_", img.frame_index, r0, c0);
            ap.patch.source_id = id;
            ap.points = PointSet(size, size);
            for (const auto& p : img.centroids) {
                const double pr = std::floor(p.row);
                const double pc = std::floor(p.col);
                if (pr >= r0 && pr < r0 + size && pc >= c0 && pc < c0 + size) ap.points.add({p.row - r0, p.col - c0});
            }
            out.push_back(std::move(ap));
        }
    }
    return out;
}

Image normalize(const Image& image)
{
    if (image.size() == 0) return image;
    if (!image.isFinite().all()) throw DataError("normalize: image contains NaN or infinite values");
    const double lo = image.minCoeff();
    const double hi = image.maxCoeff();
    if (hi == lo) return Image::Zero(image.rows(), image.cols());
    return (image - lo) * (kHeatmapMax / (hi - lo));
}

namespace {

std::filesystem::path frame_image(const std::filesystem::path& dir, int index)
{
    for (const char* ext : {".png", ".tif", ".tiff"}) {
        auto p = dir / ("frame_" + std::to_string(index) + ext);
        if (std::filesystem::exists(p)) return p;
    }
    return dir / ("frame_" + std::to_string(index) + ".png");
}

struct CsvRow
{
    int line;
    Point point;
};

} // namespace

std::vector<AnnotatedImage> load_annotations(const std::filesystem::path& csv, const std::string& condition)
{
    std::istringstream is(io::read_text(csv));
    std::string line;
    if (!std::getline(is, line)) throw DataError(csv.string() + ": empty annotation file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "frame,row,col") throw DataError(csv.string() + ":1: expected header 'frame,row,col'");

    std::map<int, std::vector<CsvRow>> frames;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f, r, c, extra;
        const auto bad = [&](const std::string& why) {
            return DataError(csv.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (!std::getline(ls, f, ',') || !std::getline(ls, r, ',') || !std::getline(ls, c, ',') || std::getline(ls, extra))
            throw bad("expected 3 fields, got '" + line + "'");
        try {
            std::size_t used = 0;
            const int frame = std::stoi(f, &used);
            if (used != f.size() || frame < 0) throw std::invalid_argument("frame");
            const double row = std::stod(r, &used);
            if (used != r.size()) throw std::invalid_argument("row");
            const double col = std::stod(c, &used);
            if (used != c.size()) throw std::invalid_argument("col");
            if (!std::isfinite(row) || !std::isfinite(col)) throw std::invalid_argument("nan");
            frames[frame].push_back({lineno, {row, col}});
        } catch (const std::exception&) {
            throw bad("malformed row '" + line + "'");
        }
    }

    const auto dir = csv.parent_path();
    std::vector<AnnotatedImage> out;
    for (auto& [index, rows] : frames) {
        AnnotatedImage ai;
        ai.frame_index = index;
        ai.condition = condition;
        ai.image = normalize(io::read_image(frame_image(dir, index)));
        for (const auto& row : rows) {
            const auto& p = row.point;
            if (p.row < 0 || p.col < 0 || p.row >= static_cast<double>(ai.image.rows())
                || p.col >= static_cast<double>(ai.image.cols()))
                throw DataError(csv.string() + ":" + std::to_string(row.line) + ": centroid outside frame "
                                + std::to_string(index));
            ai.centroids.push_back(p);
        }
        out.push_back(std::move(ai));
    }
    return out;
}

std::vector<std::size_t> sample_labeled(const std::vector<AnnotatedPatch>& patches, std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < patches.size(); ++i)
        if (!patches[i].points.empty()) eligible.push_back(i);
    if (eligible.size() < n)
        throw DataError("sample_labeled: only " + std::to_string(eligible.size()) + " patches contain cells, "
                        + std::to_string(n) + " requested");
    Rng rng(substream_seed(seed, "labeled-sample"));
    for (std::size_t i = 0; i < n; ++i) std::swap(eligible[i], eligible[i + uniform_index(rng, eligible.size() - i)]);
    eligible.resize(n);
    std::sort(eligible.begin(), eligible.end());
    return eligible;
}

Dataset load_dataset(const std::filesystem::path& dir, Domain domain)
{
    if (!std::filesystem::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
    Dataset ds;
    if (std::filesystem::exists(dir / "annotations.csv") && !std::filesystem::exists(dir / "manifest.json")) {
        for (const auto& frame : load_annotations(dir / "annotations.csv", dir.filename().string())) {
            auto patches = extract_patches(frame, kDefaultPatchSize, kDefaultPatchSize, domain);
            for (auto& p : patches) ds.patches.push_back(std::move(p));
        }
        ds.has_truth = true;
        ds.manifest = {{"format", "annotations"}};
        return ds;
    }
    try {
        ds.manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
        const auto& entries = ds.manifest.at("patches");
        if (!entries.is_array()) throw DataError("manifest.json: 'patches' must be a list");
        ds.has_truth = !entries.empty();
        for (const auto& e : entries) {
            AnnotatedPatch ap;
            ap.patch.source_id = e.at("id").get<std::string>();
            ap.patch.domain = domain;
            ap.patch.pixels = io::read_image(dir / e.at("image").get<std::string>());
            ap.row0 = e.value("row0", 0);
            ap.col0 = e.value("col0", 0);
            const int h = ap.patch.height();
            const int w = ap.patch.width();
            if (e.contains("gt") && !e.at("gt").is_null())
                ap.points = io::read_points_csv(dir / e.at("gt").get<std::string>(), h, w);
            else {
                ap.points = PointSet(h, w);
                ds.has_truth = false;
            }
            ds.patches.push_back(std::move(ap));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(dir.string() + "/manifest.json: " + e.what());
    }
    return ds;
}

void save_dataset(const std::filesystem::path& dir, const std::vector<AnnotatedPatch>& patches,
                  const nlohmann::json& extra)
{
    std::filesystem::create_directories(dir / "images");
    std::filesystem::create_directories(dir / "gt");
    nlohmann::json manifest = extra;
    manifest["patches"] = nlohmann::json::array();
    for (std::size_t i = 0; i < patches.size(); ++i) {
        char stem[16];
        std::snprintf(stem, sizeof stem, "%05zu", i);
        const std::string image = std::string("images/") + stem + ".png";
        const std::string gt = std::string("gt/") + stem + ".csv";
        io::write_image_u8(dir / image, patches[i].patch.pixels);
        io::write_points_csv(dir / gt, patches[i].points);
        manifest["patches"].push_back({{"id", patches[i].patch.source_id},
                                       {"image", image},
                                       {"gt", gt},
                                       {"row0", patches[i].row0},
                                       {"col0", patches[i].col0}});
    }
    io::write_text_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

} // namespace celluda
