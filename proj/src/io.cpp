#include <celluda/errors.hpp>
#include <celluda/io.hpp>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace celluda::io {

void write_text_atomic(const std::filesystem::path& path, const std::string& content)
{
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("cannot write " + tmp.string());
        os << content;
        if (!os) throw DataError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

void write_points_csv(const std::filesystem::path& path, const PointSet& points)
{
    std::ostringstream os;
    os.precision(17);
    os << "row,col\n";
    for (const auto& p : points) os << p.row << ',' << p.col << '\n';
    write_text_atomic(path, os.str());
}

PointSet read_points_csv(const std::filesystem::path& path, int height, int width)
{
    std::istringstream is(read_text(path));
    std::string line;
    if (!std::getline(is, line)) throw DataError(path.string() + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "row,col") throw DataError(path.string() + ":1: expected header 'row,col'");
    PointSet points(height, width);
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            std::size_t used = 0;
            const double r = std::stod(line.substr(0, comma), &used);
            const std::string rest = line.substr(comma + 1);
            const double c = std::stod(rest, &used);
            if (used != rest.size()) throw std::invalid_argument("trailing characters");
            points.add({r, c});
        } catch (const UsageError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": malformed row '" + line + "'");
        }
    }
    return points;
}

namespace {

constexpr std::array<char, 8> kHeatmapMagic{'C', 'E', 'L', 'L', 'H', 'M', 'A', 'P'};

template <class T>
void put(std::ostream& os, T v)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof v);
    os.write(reinterpret_cast<const char*>(b.data()), b.size());
}

template <class T>
T get(std::istream& is)
{
    std::array<unsigned char, sizeof(T)> b{};
    is.read(reinterpret_cast<char*>(b.data()), b.size());
    T v;
    std::memcpy(&v, b.data(), sizeof v);
    return v;
}

} // namespace

// The array format is written in host byte order; every supported target is
// little-endian.
void save_heatmap(const std::filesystem::path& path, const Heatmap& heatmap)
{
    std::ostringstream os(std::ios::binary);
    os.write(kHeatmapMagic.data(), kHeatmapMagic.size());
    put<std::uint32_t>(os, 1);
    put<std::int32_t>(os, heatmap.height());
    put<std::int32_t>(os, heatmap.width());
    put<double>(os, heatmap.sigma());
    const Image& v = heatmap.values();
    for (Eigen::Index i = 0; i < v.size(); ++i) put<double>(os, v.data()[i]);
    write_text_atomic(path, os.str());
}

Heatmap load_heatmap(const std::filesystem::path& path)
{
    std::istringstream is(read_text(path), std::ios::binary);
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kHeatmapMagic) throw DataError(path.string() + ": not a heatmap file");
    if (get<std::uint32_t>(is) != 1) throw DataError(path.string() + ": unsupported heatmap version");
    const auto h = get<std::int32_t>(is);
    const auto w = get<std::int32_t>(is);
    const double sigma = get<double>(is);
    if (!is || h <= 0 || w <= 0 || h > 65536 || w > 65536) throw DataError(path.string() + ": bad heatmap shape");
    Image v(h, w);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = get<double>(is);
    if (!is) throw DataError(path.string() + ": truncated heatmap");
    try {
        return Heatmap(std::move(v), sigma);
    } catch (const UsageError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void write_image_u8(const std::filesystem::path& path, const Image& image)
{
    cv::Mat m(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8UC1);
    for (int r = 0; r < m.rows; ++r) {
        auto* row = m.ptr<unsigned char>(r);
        for (int c = 0; c < m.cols; ++c)
            row[c] = static_cast<unsigned char>(std::lround(std::clamp(image(r, c), 0.0, 255.0)));
    }
    if (!cv::imwrite(path.string(), m)) throw DataError("cannot write image " + path.string());
}

void save_heatmap_png(const std::filesystem::path& path, const Heatmap& heatmap)
{
    write_image_u8(path, heatmap.values());
}

Image read_image(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw DataError("missing image file " + path.string());
    const cv::Mat m = cv::imread(path.string(), cv::IMREAD_GRAYSCALE | cv::IMREAD_ANYDEPTH);
    if (m.empty()) throw DataError("cannot decode image " + path.string());
    cv::Mat d;
    m.convertTo(d, CV_64F);
    Image out(d.rows, d.cols);
    for (int r = 0; r < d.rows; ++r) {
        const auto* row = d.ptr<double>(r);
        for (int c = 0; c < d.cols; ++c) out(r, c) = row[c];
    }
    return out;
}

} // namespace celluda::io
