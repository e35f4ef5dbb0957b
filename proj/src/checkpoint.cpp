#include <celluda/checkpoint.hpp>

#include <array>
#include <cstring>
#include <fstream>

namespace celluda {

namespace {

constexpr std::array<char, 8> kMagic{'C', 'E', 'L', 'L', 'C', 'K', 'P', 'T'};

template <class T>
void write_le(std::ostream& os, T v)
{
    std::array<char, sizeof(T)> buf;
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(buf.data(), buf.size());
}

template <class T>
T read_le(std::istream& is)
{
    std::array<unsigned char, sizeof(T)> buf{};
    is.read(reinterpret_cast<char*>(buf.data()), buf.size());
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void Checkpoint::save(const std::filesystem::path& path) const
{
    nlohmann::json header;
    header["kind"] = kind;
    header["fingerprint"] = fingerprint;
    header["scalar"] = "float32";
    header["meta"] = meta;
    header["params"] = nlohmann::json::array();
    for (const auto& b : params) header["params"].push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    const std::string text = header.dump();

    // Write beside the target and rename so a crash never leaves a torn file.
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw DataError("checkpoint: cannot write " + tmp.string());
        os.write(kMagic.data(), kMagic.size());
        write_le<std::uint32_t>(os, kVersion);
        write_le<std::uint64_t>(os, text.size());
        os.write(text.data(), static_cast<std::streamsize>(text.size()));
        for (const auto& b : params) {
            for (float f : b.values) {
                std::uint32_t bits;
                std::memcpy(&bits, &f, sizeof bits);
                write_le<std::uint32_t>(os, bits);
            }
        }
        if (!os) throw DataError("checkpoint: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path.string());
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kMagic) throw DataError("checkpoint: bad magic in " + path.string());
    const auto version = read_le<std::uint32_t>(is);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version) + " in " + path.string());
    const auto len = read_le<std::uint64_t>(is);
    if (!is || len > (1ULL << 30)) throw DataError("checkpoint: corrupt header in " + path.string());
    std::string text(len, '\0');
    is.read(text.data(), static_cast<std::streamsize>(len));
    if (!is) throw DataError("checkpoint: truncated header in " + path.string());

    Checkpoint ck;
    try {
        const auto header = nlohmann::json::parse(text);
        ck.kind = header.at("kind").get<std::string>();
        ck.fingerprint = header.at("fingerprint").get<std::string>();
        ck.meta = header.value("meta", nlohmann::json::object());
        for (const auto& p : header.at("params")) {
            Blob b{p.at("name").get<std::string>(), p.at("rows").get<long>(), p.at("cols").get<long>(), {}};
            ck.params.push_back(std::move(b));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError("checkpoint: malformed header in " + path.string() + ": " + e.what());
    }
    for (auto& b : ck.params) {
        b.values.resize(static_cast<std::size_t>(b.rows * b.cols));
        for (auto& f : b.values) {
            const auto bits = read_le<std::uint32_t>(is);
            std::memcpy(&f, &bits, sizeof f);
        }
    }
    if (!is) throw DataError("checkpoint: truncated parameter data in " + path.string());
    return ck;
}

} // namespace celluda
