#pragma once

#include <celluda/errors.hpp>
#include <celluda/nn/tensor.hpp>

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace celluda {

/// Versioned model container:
///
///   bytes 0-7   magic "CELLCKPT"
///   bytes 8-11  format version (little-endian u32)
///   bytes 12-19 header length n (little-endian u64)
///   n bytes     JSON header {kind, fingerprint, scalar, params[{name,rows,cols}], meta}
///   remainder   float32 parameter values, row-major, in header order
struct Checkpoint
{
    static constexpr std::uint32_t kVersion = 1;

    struct Blob
    {
        std::string name;
        long rows = 0;
        long cols = 0;
        std::vector<float> values;
    };

    std::string kind;
    std::string fingerprint;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<Blob> params;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    template <class Params>
    void capture(const Params& ps)
    {
        params.clear();
        for (const auto* p : ps) {
            Blob b{p->name, static_cast<long>(p->value.rows()), static_cast<long>(p->value.cols()), {}};
            b.values.assign(p->value.data(), p->value.data() + p->value.size());
            params.push_back(std::move(b));
        }
    }

    template <class Params>
    void restore(const Params& ps) const
    {
        if (ps.size() != params.size())
            throw DataError("checkpoint: parameter count mismatch for " + fingerprint);
        for (std::size_t i = 0; i < ps.size(); ++i) {
            auto* p = ps[i];
            const Blob& b = params[i];
            if (b.name != p->name || b.rows != p->value.rows() || b.cols != p->value.cols())
                throw DataError("checkpoint: parameter '" + b.name + "' does not match '" + p->name + "'");
            for (long j = 0; j < b.rows * b.cols; ++j) p->value.data()[j] = b.values[static_cast<std::size_t>(j)];
        }
    }
};

} // namespace celluda
