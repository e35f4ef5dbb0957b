#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace celluda {

/// Parameters of the adaptation loop. Defaults follow the published setup;
/// the lower block sizes the networks and the data sampling.
struct AdaptationConfig
{
    double th_d = 100.0;
    double th_u = 0.1;
    int T = 10;
    int N_c = 1;
    double dropout_rate = 0.3;
    int iterations = 5;
    double sigma = 6.0;
    int epochs = 200;
    double lr = 1e-3;
    int patch = 128;
    double match_threshold = 10.0;
    double neg_min_dist = 15.0;
    std::uint64_t seed = 0;

    int batch_size = 16;
    int detector_width = 32;
    int detector_levels = 4;
    int discriminator_width = 64;
    int disc_epochs = 200;
    bool warm_start = true;
    bool use_curriculum = true;
    int n_labeled = 24;
    int workers = 1;

    void validate() const;
    friend bool operator==(const AdaptationConfig&, const AdaptationConfig&) = default;
};

struct ConfigEntry
{
    std::string key;
    std::string default_value;
    std::string help;
};

/// Every config key with its default rendering and a one-line description.
std::vector<ConfigEntry> config_schema();

/// Flat `key = value` lines; `#` starts a comment. Unknown keys and
/// malformed values throw UsageError naming the line.
AdaptationConfig parse_config(const std::string& text, const std::string& origin = "config");
AdaptationConfig load_config(const std::filesystem::path& path);
std::string dump_config(const AdaptationConfig& cfg);

/// Applies one `key=value` assignment.
void set_config_value(AdaptationConfig& cfg, const std::string& key, const std::string& value);

} // namespace celluda
