#include <celluda/config.hpp>
#include <celluda/errors.hpp>
#include <celluda/io.hpp>

#include <charconv>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace celluda {

namespace {

std::string trim(std::string s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <class T>
T parse_number(const std::string& key, const std::string& v)
{
    T out{};
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc{} || p != end) throw UsageError("config key '" + key + "': cannot parse '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw UsageError("config key '" + key + "': expected true/false, got '" + v + "'");
}

std::string fmt(double v)
{
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

struct Field
{
    std::function<void(AdaptationConfig&, const std::string&)> set;
    std::function<std::string(const AdaptationConfig&)> get;
    std::string help;
};

#define CELLUDA_REAL(name, text)                                                                                    \
    {                                                                                                                 \
        #name, Field{[](AdaptationConfig& c, const std::string& v) { c.name = parse_number<double>(#name, v); },      \
                     [](const AdaptationConfig& c) { return fmt(c.name); }, text }                                  \
    }
#define CELLUDA_INT(name, text)                                                                                     \
    {                                                                                                                 \
        #name, Field{[](AdaptationConfig& c, const std::string& v) { c.name = parse_number<int>(#name, v); },         \
                     [](const AdaptationConfig& c) { return std::to_string(c.name); }, text }                       \
    }
#define CELLUDA_BOOL(name, text)                                                                                    \
    {                                                                                                                 \
        #name, Field{[](AdaptationConfig& c, const std::string& v) { c.name = parse_bool(#name, v); },               \
                     [](const AdaptationConfig& c) { return std::string(c.name ? "true" : "false"); }, text }       \
    }

const std::vector<std::pair<std::string, Field>>& fields()
{
    static const std::vector<std::pair<std::string, Field>> table = {
        CELLUDA_REAL(th_d, "peak threshold for pseudo-label regeneration (0..255)"),
        CELLUDA_REAL(th_u, "fraction of the remaining pool selected by uncertainty"),
        CELLUDA_INT(T, "Monte Carlo dropout passes"),
        CELLUDA_INT(N_c, "curriculum cap increment per iteration"),
        CELLUDA_REAL(dropout_rate, "discriminator dropout rate"),
        CELLUDA_INT(iterations, "adaptation iterations"),
        CELLUDA_REAL(sigma, "heatmap Gaussian width in pixels"),
        CELLUDA_INT(epochs, "detector epochs per training round"),
        CELLUDA_REAL(lr, "Adam learning rate"),
        CELLUDA_INT(patch, "patch edge length in pixels"),
        CELLUDA_REAL(match_threshold, "evaluation match gate in pixels"),
        CELLUDA_REAL(neg_min_dist, "minimum distance of added/shifted negative points"),
        {"seed", Field{[](AdaptationConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
                       [](const AdaptationConfig& c) { return std::to_string(c.seed); }, "root random seed"}},
        CELLUDA_INT(batch_size, "mini-batch size for both networks"),
        CELLUDA_INT(detector_width, "detector channels at the first level"),
        CELLUDA_INT(detector_levels, "detector resolution levels"),
        CELLUDA_INT(discriminator_width, "discriminator channels at the first stage"),
        CELLUDA_INT(disc_epochs, "discriminator epochs per training round"),
        CELLUDA_BOOL(warm_start, "continue from the previous iteration's weights"),
        CELLUDA_BOOL(use_curriculum, "apply the cell-count curriculum gate"),
        CELLUDA_INT(n_labeled, "labeled source patches sampled from annotated frames"),
        CELLUDA_INT(workers, "parallel inference workers"),
    };
    return table;
}

#undef CELLUDA_REAL
#undef CELLUDA_INT
#undef CELLUDA_BOOL

} // namespace

void AdaptationConfig::validate() const
{
    auto req = [](bool ok, const std::string& what) {
        if (!ok) throw UsageError("config: " + what);
    };
    req(th_d > 0.0 && th_d < 255.0, "th_d must be in (0, 255)");
    req(th_u > 0.0 && th_u <= 1.0, "th_u must be in (0, 1]");
    req(T >= 1, "T must be >= 1");
    req(N_c >= 0, "N_c must be >= 0");
    req(dropout_rate >= 0.0 && dropout_rate < 1.0, "dropout_rate must be in [0, 1)");
    req(iterations >= 0, "iterations must be >= 0");
    req(sigma > 0.0, "sigma must be positive");
    req(epochs >= 0 && disc_epochs >= 0, "epochs must be >= 0");
    req(lr > 0.0 && std::isfinite(lr), "lr must be positive");
    req(patch >= 8, "patch must be >= 8");
    req(match_threshold > 0.0, "match_threshold must be positive");
    req(neg_min_dist > 0.0, "neg_min_dist must be positive");
    req(batch_size >= 1, "batch_size must be >= 1");
    req(detector_width >= 1 && discriminator_width >= 1, "network widths must be >= 1");
    req(detector_levels >= 1 && detector_levels <= 8, "detector_levels must be in [1, 8]");
    req(patch % (1 << (detector_levels - 1)) == 0, "patch must be divisible by 2^(detector_levels-1)");
    req(n_labeled >= 1, "n_labeled must be >= 1");
    req(workers >= 1, "workers must be >= 1");
}

std::vector<ConfigEntry> config_schema()
{
    const AdaptationConfig defaults;
    std::vector<ConfigEntry> out;
    for (const auto& [key, f] : fields()) out.push_back({key, f.get(defaults), f.help});
    return out;
}

void set_config_value(AdaptationConfig& cfg, const std::string& key, const std::string& value)
{
    for (const auto& [k, f] : fields()) {
        if (k == key) {
            f.set(cfg, value);
            return;
        }
    }
    throw UsageError("unknown config key '" + key + "'");
}

AdaptationConfig parse_config(const std::string& text, const std::string& origin)
{
    AdaptationConfig cfg;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        try {
            if (eq == std::string::npos) throw UsageError("expected 'key = value'");
            set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const UsageError& e) {
            throw UsageError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

AdaptationConfig load_config(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
    return parse_config(io::read_text(path), path.string());
}

std::string dump_config(const AdaptationConfig& cfg)
{
    std::string out;
    for (const auto& [key, f] : fields()) out += key + " = " + f.get(cfg) + "\n";
    return out;
}

} // namespace celluda
