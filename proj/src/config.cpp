#include "burstfuse/config.hpp"

#include <cctype>
#include <fstream>
#include <functional>
#include <map>

#include "burstfuse/errors.hpp"

namespace burstfuse {
namespace {

std::string trim(const std::string& s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

long parse_long(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' needs an integer, got '" + value + "'");
    }
}

double parse_double(const std::string& key, const std::string& value) {
    try {
        size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw UsageError("config key '" + key + "' needs a number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "on") return true;
    if (value == "0" || value == "false" || value == "off") return false;
    throw UsageError("config key '" + key + "' needs a boolean (0/1/true/false), got '" + value +
                     "'");
}

}  // namespace

void apply_config_file(const std::string& path, MergeConfig& cfg, std::string& simd) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file '" + path + "'");

    using Setter = std::function<void(const std::string&, const std::string&)>;
    const std::map<std::string, Setter> setters = {
        {"threads",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 0) throw UsageError("threads must be >= 0");
             cfg.threads = static_cast<int>(n);
         }},
        {"simd", [&](const std::string&, const std::string& v) { simd = v; }},
        {"zoom",
         [&](const std::string& k, const std::string& v) {
             const double z = parse_double(k, v);
             if (z < 1.0 || z > 3.0) throw UsageError("zoom must be in [1, 3]");
             cfg.zoom = z;
         }},
        {"base_index",
         [&](const std::string& k, const std::string& v) {
             cfg.base_index = static_cast<int>(parse_long(k, v));
         }},
        {"frame_cap",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 1) throw UsageError("frame_cap must be >= 1");
             cfg.frame_cap = static_cast<int>(n);
         }},
        {"robustness",
         [&](const std::string& k, const std::string& v) { cfg.robustness = parse_bool(k, v); }},
        {"loss_threshold",
         [&](const std::string& k, const std::string& v) {
             const double t = parse_double(k, v);
             if (t < 0.0 || t > 1.0) throw UsageError("loss_threshold must be in [0, 1]");
             cfg.loss_threshold = t;
         }},
        {"tile_size",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n != 0 && (n < 8 || n % 2 != 0)) {
                 throw UsageError("tile_size must be 0 (auto) or an even value >= 8");
             }
             cfg.tile_size_override = static_cast<int>(n);
         }},
        {"search_radius",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 1 || n > 64) throw UsageError("search_radius must be in [1, 64]");
             cfg.align.search_radius = static_cast<int>(n);
         }},
        {"pyramid_levels",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 0 || n > 8) throw UsageError("pyramid_levels must be in [0, 8]");
             cfg.align.levels = static_cast<int>(n);
         }},
        {"lk_iters",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 0 || n > 32) throw UsageError("lk_iters must be in [0, 32]");
             cfg.align.lk_iters = static_cast<int>(n);
         }},
        {"snr",
         [&](const std::string& k, const std::string& v) {
             cfg.snr_override = parse_double(k, v);
         }},
        {"mc_bins",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 1 || n > 4096) throw UsageError("mc_bins must be in [1, 4096]");
             cfg.mc.bins = static_cast<int>(n);
         }},
        {"mc_samples",
         [&](const std::string& k, const std::string& v) {
             const long n = parse_long(k, v);
             if (n < 1) throw UsageError("mc_samples must be >= 1");
             cfg.mc.samples_per_bin = n;
         }},
        {"mc_seed",
         [&](const std::string& k, const std::string& v) {
             cfg.mc.seed = static_cast<uint64_t>(parse_long(k, v));
         }},
        {"cache_dir", [&](const std::string&, const std::string& v) { cfg.cache_dir = v; }},
        {"finish",
         [&](const std::string& k, const std::string& v) { cfg.finish = parse_bool(k, v); }},
        {"finish_sigma",
         [&](const std::string& k, const std::string& v) {
             const double s = parse_double(k, v);
             if (s <= 0.0) throw UsageError("finish_sigma must be > 0");
             cfg.finish_sigma = s;
         }},
        {"finish_amount",
         [&](const std::string& k, const std::string& v) {
             cfg.finish_amount = parse_double(k, v);
         }},
    };

    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config file '" + path + "' line " + std::to_string(lineno) +
                             ": expected key=value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end()) {
            throw UsageError("unknown config key '" + key + "' in '" + path + "'");
        }
        it->second(key, value);
    }
}

}  // namespace burstfuse
