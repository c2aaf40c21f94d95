#include "burstfuse/raw.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "burstfuse/errors.hpp"
#include "burstfuse/image_io.hpp"
#include "burstfuse/simd/kernels.hpp"

namespace fs = std::filesystem;

namespace burstfuse {
namespace {

std::string trim(const std::string& s) {
    size_t a = 0;
    size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::map<std::string, std::string> parse_sidecar(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open sidecar '" + path + "'");
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(f, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw IoError("malformed sidecar line '" + line + "' in '" + path + "'");
        }
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::string require_field(const std::map<std::string, std::string>& kv, const std::string& key,
                          const std::string& path) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw IoError("missing sidecar field '" + key + "' in '" + path + "'");
    return it->second;
}

double require_number(const std::map<std::string, std::string>& kv, const std::string& key,
                      const std::string& path) {
    const std::string raw = require_field(kv, key, path);
    try {
        size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument(raw);
        return v;
    } catch (const std::exception&) {
        throw IoError("sidecar field '" + key + "' in '" + path + "' is not a number: '" + raw +
                      "'");
    }
}

bool has_suffix(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

ImageU16 read_raw_image(const std::string& path) {
    if (has_suffix(path, ".pgm")) return read_pgm16(path);
    if (has_suffix(path, ".png")) return read_png_gray16(path);
    throw IoError("unsupported raw image extension for '" + path + "' (expected .pgm or .png)");
}

}  // namespace

void validate_burst(const Burst& burst) {
    if (burst.frames.empty()) throw InvariantError("burst has no frames");
    const int w = burst.width();
    const int h = burst.height();
    if (w <= 0 || h <= 0 || (w % 2) != 0 || (h % 2) != 0) {
        throw InvariantError("burst frames must have positive even dimensions, got " +
                             std::to_string(w) + "x" + std::to_string(h));
    }
    for (const BayerFrame& f : burst.frames) {
        if (f.width() != w || f.height() != h) {
            throw InvariantError("burst frames disagree on dimensions (" + std::to_string(w) + "x" +
                                 std::to_string(h) + " vs " + std::to_string(f.width()) + "x" +
                                 std::to_string(f.height()) + ")");
        }
    }
}

BayerFrame load_bayer_frame(const std::string& image_path, const std::string& sidecar_path,
                            NoiseParams* noise_out) {
    const ImageU16 raw = read_raw_image(image_path);
    if ((raw.width() % 2) != 0 || (raw.height() % 2) != 0) {
        throw InvariantError("odd dimensions " + std::to_string(raw.width()) + "x" +
                             std::to_string(raw.height()) + " in '" + image_path +
                             "' (mosaic frames must be even-sized)");
    }

    const auto kv = parse_sidecar(sidecar_path);
    const std::string pattern = require_field(kv, "pattern", sidecar_path);
    if (pattern != "RGGB") {
        throw InvariantError("unsupported CFA pattern '" + pattern + "' in '" + sidecar_path +
                             "' (only RGGB)");
    }
    const double black = require_number(kv, "black", sidecar_path);
    const double white = require_number(kv, "white", sidecar_path);
    if (!(white > black)) {
        throw InvariantError("sidecar '" + sidecar_path + "' needs white > black");
    }
    NoiseParams noise;
    noise.slope = require_number(kv, "noise_slope", sidecar_path);
    noise.intercept = require_number(kv, "noise_intercept", sidecar_path);
    if (noise.slope < 0.0 || noise.intercept < 0.0) {
        throw InvariantError("sidecar '" + sidecar_path + "' has negative noise coefficients");
    }
    if (noise_out) *noise_out = noise;

    BayerFrame frame;
    frame.data.reset(raw.width(), raw.height());
    const double scale = 1.0 / (white - black);
    for (int y = 0; y < raw.height(); ++y) {
        const uint16_t* src = raw.row(y);
        float* dst = frame.data.row(y);
        for (int x = 0; x < raw.width(); ++x) {
            const double v = (static_cast<double>(src[x]) - black) * scale;
            dst[x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return frame;
}

void write_bayer_frame(const std::string& image_path, const std::string& sidecar_path,
                       const BayerFrame& frame, const NoiseParams& noise) {
    ImageU16 raw(frame.width(), frame.height());
    for (int y = 0; y < frame.height(); ++y) {
        const float* src = frame.data.row(y);
        uint16_t* dst = raw.row(y);
        for (int x = 0; x < frame.width(); ++x) {
            dst[x] = static_cast<uint16_t>(std::lround(std::clamp(src[x], 0.0f, 1.0f) * 65535.0f));
        }
    }
    if (has_suffix(image_path, ".pgm")) {
        write_pgm16(image_path, raw);
    } else if (has_suffix(image_path, ".png")) {
        write_png_gray16(image_path, raw);
    } else {
        throw IoError("unsupported raw image extension for '" + image_path + "'");
    }

    std::ofstream f(sidecar_path);
    if (!f) throw IoError("cannot open '" + sidecar_path + "' for writing");
    f << "pattern=RGGB\n"
      << "black=0\n"
      << "white=65535\n"
      << "noise_slope=" << noise.slope << "\n"
      << "noise_intercept=" << noise.intercept << "\n";
}

Burst load_burst_dir(const std::string& dir, int max_frames) {
    if (!fs::is_directory(dir)) throw IoError("burst directory '" + dir + "' does not exist");

    Burst burst;
    const std::string shared_sidecar = (fs::path(dir) / "burst.txt").string();
    const bool have_shared = fs::exists(shared_sidecar);

    for (int i = 0; max_frames <= 0 || i < max_frames; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%03d", i);
        const fs::path base = fs::path(dir) / name;
        std::string image_path;
        if (fs::exists(base.string() + ".pgm")) {
            image_path = base.string() + ".pgm";
        } else if (fs::exists(base.string() + ".png")) {
            image_path = base.string() + ".png";
        } else {
            break;
        }
        std::string sidecar = base.string() + ".txt";
        if (!fs::exists(sidecar)) {
            if (!have_shared) {
                throw IoError("no sidecar for '" + image_path + "' (expected " + sidecar +
                              " or burst.txt)");
            }
            sidecar = shared_sidecar;
        }
        NoiseParams noise;
        burst.frames.push_back(load_bayer_frame(image_path, sidecar, &noise));
        if (burst.frames.size() == 1) burst.noise = noise;
    }
    if (burst.frames.empty()) {
        throw IoError("no frames (frame_000.pgm/.png ...) found in '" + dir + "'");
    }
    validate_burst(burst);
    return burst;
}

ImageF decimate_luma(const BayerFrame& frame) {
    ImageF luma(frame.width() / 2, frame.height() / 2);
    simd::active_kernels().box_down2(frame.data.data(), frame.width(), frame.height(), luma.data());
    return luma;
}

ImageF dense_luma(const BayerFrame& frame) {
    const int w = frame.width();
    const int h = frame.height();
    ImageF luma(w, h);
    for (int y = 0; y < h - 1; ++y) {
        const float* r0 = frame.data.row(y);
        const float* r1 = frame.data.row(y + 1);
        float* out = luma.row(y);
        for (int x = 0; x < w - 1; ++x) {
            out[x] = 0.25f * (r0[x] + r0[x + 1] + r1[x] + r1[x + 1]);
        }
        out[w - 1] = out[w - 2];  // no full quad at the border; repeat the last
    }
    std::copy_n(luma.row(h - 2), w, luma.row(h - 1));
    return luma;
}

RgbImage compute_guide(const BayerFrame& frame) {
    const int hw = frame.width() / 2;
    const int hh = frame.height() / 2;
    RgbImage guide(hw, hh);
    for (int j = 0; j < hh; ++j) {
        const float* r0 = frame.data.row(2 * j);
        const float* r1 = frame.data.row(2 * j + 1);
        float* gr = guide.r.row(j);
        float* gg = guide.g.row(j);
        float* gb = guide.b.row(j);
        for (int i = 0; i < hw; ++i) {
            gr[i] = r0[2 * i];
            gg[i] = 0.5f * (r0[2 * i + 1] + r1[2 * i]);
            gb[i] = r1[2 * i + 1];
        }
    }
    return guide;
}

RgbImage demosaic_bilinear(const BayerFrame& frame) {
    const int w = frame.width();
    const int h = frame.height();
    const ImageF& m = frame.data;
    RgbImage out(w, h);

    auto cross4 = [&m](int x, int y) {
        return 0.25f * (m.at_clamped(x - 1, y) + m.at_clamped(x + 1, y) + m.at_clamped(x, y - 1) +
                        m.at_clamped(x, y + 1));
    };
    auto diag4 = [&m](int x, int y) {
        return 0.25f * (m.at_clamped(x - 1, y - 1) + m.at_clamped(x + 1, y - 1) +
                        m.at_clamped(x - 1, y + 1) + m.at_clamped(x + 1, y + 1));
    };
    auto horiz2 = [&m](int x, int y) {
        return 0.5f * (m.at_clamped(x - 1, y) + m.at_clamped(x + 1, y));
    };
    auto vert2 = [&m](int x, int y) {
        return 0.5f * (m.at_clamped(x, y - 1) + m.at_clamped(x, y + 1));
    };

    for (int y = 0; y < h; ++y) {
        float* r = out.r.row(y);
        float* g = out.g.row(y);
        float* b = out.b.row(y);
        const float* v = m.row(y);
        const bool odd_y = (y & 1) != 0;
        for (int x = 0; x < w; ++x) {
            const bool odd_x = (x & 1) != 0;
            if (!odd_y && !odd_x) {  // R site
                r[x] = v[x];
                g[x] = cross4(x, y);
                b[x] = diag4(x, y);
            } else if (!odd_y && odd_x) {  // G on red row
                g[x] = v[x];
                r[x] = horiz2(x, y);
                b[x] = vert2(x, y);
            } else if (odd_y && !odd_x) {  // G on blue row
                g[x] = v[x];
                r[x] = vert2(x, y);
                b[x] = horiz2(x, y);
            } else {  // B site
                b[x] = v[x];
                g[x] = cross4(x, y);
                r[x] = diag4(x, y);
            }
        }
    }
    return out;
}

BayerFrame mosaic_from_rgb(const RgbImage& rgb) {
    const int w = rgb.width();
    const int h = rgb.height();
    if ((w % 2) != 0 || (h % 2) != 0) {
        throw InvariantError("mosaic source must have even dimensions, got " + std::to_string(w) +
                             "x" + std::to_string(h));
    }
    BayerFrame frame;
    frame.data.reset(w, h);
    for (int y = 0; y < h; ++y) {
        float* dst = frame.data.row(y);
        const float* r = rgb.r.row(y);
        const float* g = rgb.g.row(y);
        const float* b = rgb.b.row(y);
        for (int x = 0; x < w; ++x) {
            switch (cfa_channel(x, y)) {
                case CfaChannel::red: dst[x] = r[x]; break;
                case CfaChannel::green: dst[x] = g[x]; break;
                case CfaChannel::blue: dst[x] = b[x]; break;
            }
        }
    }
    return frame;
}

}  // namespace burstfuse
