#include "burstfuse/synth.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "burstfuse/errors.hpp"

namespace burstfuse {
namespace {

// Distinct per-frame RNG streams from one user seed.
uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::vector<Vec2f> generate_burst_offsets(int frames, double sigma, uint64_t seed) {
    if (frames < 1) throw InvariantError("burst needs at least one frame");
    std::vector<Vec2f> offsets;
    offsets.reserve(frames);
    offsets.emplace_back(0.0f, 0.0f);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (int k = 1; k < frames; ++k) {
        const double dx = dist(rng);
        const double dy = dist(rng);
        offsets.emplace_back(static_cast<float>(dx), static_cast<float>(dy));
    }
    return offsets;
}

RgbImage shift_rgb_nn(const RgbImage& src, Vec2f offset) {
    const int w = src.width();
    const int h = src.height();
    const int sx = round_to_int(offset.x);
    const int sy = round_to_int(offset.y);
    RgbImage out(w, h);
    for (int c = 0; c < 3; ++c) {
        const ImageF& sp = src.plane(c);
        ImageF& dp = out.plane(c);
        for (int y = 0; y < h; ++y) {
            float* dst = dp.row(y);
            for (int x = 0; x < w; ++x) {
                dst[x] = sp.at_clamped(x - sx, y - sy);
            }
        }
    }
    return out;
}

Burst synthesize_burst(const RgbImage& truth, const std::vector<Vec2f>& offsets,
                       const NoiseParams& noise, uint64_t seed) {
    if (offsets.empty()) throw InvariantError("need at least one offset");
    Burst burst;
    burst.noise = noise;
    burst.frames.reserve(offsets.size());
    const bool noisy = noise.slope > 0.0 || noise.intercept > 0.0;
    for (size_t k = 0; k < offsets.size(); ++k) {
        BayerFrame frame = mosaic_from_rgb(shift_rgb_nn(truth, offsets[k]));
        if (noisy) {
            std::mt19937_64 rng(mix_seed(seed, k));
            std::normal_distribution<double> unit(0.0, 1.0);
            for (int y = 0; y < frame.height(); ++y) {
                float* row = frame.data.row(y);
                for (int x = 0; x < frame.width(); ++x) {
                    const double var = noise.slope * row[x] + noise.intercept;
                    const double v = row[x] + unit(rng) * std::sqrt(std::max(0.0, var));
                    row[x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
                }
            }
        }
        burst.frames.push_back(std::move(frame));
    }
    validate_burst(burst);
    return burst;
}

std::vector<AlignmentField> oracle_fields(const std::vector<Vec2f>& offsets, int width, int height,
                                          int tile_size) {
    std::vector<AlignmentField> fields;
    fields.reserve(offsets.size());
    for (const Vec2f& off : offsets) {
        AlignmentField f = AlignmentField::zeros(width, height, tile_size);
        for (Vec2f& v : f.vec) v = off;
        fields.push_back(std::move(f));
    }
    return fields;
}

AlignmentField corrupt_tile_replace(const AlignmentField& field, double fraction, uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) {
        throw InvariantError("tile replacement fraction must be in [0, 1]");
    }
    const size_t tiles = field.vec.size();
    const size_t replace = static_cast<size_t>(std::lround(fraction * static_cast<double>(tiles)));
    AlignmentField out = field;
    if (replace == 0 || tiles < 2) return out;

    std::mt19937_64 rng(seed);
    // Partial Fisher-Yates: the first `replace` entries are a uniform draw of
    // distinct tile indices.
    std::vector<size_t> idx(tiles);
    for (size_t i = 0; i < tiles; ++i) idx[i] = i;
    for (size_t i = 0; i < replace; ++i) {
        std::uniform_int_distribution<size_t> pick(i, tiles - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    for (size_t i = 0; i < replace; ++i) {
        const size_t target = idx[i];
        std::uniform_int_distribution<size_t> pick(0, tiles - 2);
        size_t source = pick(rng);
        if (source >= target) ++source;
        out.vec[target] = field.vec[source];  // copy from the uncorrupted field
    }
    return out;
}

AlignmentField corrupt_vector_noise(const AlignmentField& field, double sigma, uint64_t seed) {
    if (sigma < 0.0) throw InvariantError("vector noise sigma must be non-negative");
    AlignmentField out = field;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (Vec2f& v : out.vec) {
        v.x += static_cast<float>(dist(rng));
        v.y += static_cast<float>(dist(rng));
    }
    return out;
}

void write_offsets_csv(const std::string& path, const std::vector<Vec2f>& offsets) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "frame,dx,dy\n";
    for (size_t k = 0; k < offsets.size(); ++k) {
        f << k << "," << offsets[k].x << "," << offsets[k].y << "\n";
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

std::vector<Vec2f> read_offsets_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open offsets csv '" + path + "'");
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty offsets csv '" + path + "'");
    std::vector<Vec2f> offsets;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        try {
            std::getline(ss, cell, ',');
            const long frame = std::stol(cell);
            std::getline(ss, cell, ',');
            const float dx = std::stof(cell);
            if (!std::getline(ss, cell, ',')) throw std::invalid_argument(line);
            const float dy = std::stof(cell);
            if (frame != static_cast<long>(offsets.size())) {
                throw std::invalid_argument("frame order");
            }
            offsets.emplace_back(dx, dy);
        } catch (const std::exception&) {
            throw IoError("malformed offsets csv row '" + line + "' in '" + path + "'");
        }
    }
    if (offsets.empty()) throw IoError("offsets csv '" + path + "' has no rows");
    return offsets;
}

}  // namespace burstfuse
