#include "burstfuse/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <vector>

#include "burstfuse/errors.hpp"

namespace burstfuse {
namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw IoError("cannot open '" + path + "'");
    return f;
}

struct PngReader {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngReader() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    }
};

struct PngWriter {
    png_structp png = nullptr;
    png_infop info = nullptr;
    ~PngWriter() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
    }
};

// Decodes into 8- or 16-bit rows; palette/alpha are normalized away.
struct DecodedPng {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    int channels = 0;
    std::vector<std::vector<png_byte>> rows;
};

DecodedPng decode_png(const std::string& path, bool expand_to_rgb) {
    FilePtr f = open_file(path, "rb");
    png_byte header[8];
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw IoError("'" + path + "' is not a PNG file");
    }

    PngReader r;
    r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!r.png) throw IoError("png read init failed for '" + path + "'");
    r.info = png_create_info_struct(r.png);
    if (!r.info) throw IoError("png info init failed for '" + path + "'");
    if (setjmp(png_jmpbuf(r.png))) throw IoError("png decode failed for '" + path + "'");

    png_init_io(r.png, f.get());
    png_set_sig_bytes(r.png, 8);
    png_read_info(r.png, r.info);

    png_set_palette_to_rgb(r.png);
    png_set_expand_gray_1_2_4_to_8(r.png);
    png_set_strip_alpha(r.png);
    if (expand_to_rgb) png_set_gray_to_rgb(r.png);
    png_read_update_info(r.png, r.info);

    DecodedPng out;
    out.width = static_cast<int>(png_get_image_width(r.png, r.info));
    out.height = static_cast<int>(png_get_image_height(r.png, r.info));
    out.bit_depth = png_get_bit_depth(r.png, r.info);
    out.channels = png_get_channels(r.png, r.info);

    const size_t row_bytes = png_get_rowbytes(r.png, r.info);
    out.rows.assign(out.height, std::vector<png_byte>(row_bytes));
    std::vector<png_bytep> row_ptrs(out.height);
    for (int y = 0; y < out.height; ++y) row_ptrs[y] = out.rows[y].data();
    png_read_image(r.png, row_ptrs.data());
    png_read_end(r.png, nullptr);
    return out;
}

uint16_t read_be16(const png_byte* p) {
    return static_cast<uint16_t>((p[0] << 8) | p[1]);
}

void encode_png(const std::string& path, int width, int height, int bit_depth, int color_type,
                const std::vector<png_bytep>& row_ptrs) {
    FilePtr f = open_file(path, "wb");
    PngWriter w;
    w.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!w.png) throw IoError("png write init failed for '" + path + "'");
    w.info = png_create_info_struct(w.png);
    if (!w.info) throw IoError("png info init failed for '" + path + "'");
    if (setjmp(png_jmpbuf(w.png))) throw IoError("png encode failed for '" + path + "'");

    png_init_io(w.png, f.get());
    png_set_IHDR(w.png, w.info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(w.png, w.info);
    png_write_image(w.png, const_cast<png_bytepp>(row_ptrs.data()));
    png_write_end(w.png, nullptr);
}

uint16_t to_u16(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<uint16_t>(std::lround(c * 65535.0f));
}

}  // namespace

ImageU16 read_png_gray16(const std::string& path) {
    const DecodedPng d = decode_png(path, /*expand_to_rgb=*/false);
    if (d.channels != 1) {
        throw IoError("'" + path + "' has " + std::to_string(d.channels) +
                      " channels; expected single-channel raw data");
    }
    if (d.bit_depth != 16) {
        throw IoError("unsupported bit depth " + std::to_string(d.bit_depth) + " in '" + path +
                      "' (raw frames must be 16-bit)");
    }
    ImageU16 img(d.width, d.height);
    for (int y = 0; y < d.height; ++y) {
        const png_byte* src = d.rows[y].data();
        uint16_t* dst = img.row(y);
        for (int x = 0; x < d.width; ++x) dst[x] = read_be16(src + 2 * x);
    }
    return img;
}

RgbImage read_png_rgb(const std::string& path) {
    const DecodedPng d = decode_png(path, /*expand_to_rgb=*/true);
    if (d.channels != 3) {
        throw IoError("'" + path + "' decoded to " + std::to_string(d.channels) +
                      " channels; expected RGB");
    }
    RgbImage img(d.width, d.height);
    const float scale = d.bit_depth == 16 ? 1.0f / 65535.0f : 1.0f / 255.0f;
    for (int y = 0; y < d.height; ++y) {
        const png_byte* src = d.rows[y].data();
        float* r = img.r.row(y);
        float* g = img.g.row(y);
        float* b = img.b.row(y);
        for (int x = 0; x < d.width; ++x) {
            if (d.bit_depth == 16) {
                r[x] = read_be16(src + 6 * x) * scale;
                g[x] = read_be16(src + 6 * x + 2) * scale;
                b[x] = read_be16(src + 6 * x + 4) * scale;
            } else {
                r[x] = src[3 * x] * scale;
                g[x] = src[3 * x + 1] * scale;
                b[x] = src[3 * x + 2] * scale;
            }
        }
    }
    return img;
}

void write_png_rgb16(const std::string& path, const RgbImage& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(static_cast<size_t>(w) * 6));
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y) {
        png_byte* dst = rows[y].data();
        const float* r = img.r.row(y);
        const float* g = img.g.row(y);
        const float* b = img.b.row(y);
        for (int x = 0; x < w; ++x) {
            const uint16_t vals[3] = {to_u16(r[x]), to_u16(g[x]), to_u16(b[x])};
            for (int c = 0; c < 3; ++c) {
                dst[6 * x + 2 * c] = static_cast<png_byte>(vals[c] >> 8);
                dst[6 * x + 2 * c + 1] = static_cast<png_byte>(vals[c] & 0xff);
            }
        }
        ptrs[y] = rows[y].data();
    }
    encode_png(path, w, h, 16, PNG_COLOR_TYPE_RGB, ptrs);
}

void write_png_gray16(const std::string& path, const ImageU16& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(static_cast<size_t>(w) * 2));
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y) {
        png_byte* dst = rows[y].data();
        const uint16_t* src = img.row(y);
        for (int x = 0; x < w; ++x) {
            dst[2 * x] = static_cast<png_byte>(src[x] >> 8);
            dst[2 * x + 1] = static_cast<png_byte>(src[x] & 0xff);
        }
        ptrs[y] = rows[y].data();
    }
    encode_png(path, w, h, 16, PNG_COLOR_TYPE_GRAY, ptrs);
}

void write_png_gray8(const std::string& path, const ImageF& img) {
    const int w = img.width();
    const int h = img.height();
    std::vector<std::vector<png_byte>> rows(h, std::vector<png_byte>(w));
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y) {
        const float* src = img.row(y);
        for (int x = 0; x < w; ++x) {
            rows[y][x] = static_cast<png_byte>(std::lround(std::clamp(src[x], 0.0f, 1.0f) * 255.0f));
        }
        ptrs[y] = rows[y].data();
    }
    encode_png(path, w, h, 8, PNG_COLOR_TYPE_GRAY, ptrs);
}

ImageU16 read_pgm16(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");

    auto next_token = [&f, &path]() -> std::string {
        std::string tok;
        // Skip whitespace and '#' comment lines, which the format allows
        // anywhere in the header.
        for (int c = f.get(); c != EOF; c = f.get()) {
            if (c == '#') {
                while (c != EOF && c != '\n') c = f.get();
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
        if (tok.empty()) throw IoError("truncated PGM header in '" + path + "'");
        return tok;
    };

    if (next_token() != "P5") throw IoError("'" + path + "' is not a binary PGM (P5) file");
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0) throw IoError("bad PGM dimensions in '" + path + "'");
    if (maxval != 65535) {
        throw IoError("unsupported bit depth (maxval " + std::to_string(maxval) + ") in '" + path +
                      "' (raw frames must be 16-bit)");
    }

    ImageU16 img(w, h);
    std::vector<char> buf(static_cast<size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        f.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        if (!f) throw IoError("truncated PGM pixel data in '" + path + "'");
        uint16_t* dst = img.row(y);
        for (int x = 0; x < w; ++x) {
            const auto hi = static_cast<unsigned char>(buf[2 * x]);
            const auto lo = static_cast<unsigned char>(buf[2 * x + 1]);
            dst[x] = static_cast<uint16_t>((hi << 8) | lo);
        }
    }
    return img;
}

void write_pgm16(const std::string& path, const ImageU16& img) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "P5\n" << img.width() << " " << img.height() << "\n65535\n";
    std::vector<char> buf(static_cast<size_t>(img.width()) * 2);
    for (int y = 0; y < img.height(); ++y) {
        const uint16_t* src = img.row(y);
        for (int x = 0; x < img.width(); ++x) {
            buf[2 * x] = static_cast<char>(src[x] >> 8);
            buf[2 * x + 1] = static_cast<char>(src[x] & 0xff);
        }
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!f) throw IoError("failed writing '" + path + "'");
}

}  // namespace burstfuse
