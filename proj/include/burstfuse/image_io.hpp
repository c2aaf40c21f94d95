#pragma once

#include <string>

#include "burstfuse/image.hpp"

namespace burstfuse {

// All readers/writers throw IoError with a specific message on failure.

// 16-bit single-channel PNG. Rejects other bit depths and color types so
// raw loading can report "unsupported bit depth" distinctly.
ImageU16 read_png_gray16(const std::string& path);

// 8- or 16-bit RGB (or grayscale, replicated) PNG as linear [0, 1] floats.
RgbImage read_png_rgb(const std::string& path);

void write_png_rgb16(const std::string& path, const RgbImage& img);
void write_png_gray16(const std::string& path, const ImageU16& img);

// Clamps [0, 1] floats to 8-bit; used for diagnostic heatmaps.
void write_png_gray8(const std::string& path, const ImageF& img);

// Binary PGM (P5) with maxval 65535, most-significant byte first.
ImageU16 read_pgm16(const std::string& path);
void write_pgm16(const std::string& path, const ImageU16& img);

}  // namespace burstfuse
