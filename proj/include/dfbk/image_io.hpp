#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dfbk/common.hpp"

namespace dfbk {

struct PngImage {
    int width = 0, height = 0, channels = 0;  // channels: 1 (gray) or 3 (rgb)
    std::vector<uint8_t> pixels;              // row-major, interleaved
};

// Minimal PNG codec (8-bit grayscale and RGB, no interlacing). The writer
// always emits filter-0 scanlines through zlib, so output bytes are a pure
// function of the pixel data.
void write_png(const std::filesystem::path& path, const PngImage& img);
PngImage read_png(const std::filesystem::path& path);

// [0,1] single-channel map quantized to 8 bits.
void write_png_gray(const std::filesystem::path& path, const FeatureMap& img);
FeatureMap read_png_gray(const std::filesystem::path& path);

}  // namespace dfbk
