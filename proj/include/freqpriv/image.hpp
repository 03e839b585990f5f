#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "freqpriv/tensor.hpp"

namespace freqpriv {

// 8-bit grayscale raster.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // row-major

    Raster() = default;
    Raster(int w, int h) : width(w), height(h), pixels(static_cast<size_t>(w) * h, 0) {}

    std::uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
};

std::string encode_pgm(const Raster& img);
std::string encode_ppm(const Raster& img);  // grayscale replicated across RGB
void write_pgm(const Raster& img, const std::string& path);
void write_ppm(const Raster& img, const std::string& path);
Raster read_pgm(const std::string& path);

// Zero-centered intensities ((p - 127.5) / 255) as a single-channel map.
FeatureMap to_feature_map(const Raster& img);

}  // namespace freqpriv
