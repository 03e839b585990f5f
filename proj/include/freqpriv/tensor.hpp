#pragma once

#include <complex>
#include <string>
#include <vector>

#include "freqpriv/common.hpp"

namespace freqpriv {

// Real C x H x W activation tensor, row-major per channel.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          values(static_cast<size_t>(c) * h * w, fill) {
        if (c < 1 || h < 1 || w < 1) {
            throw ShapeError("FeatureMap dims must be >= 1, got " + shape_str());
        }
    }

    size_t size() const { return values.size(); }

    double& at(int c, int h, int w) {
        return values[(static_cast<size_t>(c) * height + h) * width + w];
    }
    double at(int c, int h, int w) const {
        return values[(static_cast<size_t>(c) * height + h) * width + w];
    }

    bool same_shape(const FeatureMap& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    std::string shape_str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" +
               std::to_string(width);
    }
};

// Complex frequency-domain counterpart of a FeatureMap.
struct Spectrum {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<std::complex<double>> values;

    Spectrum() = default;
    Spectrum(int c, int h, int w)
        : channels(c), height(h), width(w),
          values(static_cast<size_t>(c) * h * w, {0.0, 0.0}) {
        if (c < 1 || h < 1 || w < 1) {
            throw ShapeError("Spectrum dims must be >= 1");
        }
    }

    size_t size() const { return values.size(); }

    std::complex<double>& at(int c, int u, int v) {
        return values[(static_cast<size_t>(c) * height + u) * width + v];
    }
    std::complex<double> at(int c, int u, int v) const {
        return values[(static_cast<size_t>(c) * height + u) * width + v];
    }

    bool same_shape(const Spectrum& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }

    std::string shape_str() const {
        return std::to_string(channels) + "x" + std::to_string(height) + "x" +
               std::to_string(width);
    }
};

inline void require_same_shape(const FeatureMap& a, const FeatureMap& b,
                               const char* where) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() +
                         " vs " + b.shape_str());
    }
}

}  // namespace freqpriv
