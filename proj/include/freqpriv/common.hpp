#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace freqpriv {

// Thrown when tensor/parameter dimensions do not line up.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on invalid user-facing input (configs, annotation files, boxes).
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a computation produces non-finite values or is numerically undefined.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on file I/O and serialization failures.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

inline bool all_finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace freqpriv
