#pragma once

namespace freqpriv {

// Axis-aligned box in image pixels, top-left anchored.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;
    int class_id = 0;
    double score = 0.0;  // predictions only

    double area() const { return w * h; }
    double cx() const { return x + 0.5 * w; }
    double cy() const { return y + 0.5 * h; }
};

}  // namespace freqpriv
