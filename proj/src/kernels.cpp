#include "freqpriv/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace freqpriv {

FeatureMap conv1x1(const FeatureMap& x, const Conv1x1& p) {
    if (p.in_ch != x.channels) {
        throw ShapeError("conv1x1: weight expects " + std::to_string(p.in_ch) +
                         " input channels, got " + std::to_string(x.channels));
    }
    FeatureMap out(p.out_ch, x.height, x.width);
    const int plane = x.height * x.width;
    for (int co = 0; co < p.out_ch; ++co) {
        double* o = out.values.data() + static_cast<size_t>(co) * plane;
        const double b = p.bias[co];
        for (int i = 0; i < plane; ++i) o[i] = b;
        for (int ci = 0; ci < p.in_ch; ++ci) {
            const double wv = p.w(co, ci);
            if (wv == 0.0) continue;
            const double* in = x.values.data() + static_cast<size_t>(ci) * plane;
            for (int i = 0; i < plane; ++i) o[i] += wv * in[i];
        }
    }
    return out;
}

void conv1x1_vjp(const FeatureMap& x, const Conv1x1& p, const FeatureMap& grad_out,
                 FeatureMap& grad_x, Conv1x1& grad_p) {
    const int plane = x.height * x.width;
    for (int co = 0; co < p.out_ch; ++co) {
        const double* go = grad_out.values.data() + static_cast<size_t>(co) * plane;
        double gb = 0.0;
        for (int i = 0; i < plane; ++i) gb += go[i];
        grad_p.bias[co] += gb;
        for (int ci = 0; ci < p.in_ch; ++ci) {
            const double* in = x.values.data() + static_cast<size_t>(ci) * plane;
            double* gx = grad_x.values.data() + static_cast<size_t>(ci) * plane;
            const double wv = p.w(co, ci);
            double gw = 0.0;
            for (int i = 0; i < plane; ++i) {
                gw += go[i] * in[i];
                gx[i] += wv * go[i];
            }
            grad_p.w(co, ci) += gw;
        }
    }
}

FeatureMap conv3x3s2(const FeatureMap& x, const Conv3x3& p) {
    if (p.in_ch != x.channels) {
        throw ShapeError("conv3x3s2: weight expects " + std::to_string(p.in_ch) +
                         " input channels, got " + std::to_string(x.channels));
    }
    if (x.height < 3 || x.width < 3) {
        throw ShapeError("conv3x3s2: input must be at least 3x3, got " + x.shape_str());
    }
    const int oh = (x.height + 1) / 2;
    const int ow = (x.width + 1) / 2;
    FeatureMap out(p.out_ch, oh, ow);
    for (int co = 0; co < p.out_ch; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = p.bias[co];
                for (int ci = 0; ci < p.in_ch; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= x.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= x.width) continue;
                            acc += p.w(co, ci, ky, kx) * x.at(ci, iy, ix);
                        }
                    }
                }
                out.at(co, oy, ox) = acc;
            }
        }
    }
    return out;
}

void conv3x3s2_vjp(const FeatureMap& x, const Conv3x3& p, const FeatureMap& grad_out,
                   FeatureMap& grad_x, Conv3x3& grad_p) {
    const int oh = grad_out.height;
    const int ow = grad_out.width;
    for (int co = 0; co < p.out_ch; ++co) {
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                const double go = grad_out.at(co, oy, ox);
                grad_p.bias[co] += go;
                for (int ci = 0; ci < p.in_ch; ++ci) {
                    for (int ky = 0; ky < 3; ++ky) {
                        const int iy = 2 * oy + ky - 1;
                        if (iy < 0 || iy >= x.height) continue;
                        for (int kx = 0; kx < 3; ++kx) {
                            const int ix = 2 * ox + kx - 1;
                            if (ix < 0 || ix >= x.width) continue;
                            grad_p.w(co, ci, ky, kx) += go * x.at(ci, iy, ix);
                            grad_x.at(ci, iy, ix) += go * p.w(co, ci, ky, kx);
                        }
                    }
                }
            }
        }
    }
}

namespace {

struct BilinearTap {
    int y0, y1, x0, x1;
    double w00, w01, w10, w11;
};

BilinearTap make_tap(double sy, double sx, int h, int w) {
    const double fy0 = std::floor(sy);
    const double fx0 = std::floor(sx);
    const double dy = sy - fy0;
    const double dx = sx - fx0;
    BilinearTap t;
    t.y0 = std::clamp(static_cast<int>(fy0), 0, h - 1);
    t.y1 = std::clamp(static_cast<int>(fy0) + 1, 0, h - 1);
    t.x0 = std::clamp(static_cast<int>(fx0), 0, w - 1);
    t.x1 = std::clamp(static_cast<int>(fx0) + 1, 0, w - 1);
    t.w00 = (1.0 - dy) * (1.0 - dx);
    t.w01 = (1.0 - dy) * dx;
    t.w10 = dy * (1.0 - dx);
    t.w11 = dy * dx;
    return t;
}

}  // namespace

FeatureMap window_resample(const FeatureMap& x, const SampleWindow& win,
                           int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("window_resample: output dims must be >= 1");
    FeatureMap out(x.channels, out_h, out_w);
    for (int oy = 0; oy < out_h; ++oy) {
        const double sy = win.y0 + (oy + 0.5) * win.h / out_h - 0.5;
        for (int ox = 0; ox < out_w; ++ox) {
            const double sx = win.x0 + (ox + 0.5) * win.w / out_w - 0.5;
            const BilinearTap t = make_tap(sy, sx, x.height, x.width);
            for (int c = 0; c < x.channels; ++c) {
                out.at(c, oy, ox) = t.w00 * x.at(c, t.y0, t.x0) +
                                    t.w01 * x.at(c, t.y0, t.x1) +
                                    t.w10 * x.at(c, t.y1, t.x0) +
                                    t.w11 * x.at(c, t.y1, t.x1);
            }
        }
    }
    return out;
}

void window_resample_vjp(const FeatureMap& x, const SampleWindow& win,
                         int out_h, int out_w, const FeatureMap& grad_out,
                         FeatureMap& grad_x) {
    for (int oy = 0; oy < out_h; ++oy) {
        const double sy = win.y0 + (oy + 0.5) * win.h / out_h - 0.5;
        for (int ox = 0; ox < out_w; ++ox) {
            const double sx = win.x0 + (ox + 0.5) * win.w / out_w - 0.5;
            const BilinearTap t = make_tap(sy, sx, x.height, x.width);
            for (int c = 0; c < x.channels; ++c) {
                const double g = grad_out.at(c, oy, ox);
                grad_x.at(c, t.y0, t.x0) += t.w00 * g;
                grad_x.at(c, t.y0, t.x1) += t.w01 * g;
                grad_x.at(c, t.y1, t.x0) += t.w10 * g;
                grad_x.at(c, t.y1, t.x1) += t.w11 * g;
            }
        }
    }
}

FeatureMap bilinear_resize(const FeatureMap& x, int out_h, int out_w) {
    return window_resample(x, {0.0, 0.0, static_cast<double>(x.height),
                               static_cast<double>(x.width)}, out_h, out_w);
}

void bilinear_resize_vjp(const FeatureMap& x, int out_h, int out_w,
                         const FeatureMap& grad_out, FeatureMap& grad_x) {
    window_resample_vjp(x, {0.0, 0.0, static_cast<double>(x.height),
                            static_cast<double>(x.width)}, out_h, out_w, grad_out, grad_x);
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

FeatureMap sigmoid(const FeatureMap& x) {
    FeatureMap out(x.channels, x.height, x.width);
    for (size_t i = 0; i < x.size(); ++i) out.values[i] = sigmoid(x.values[i]);
    return out;
}

void sigmoid_vjp(const FeatureMap& y_out, const FeatureMap& grad_out, FeatureMap& grad_x) {
    for (size_t i = 0; i < y_out.size(); ++i) {
        const double s = y_out.values[i];
        grad_x.values[i] += grad_out.values[i] * s * (1.0 - s);
    }
}

FeatureMap leaky_relu(const FeatureMap& x, double slope) {
    FeatureMap out(x.channels, x.height, x.width);
    for (size_t i = 0; i < x.size(); ++i) {
        const double v = x.values[i];
        out.values[i] = v >= 0.0 ? v : slope * v;
    }
    return out;
}

void leaky_relu_vjp(const FeatureMap& x, double slope, const FeatureMap& grad_out,
                    FeatureMap& grad_x) {
    for (size_t i = 0; i < x.size(); ++i) {
        grad_x.values[i] += grad_out.values[i] * (x.values[i] >= 0.0 ? 1.0 : slope);
    }
}

}  // namespace freqpriv
