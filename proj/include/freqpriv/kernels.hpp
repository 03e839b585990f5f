#pragma once

#include "freqpriv/tensor.hpp"

namespace freqpriv {

// 1x1 convolution parameters: per-position linear channel mix plus bias.
struct Conv1x1 {
    int out_ch = 0;
    int in_ch = 0;
    std::vector<double> weight;  // [out_ch][in_ch]
    std::vector<double> bias;    // [out_ch]

    Conv1x1() = default;
    Conv1x1(int co, int ci)
        : out_ch(co), in_ch(ci),
          weight(static_cast<size_t>(co) * ci, 0.0), bias(co, 0.0) {}
    double& w(int co, int ci) { return weight[static_cast<size_t>(co) * in_ch + ci]; }
    double w(int co, int ci) const { return weight[static_cast<size_t>(co) * in_ch + ci]; }
};

// 3x3 stride-2 convolution parameters (zero padding 1, cross-correlation).
struct Conv3x3 {
    int out_ch = 0;
    int in_ch = 0;
    std::vector<double> weight;  // [out_ch][in_ch][3][3]
    std::vector<double> bias;    // [out_ch]

    Conv3x3() = default;
    Conv3x3(int co, int ci)
        : out_ch(co), in_ch(ci),
          weight(static_cast<size_t>(co) * ci * 9, 0.0), bias(co, 0.0) {}
    double& w(int co, int ci, int ky, int kx) {
        return weight[((static_cast<size_t>(co) * in_ch + ci) * 3 + ky) * 3 + kx];
    }
    double w(int co, int ci, int ky, int kx) const {
        return weight[((static_cast<size_t>(co) * in_ch + ci) * 3 + ky) * 3 + kx];
    }
};

FeatureMap conv1x1(const FeatureMap& x, const Conv1x1& p);
void conv1x1_vjp(const FeatureMap& x, const Conv1x1& p, const FeatureMap& grad_out,
                 FeatureMap& grad_x, Conv1x1& grad_p);

// Output dims are ceil(H/2) x ceil(W/2); requires H,W >= 3.
FeatureMap conv3x3s2(const FeatureMap& x, const Conv3x3& p);
void conv3x3s2_vjp(const FeatureMap& x, const Conv3x3& p, const FeatureMap& grad_out,
                   FeatureMap& grad_x, Conv3x3& grad_p);

// Fractional source window for bilinear resampling, in source-cell units.
struct SampleWindow {
    double y0 = 0.0;
    double x0 = 0.0;
    double h = 0.0;
    double w = 0.0;
};

// Align-corners-false bilinear sampling of a (possibly fractional) window of x
// onto an out_h x out_w grid. Samples outside the map clamp to the edge.
FeatureMap window_resample(const FeatureMap& x, const SampleWindow& win,
                           int out_h, int out_w);
void window_resample_vjp(const FeatureMap& x, const SampleWindow& win,
                         int out_h, int out_w, const FeatureMap& grad_out,
                         FeatureMap& grad_x);

FeatureMap bilinear_resize(const FeatureMap& x, int out_h, int out_w);
void bilinear_resize_vjp(const FeatureMap& x, int out_h, int out_w,
                         const FeatureMap& grad_out, FeatureMap& grad_x);

double sigmoid(double t);
FeatureMap sigmoid(const FeatureMap& x);
void sigmoid_vjp(const FeatureMap& y_out, const FeatureMap& grad_out, FeatureMap& grad_x);

FeatureMap leaky_relu(const FeatureMap& x, double slope);
void leaky_relu_vjp(const FeatureMap& x, double slope, const FeatureMap& grad_out,
                    FeatureMap& grad_x);

}  // namespace freqpriv
