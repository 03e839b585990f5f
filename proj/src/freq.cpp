#include "freqpriv/freq.hpp"

#include <cmath>

namespace freqpriv {

RadialWeight radial_weight(int h, int w, double lambda) {
    if (h < 1 || w < 1) throw ShapeError("radial_weight: dims must be >= 1");
    if (lambda < 0.0) throw ValidationError("radial_weight: lambda must be >= 0");
    RadialWeight rw;
    rw.height = h;
    rw.width = w;
    rw.lambda = lambda;
    rw.w.resize(static_cast<size_t>(h) * w);
    const double du_max = h / 2;  // max of min(u, h-u)
    const double dv_max = w / 2;
    const double d_max = std::sqrt(du_max * du_max + dv_max * dv_max);
    for (int u = 0; u < h; ++u) {
        const double du = std::min(u, h - u);
        for (int v = 0; v < w; ++v) {
            const double dv = std::min(v, w - v);
            const double d = std::sqrt(du * du + dv * dv);
            const double r = d_max > 0.0 ? d / d_max : 0.0;
            rw.w[static_cast<size_t>(u) * w + v] = 1.0 + lambda * r;
        }
    }
    return rw;
}

Spectrum apply_gate(const Spectrum& f, const SpectralGate& gate) {
    if (gate.channels != f.channels || gate.height != f.height ||
        gate.width != f.width) {
        throw ShapeError("apply_gate: spectrum dims " + f.shape_str() +
                         " do not match gate dims " + std::to_string(gate.channels) +
                         "x" + std::to_string(gate.height) + "x" +
                         std::to_string(gate.width));
    }
    Spectrum out(f.channels, f.height, f.width);
    for (size_t i = 0; i < f.size(); ++i) {
        out.values[i] = f.values[i] * sigmoid(gate.logits[i]);
    }
    return out;
}

FeatureMap fdaf_forward(const FeatureMap& input, const FdafBlock& block) {
    if (input.channels != block.channels || input.height != block.gate.height ||
        input.width != block.gate.width) {
        throw ShapeError("fdaf_forward: input dims " + input.shape_str() +
                         " do not match block reference dims");
    }
    const FeatureMap y_spa = idft2(apply_gate(dft2(input), block.gate));
    FeatureMap cat(2 * input.channels, input.height, input.width);
    std::copy(input.values.begin(), input.values.end(), cat.values.begin());
    std::copy(y_spa.values.begin(), y_spa.values.end(),
              cat.values.begin() + input.size());
    FeatureMap out = conv1x1(cat, block.fusion);
    for (size_t i = 0; i < out.size(); ++i) out.values[i] += input.values[i];
    return out;
}

Var fdaf_forward(Tape& t, Var input, Var gate_logits, Var fusion_w, Var fusion_b,
                 int channels) {
    const FeatureMap& iv = t.value(input);
    const Var gate3d = t.reshape(gate_logits, iv.channels, iv.height, iv.width);
    const CVar gated = t.apply_gate(t.dft2(input), gate3d);
    const Var y_spa = t.idft2(gated);
    const Var cat = t.concat_channels(input, y_spa);
    const Var mixed = t.conv1x1(cat, fusion_w, fusion_b, channels);
    return t.add(mixed, input);
}

std::vector<double> squared_bin_weights(int h, int w, double lambda) {
    const RadialWeight rw = radial_weight(h, w, lambda);
    std::vector<double> sq(rw.w.size());
    for (size_t i = 0; i < sq.size(); ++i) sq[i] = rw.w[i] * rw.w[i];
    return sq;
}

FreqLossResult freq_consistency_loss(const std::vector<FeatureMap>& predicted,
                                     const std::vector<FeatureMap>& target,
                                     double lambda) {
    if (predicted.size() != target.size()) {
        throw ShapeError("freq_consistency_loss: pair count mismatch");
    }
    if (predicted.empty()) return {0.0, true};

    const FeatureMap& first = predicted.front();
    const std::vector<double> sq = squared_bin_weights(first.height, first.width, lambda);
    const size_t plane = static_cast<size_t>(first.height) * first.width;

    double total = 0.0;
    for (size_t i = 0; i < predicted.size(); ++i) {
        require_same_shape(predicted[i], target[i], "freq_consistency_loss");
        require_same_shape(predicted[i], first, "freq_consistency_loss");
        const Spectrum fp = dft2(predicted[i]);
        const Spectrum ft = dft2(target[i]);
        for (int c = 0; c < fp.channels; ++c) {
            for (size_t b = 0; b < plane; ++b) {
                const auto d = fp.values[c * plane + b] - ft.values[c * plane + b];
                total += sq[b] * std::norm(d);
            }
        }
    }
    return {total / static_cast<double>(predicted.size()), false};
}

}  // namespace freqpriv
