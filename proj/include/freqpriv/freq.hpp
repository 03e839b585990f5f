#pragma once

#include "freqpriv/tape.hpp"

namespace freqpriv {

// Learnable per-bin gate logits; sigmoid(logits) is the soft mask multiplied
// into the spectrum. Dims are fixed at construction.
struct SpectralGate {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> logits;

    SpectralGate() = default;
    SpectralGate(int c, int h, int w, double init_logit)
        : channels(c), height(h), width(w),
          logits(static_cast<size_t>(c) * h * w, init_logit) {}
};

// Frequency-domain attention fusion block: gate + 2C->C fusion conv.
// Fusion weights start at zero so the block is an exact identity initially.
struct FdafBlock {
    int channels = 0;
    SpectralGate gate;
    Conv1x1 fusion;  // in_ch = 2*channels, out_ch = channels

    FdafBlock() = default;
    FdafBlock(int c, int h, int w, double gate_init_logit)
        : channels(c), gate(c, h, w, gate_init_logit), fusion(c, 2 * c) {}
};

// Static radial frequency weight w(u,v) = 1 + lambda * r(u,v) with r the
// wrap-aware bin distance normalized to [0,1] (DC -> 0).
struct RadialWeight {
    int height = 0;
    int width = 0;
    double lambda = 0.0;
    std::vector<double> w;  // H*W

    double at(int u, int v) const { return w[static_cast<size_t>(u) * width + v]; }
};

RadialWeight radial_weight(int h, int w, double lambda);

// F~_c(u,v) = F_c(u,v) * sigmoid(W_gate_c(u,v)); dims must match exactly.
Spectrum apply_gate(const Spectrum& f, const SpectralGate& gate);

// out = conv1x1(concat(i, idft2(apply_gate(dft2(i))))) + i
FeatureMap fdaf_forward(const FeatureMap& input, const FdafBlock& block);

// Same composition assembled on a tape. gate_logits/fusion_w/fusion_b are
// flat leaves (sizes C*H*W, C*2C, C).
Var fdaf_forward(Tape& t, Var input, Var gate_logits, Var fusion_w, Var fusion_b,
                 int channels);

struct FreqLossResult {
    double value = 0.0;
    bool no_targets = false;  // N == 0
};

// Eq-style weighted squared spectral distance, averaged over pairs:
//   L = (1/N) * sum_i sum_{c,u,v} | w(u,v) * (dft2(P_i) - dft2(T_i))_c(u,v) |^2
FreqLossResult freq_consistency_loss(const std::vector<FeatureMap>& predicted,
                                     const std::vector<FeatureMap>& target,
                                     double lambda);

// Squared radial weights per bin (the effective per-bin factor on |dF|^2),
// flattened H*W; shared by the loss and its on-tape counterpart.
std::vector<double> squared_bin_weights(int h, int w, double lambda);

}  // namespace freqpriv
