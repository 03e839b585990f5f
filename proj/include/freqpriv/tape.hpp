#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "freqpriv/dft.hpp"
#include "freqpriv/kernels.hpp"
#include "freqpriv/tensor.hpp"

namespace freqpriv {

// Handles into a Tape. Var tracks a real tensor, CVar a complex spectrum,
// SVar a scalar. Scalars and flat parameter vectors are stored as 1x1xN maps.
struct Var { int id = -1; };
struct CVar { int id = -1; };
struct SVar { int id = -1; };

// Ordered record of operation applications. Each op stores the forward result
// and pushes one reverse step; backward() replays the steps in reverse order,
// accumulating one gradient buffer per node.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    // When set, every op output is scanned and non-finite values raise
    // NumericError naming the op. Used by the gradcheck harness.
    bool check_finite = false;

    Var leaf(FeatureMap x);
    Var leaf_vector(std::vector<double> v);
    SVar scalar_const(double v);

    // Same data under new C x H x W dims; total size must match.
    Var reshape(Var x, int c, int h, int w);

    const FeatureMap& value(Var v) const { return node(v.id).r; }
    const Spectrum& value(CVar v) const { return node(v.id).c; }
    double value(SVar v) const { return node(v.id).r.values[0]; }

    const FeatureMap& grad(Var v) const { return node(v.id).gr; }
    const Spectrum& grad(CVar v) const { return node(v.id).gc; }

    CVar dft2(Var x);
    Var idft2(CVar f);
    // Elementwise product of the spectrum with sigmoid(logits); logits dims
    // must equal the spectrum dims.
    CVar apply_gate(CVar f, Var logits);

    // weight is a flat leaf of size out_ch*in_ch, bias of size out_ch.
    Var conv1x1(Var x, Var weight, Var bias, int out_ch);
    // weight is a flat leaf of size out_ch*in_ch*9, bias of size out_ch.
    Var conv3x3s2(Var x, Var weight, Var bias, int out_ch);

    Var bilinear_resize(Var x, int out_h, int out_w);
    Var window_resample(Var x, const SampleWindow& win, int out_h, int out_w);
    Var sigmoid(Var x);
    Var leaky_relu(Var x, double slope);
    Var add(Var a, Var b);
    Var concat_channels(Var a, Var b);

    // Scalar projections and reductions.
    SVar dot(Var x, std::vector<double> proj);
    SVar dot(CVar f, std::vector<double> proj_re, std::vector<double> proj_im);
    // sum over bins of bin_weight * |f - target|^2, bin_weight broadcast over
    // channels (size H*W).
    SVar weighted_spectral_sqdist(CVar f, const Spectrum& target,
                                  std::vector<double> bin_weight);
    SVar add(SVar a, SVar b);
    SVar scale(SVar a, double k);

    // Fused scalar op over one real tensor: the caller supplies the forward
    // value and a VJP that accumulates d(value)/d(x) * upstream into grad_x.
    SVar custom_scalar(Var x, double value, const char* name,
                       std::function<void(const FeatureMap& x_value, double upstream,
                                          FeatureMap& grad_x)> vjp);

    void backward(SVar loss);

private:
    struct Node {
        FeatureMap r;
        Spectrum c;
        bool is_complex = false;
        FeatureMap gr;
        Spectrum gc;
    };

    Node& node(int id) { return nodes_[id]; }
    const Node& node(int id) const { return nodes_[id]; }

    int push_real(FeatureMap v, const char* name);
    int push_complex(Spectrum v, const char* name);

    std::deque<Node> nodes_;
    std::vector<std::function<void()>> steps_;
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking
// ---------------------------------------------------------------------------

// A named flat group of values (an input tensor or a parameter vector).
struct GradGroup {
    std::string name;
    std::vector<double> values;
};

// Scalar function with an analytic gradient, both expressed over flat groups.
// The value callback must be evaluable at perturbed points; the gradient
// callback is evaluated once at the base point.
struct GradCheckProblem {
    std::function<double(const std::vector<std::vector<double>>&)> value;
    std::function<std::vector<std::vector<double>>(
        const std::vector<std::vector<double>>&)> gradient;
};

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_group;
    size_t worst_index = 0;
};

// Central-difference check: for every entry of every group, compares the
// analytic gradient against (f(x+eps) - f(x-eps)) / (2 eps) with relative
// error |ga - gfd| / max(1, |ga|, |gfd|).
GradCheckReport gradcheck(const GradCheckProblem& problem,
                          const std::vector<GradGroup>& base, double eps);

// Builds a GradCheckProblem from a function that assembles a scalar on a tape
// given one leaf per group.
using TapeScalarFn = std::function<SVar(Tape&, const std::vector<Var>&)>;
GradCheckProblem make_tape_problem(TapeScalarFn fn);

}  // namespace freqpriv
