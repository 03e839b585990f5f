#include "freqpriv/tape.hpp"

#include <cmath>

namespace freqpriv {

namespace {

void check_values(const std::vector<double>& v, const char* op) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

void check_values(const std::vector<std::complex<double>>& v, const char* op) {
    for (const auto& x : v) {
        if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
            throw NumericError(std::string(op) + " produced a non-finite value");
        }
    }
}

}  // namespace

int Tape::push_real(FeatureMap v, const char* name) {
    if (check_finite) check_values(v.values, name);
    Node n;
    n.gr = FeatureMap(v.channels, v.height, v.width, 0.0);
    n.r = std::move(v);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

int Tape::push_complex(Spectrum v, const char* name) {
    if (check_finite) check_values(v.values, name);
    Node n;
    n.is_complex = true;
    n.gc = Spectrum(v.channels, v.height, v.width);
    n.c = std::move(v);
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

Var Tape::leaf(FeatureMap x) { return {push_real(std::move(x), "leaf")}; }

Var Tape::leaf_vector(std::vector<double> v) {
    FeatureMap m(1, 1, static_cast<int>(v.size()));
    m.values = std::move(v);
    return {push_real(std::move(m), "leaf")};
}

SVar Tape::scalar_const(double v) {
    return {push_real(FeatureMap(1, 1, 1, v), "const")};
}

Var Tape::reshape(Var x, int c, int h, int w) {
    const FeatureMap& xv = node(x.id).r;
    if (static_cast<size_t>(c) * h * w != xv.size()) {
        throw ShapeError("reshape: size mismatch for " + xv.shape_str());
    }
    FeatureMap out(c, h, w);
    out.values = xv.values;
    const int oid = push_real(std::move(out), "reshape");
    steps_.push_back([this, x, oid] {
        const auto& go = node(oid).gr.values;
        auto& gx = node(x.id).gr.values;
        for (size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    });
    return {oid};
}

CVar Tape::dft2(Var x) {
    const int out = push_complex(freqpriv::dft2(node(x.id).r), "dft2");
    steps_.push_back([this, x, out] {
        const FeatureMap gx = dft2_vjp(node(out).gc);
        auto& acc = node(x.id).gr.values;
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += gx.values[i];
    });
    return {out};
}

Var Tape::idft2(CVar f) {
    const int out = push_real(freqpriv::idft2(node(f.id).c), "idft2");
    steps_.push_back([this, f, out] {
        const Spectrum gf = idft2_vjp(node(out).gr);
        auto& acc = node(f.id).gc.values;
        for (size_t i = 0; i < acc.size(); ++i) acc[i] += gf.values[i];
    });
    return {out};
}

CVar Tape::apply_gate(CVar f, Var logits) {
    const Spectrum& fv = node(f.id).c;
    const FeatureMap& lg = node(logits.id).r;
    if (lg.channels != fv.channels || lg.height != fv.height || lg.width != fv.width) {
        throw ShapeError("apply_gate: gate dims " + lg.shape_str() +
                         " do not match spectrum dims " + fv.shape_str());
    }
    Spectrum out(fv.channels, fv.height, fv.width);
    for (size_t i = 0; i < fv.size(); ++i) {
        out.values[i] = fv.values[i] * freqpriv::sigmoid(lg.values[i]);
    }
    const int oid = push_complex(std::move(out), "apply_gate");
    steps_.push_back([this, f, logits, oid] {
        const Spectrum& fv2 = node(f.id).c;
        const FeatureMap& lg2 = node(logits.id).r;
        const Spectrum& go = node(oid).gc;
        auto& gf = node(f.id).gc.values;
        auto& gl = node(logits.id).gr.values;
        for (size_t i = 0; i < fv2.size(); ++i) {
            const double m = freqpriv::sigmoid(lg2.values[i]);
            gf[i] += go.values[i] * m;
            const double dre = go.values[i].real() * fv2.values[i].real();
            const double dim = go.values[i].imag() * fv2.values[i].imag();
            gl[i] += (dre + dim) * m * (1.0 - m);
        }
    });
    return {oid};
}

namespace {

Conv1x1 view_conv1x1(const FeatureMap& w, const FeatureMap& b, int out_ch) {
    const int in_ch = static_cast<int>(w.size()) / out_ch;
    if (static_cast<size_t>(out_ch) * in_ch != w.size() ||
        b.size() != static_cast<size_t>(out_ch)) {
        throw ShapeError("conv1x1: parameter sizes inconsistent with out_ch");
    }
    Conv1x1 p(out_ch, in_ch);
    p.weight = w.values;
    p.bias = b.values;
    return p;
}

Conv3x3 view_conv3x3(const FeatureMap& w, const FeatureMap& b, int out_ch) {
    const int in_ch = static_cast<int>(w.size()) / (out_ch * 9);
    if (static_cast<size_t>(out_ch) * in_ch * 9 != w.size() ||
        b.size() != static_cast<size_t>(out_ch)) {
        throw ShapeError("conv3x3s2: parameter sizes inconsistent with out_ch");
    }
    Conv3x3 p(out_ch, in_ch);
    p.weight = w.values;
    p.bias = b.values;
    return p;
}

}  // namespace

Var Tape::conv1x1(Var x, Var weight, Var bias, int out_ch) {
    const Conv1x1 p = view_conv1x1(node(weight.id).r, node(bias.id).r, out_ch);
    const int oid = push_real(freqpriv::conv1x1(node(x.id).r, p), "conv1x1");
    steps_.push_back([this, x, weight, bias, out_ch, oid] {
        const Conv1x1 p2 = view_conv1x1(node(weight.id).r, node(bias.id).r, out_ch);
        const FeatureMap& xv = node(x.id).r;
        Conv1x1 gp(p2.out_ch, p2.in_ch);
        conv1x1_vjp(xv, p2, node(oid).gr, node(x.id).gr, gp);
        auto& gw = node(weight.id).gr.values;
        auto& gb = node(bias.id).gr.values;
        for (size_t i = 0; i < gw.size(); ++i) gw[i] += gp.weight[i];
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += gp.bias[i];
    });
    return {oid};
}

Var Tape::conv3x3s2(Var x, Var weight, Var bias, int out_ch) {
    const Conv3x3 p = view_conv3x3(node(weight.id).r, node(bias.id).r, out_ch);
    const int oid = push_real(freqpriv::conv3x3s2(node(x.id).r, p), "conv3x3s2");
    steps_.push_back([this, x, weight, bias, out_ch, oid] {
        const Conv3x3 p2 = view_conv3x3(node(weight.id).r, node(bias.id).r, out_ch);
        const FeatureMap& xv = node(x.id).r;
        Conv3x3 gp(p2.out_ch, p2.in_ch);
        conv3x3s2_vjp(xv, p2, node(oid).gr, node(x.id).gr, gp);
        auto& gw = node(weight.id).gr.values;
        auto& gb = node(bias.id).gr.values;
        for (size_t i = 0; i < gw.size(); ++i) gw[i] += gp.weight[i];
        for (size_t i = 0; i < gb.size(); ++i) gb[i] += gp.bias[i];
    });
    return {oid};
}

Var Tape::bilinear_resize(Var x, int out_h, int out_w) {
    const FeatureMap& xv = node(x.id).r;
    const SampleWindow win{0.0, 0.0, static_cast<double>(xv.height),
                           static_cast<double>(xv.width)};
    return window_resample(x, win, out_h, out_w);
}

Var Tape::window_resample(Var x, const SampleWindow& win, int out_h, int out_w) {
    const int oid = push_real(freqpriv::window_resample(node(x.id).r, win, out_h, out_w),
                              "window_resample");
    steps_.push_back([this, x, win, out_h, out_w, oid] {
        window_resample_vjp(node(x.id).r, win, out_h, out_w, node(oid).gr,
                            node(x.id).gr);
    });
    return {oid};
}

Var Tape::sigmoid(Var x) {
    const int oid = push_real(freqpriv::sigmoid(node(x.id).r), "sigmoid");
    steps_.push_back([this, x, oid] {
        sigmoid_vjp(node(oid).r, node(oid).gr, node(x.id).gr);
    });
    return {oid};
}

Var Tape::leaky_relu(Var x, double slope) {
    const int oid = push_real(freqpriv::leaky_relu(node(x.id).r, slope), "leaky_relu");
    steps_.push_back([this, x, slope, oid] {
        leaky_relu_vjp(node(x.id).r, slope, node(oid).gr, node(x.id).gr);
    });
    return {oid};
}

Var Tape::add(Var a, Var b) {
    const FeatureMap& av = node(a.id).r;
    const FeatureMap& bv = node(b.id).r;
    require_same_shape(av, bv, "add");
    FeatureMap out = av;
    for (size_t i = 0; i < out.size(); ++i) out.values[i] += bv.values[i];
    const int oid = push_real(std::move(out), "add");
    steps_.push_back([this, a, b, oid] {
        const auto& go = node(oid).gr.values;
        auto& ga = node(a.id).gr.values;
        auto& gb = node(b.id).gr.values;
        for (size_t i = 0; i < go.size(); ++i) {
            ga[i] += go[i];
            gb[i] += go[i];
        }
    });
    return {oid};
}

Var Tape::concat_channels(Var a, Var b) {
    const FeatureMap& av = node(a.id).r;
    const FeatureMap& bv = node(b.id).r;
    if (av.height != bv.height || av.width != bv.width) {
        throw ShapeError("concat_channels: spatial dims differ, " + av.shape_str() +
                         " vs " + bv.shape_str());
    }
    FeatureMap out(av.channels + bv.channels, av.height, av.width);
    std::copy(av.values.begin(), av.values.end(), out.values.begin());
    std::copy(bv.values.begin(), bv.values.end(), out.values.begin() + av.size());
    const int oid = push_real(std::move(out), "concat_channels");
    const size_t split = av.size();
    steps_.push_back([this, a, b, oid, split] {
        const auto& go = node(oid).gr.values;
        auto& ga = node(a.id).gr.values;
        auto& gb = node(b.id).gr.values;
        for (size_t i = 0; i < split; ++i) ga[i] += go[i];
        for (size_t i = split; i < go.size(); ++i) gb[i - split] += go[i];
    });
    return {oid};
}

SVar Tape::dot(Var x, std::vector<double> proj) {
    const FeatureMap& xv = node(x.id).r;
    if (proj.size() != xv.size()) throw ShapeError("dot: projection size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < proj.size(); ++i) acc += proj[i] * xv.values[i];
    const int oid = push_real(FeatureMap(1, 1, 1, acc), "dot");
    steps_.push_back([this, x, oid, proj = std::move(proj)] {
        const double g = node(oid).gr.values[0];
        auto& gx = node(x.id).gr.values;
        for (size_t i = 0; i < proj.size(); ++i) gx[i] += g * proj[i];
    });
    return {oid};
}

SVar Tape::dot(CVar f, std::vector<double> proj_re, std::vector<double> proj_im) {
    const Spectrum& fv = node(f.id).c;
    if (proj_re.size() != fv.size() || proj_im.size() != fv.size()) {
        throw ShapeError("dot: projection size mismatch");
    }
    double acc = 0.0;
    for (size_t i = 0; i < fv.size(); ++i) {
        acc += proj_re[i] * fv.values[i].real() + proj_im[i] * fv.values[i].imag();
    }
    const int oid = push_real(FeatureMap(1, 1, 1, acc), "dot");
    steps_.push_back([this, f, oid, proj_re = std::move(proj_re),
                      proj_im = std::move(proj_im)] {
        const double g = node(oid).gr.values[0];
        auto& gf = node(f.id).gc.values;
        for (size_t i = 0; i < proj_re.size(); ++i) {
            gf[i] += std::complex<double>(g * proj_re[i], g * proj_im[i]);
        }
    });
    return {oid};
}

SVar Tape::weighted_spectral_sqdist(CVar f, const Spectrum& target,
                                    std::vector<double> bin_weight) {
    const Spectrum& fv = node(f.id).c;
    if (!fv.same_shape(target)) {
        throw ShapeError("weighted_spectral_sqdist: spectrum dims " + fv.shape_str() +
                         " vs target dims " + target.shape_str());
    }
    const size_t plane = static_cast<size_t>(fv.height) * fv.width;
    if (bin_weight.size() != plane) {
        throw ShapeError("weighted_spectral_sqdist: bin weight size mismatch");
    }
    double acc = 0.0;
    for (int c = 0; c < fv.channels; ++c) {
        for (size_t i = 0; i < plane; ++i) {
            const auto d = fv.values[c * plane + i] - target.values[c * plane + i];
            acc += bin_weight[i] * std::norm(d);
        }
    }
    const int oid = push_real(FeatureMap(1, 1, 1, acc), "weighted_spectral_sqdist");
    steps_.push_back([this, f, oid, target, bin_weight = std::move(bin_weight), plane] {
        const double g = node(oid).gr.values[0];
        const Spectrum& fv2 = node(f.id).c;
        auto& gf = node(f.id).gc.values;
        for (int c = 0; c < fv2.channels; ++c) {
            for (size_t i = 0; i < plane; ++i) {
                const auto d = fv2.values[c * plane + i] - target.values[c * plane + i];
                gf[c * plane + i] += 2.0 * g * bin_weight[i] * d;
            }
        }
    });
    return {oid};
}

SVar Tape::add(SVar a, SVar b) {
    const double v = value(a) + value(b);
    const int oid = push_real(FeatureMap(1, 1, 1, v), "scalar_add");
    steps_.push_back([this, a, b, oid] {
        const double g = node(oid).gr.values[0];
        node(a.id).gr.values[0] += g;
        node(b.id).gr.values[0] += g;
    });
    return {oid};
}

SVar Tape::scale(SVar a, double k) {
    const int oid = push_real(FeatureMap(1, 1, 1, value(a) * k), "scalar_scale");
    steps_.push_back([this, a, k, oid] {
        node(a.id).gr.values[0] += k * node(oid).gr.values[0];
    });
    return {oid};
}

SVar Tape::custom_scalar(Var x, double v, const char* name,
                         std::function<void(const FeatureMap&, double, FeatureMap&)> vjp) {
    const int oid = push_real(FeatureMap(1, 1, 1, v), name);
    steps_.push_back([this, x, oid, vjp = std::move(vjp)] {
        vjp(node(x.id).r, node(oid).gr.values[0], node(x.id).gr);
    });
    return {oid};
}

void Tape::backward(SVar loss) {
    node(loss.id).gr.values[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    if (check_finite) {
        for (const auto& n : nodes_) {
            if (n.is_complex) {
                check_values(n.gc.values, "backward");
            } else {
                check_values(n.gr.values, "backward");
            }
        }
    }
}

// ---------------------------------------------------------------------------

GradCheckReport gradcheck(const GradCheckProblem& problem,
                          const std::vector<GradGroup>& base, double eps) {
    if (eps <= 0.0) throw ValidationError("gradcheck: eps must be positive");
    std::vector<std::vector<double>> point;
    point.reserve(base.size());
    for (const auto& g : base) point.push_back(g.values);

    const auto analytic = problem.gradient(point);
    GradCheckReport report;
    for (size_t gi = 0; gi < base.size(); ++gi) {
        for (size_t k = 0; k < base[gi].values.size(); ++k) {
            const double saved = point[gi][k];
            point[gi][k] = saved + eps;
            const double fp = problem.value(point);
            point[gi][k] = saved - eps;
            const double fm = problem.value(point);
            point[gi][k] = saved;
            const double gfd = (fp - fm) / (2.0 * eps);
            const double ga = analytic[gi][k];
            if (!std::isfinite(gfd) || !std::isfinite(ga)) {
                throw NumericError("gradcheck: non-finite gradient in group " +
                                   base[gi].name);
            }
            const double err = std::abs(ga - gfd) /
                               std::max({1.0, std::abs(ga), std::abs(gfd)});
            if (err > report.max_rel_err) {
                report.max_rel_err = err;
                report.worst_group = base[gi].name;
                report.worst_index = k;
            }
        }
    }
    return report;
}

GradCheckProblem make_tape_problem(TapeScalarFn fn) {
    GradCheckProblem p;
    p.value = [fn](const std::vector<std::vector<double>>& groups) {
        Tape tape;
        tape.check_finite = true;
        std::vector<Var> leaves;
        leaves.reserve(groups.size());
        for (const auto& g : groups) leaves.push_back(tape.leaf_vector(g));
        return tape.value(fn(tape, leaves));
    };
    p.gradient = [fn](const std::vector<std::vector<double>>& groups) {
        Tape tape;
        tape.check_finite = true;
        std::vector<Var> leaves;
        leaves.reserve(groups.size());
        for (const auto& g : groups) leaves.push_back(tape.leaf_vector(g));
        tape.backward(fn(tape, leaves));
        std::vector<std::vector<double>> grads;
        grads.reserve(groups.size());
        for (Var v : leaves) grads.push_back(tape.grad(v).values);
        return grads;
    };
    return p;
}

}  // namespace freqpriv
