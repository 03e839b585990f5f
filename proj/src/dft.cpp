#include "freqpriv/dft.hpp"

#include <cmath>

namespace freqpriv {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

using cplx = std::complex<double>;

bool pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Direct O(N^2) 1-D transform on contiguous data:
//   out[k] = sum_n in[n] * exp(sign*j*2*pi*k*n/N).
// `twiddle` holds exp(sign*j*2*pi*m/N) for m in [0, N); indexed by (k*n) mod N.
void line_naive(const cplx* in, cplx* out, int n, const std::vector<cplx>& twiddle) {
    for (int k = 0; k < n; ++k) {
        cplx acc{0.0, 0.0};
        long m = 0;
        for (int i = 0; i < n; ++i) {
            acc += in[i] * twiddle[m];
            m += k;
            if (m >= n) m -= n;
        }
        out[k] = acc;
    }
}

// Iterative radix-2 Cooley-Tukey; n must be a power of two.
void line_radix2(cplx* data, int n, int stride, int sign) {
    // bit-reversal permutation
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[static_cast<size_t>(i) * stride],
                             data[static_cast<size_t>(j) * stride]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / len;
        const cplx wl{std::cos(ang), std::sin(ang)};
        for (int i = 0; i < n; i += len) {
            cplx w{1.0, 0.0};
            for (int k = 0; k < len / 2; ++k) {
                cplx* a = data + static_cast<size_t>(i + k) * stride;
                cplx* b = data + static_cast<size_t>(i + k + len / 2) * stride;
                const cplx u = *a;
                const cplx v = *b * w;
                *a = u + v;
                *b = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<cplx> make_twiddle(int n, int sign) {
    std::vector<cplx> t(n);
    for (int m = 0; m < n; ++m) {
        const double ang = sign * kTwoPi * m / n;
        t[m] = {std::cos(ang), std::sin(ang)};
    }
    return t;
}

// In-place separable 2D transform of one channel (rows then columns).
void transform_channel(cplx* ch, int h, int w, int sign, DftImpl impl) {
    const bool fast_w = (impl == DftImpl::Radix2) ||
                        (impl == DftImpl::Auto && pow2(w));
    const bool fast_h = (impl == DftImpl::Radix2) ||
                        (impl == DftImpl::Auto && pow2(h));

    if (fast_w) {
        for (int r = 0; r < h; ++r) line_radix2(ch + static_cast<size_t>(r) * w, w, 1, sign);
    } else {
        const auto tw = make_twiddle(w, sign);
        std::vector<cplx> row(w);
        for (int r = 0; r < h; ++r) {
            cplx* p = ch + static_cast<size_t>(r) * w;
            line_naive(p, row.data(), w, tw);
            std::copy(row.begin(), row.end(), p);
        }
    }
    if (fast_h) {
        for (int c = 0; c < w; ++c) line_radix2(ch + c, h, w, sign);
    } else {
        const auto th = make_twiddle(h, sign);
        std::vector<cplx> col_in(h), col_out(h);
        for (int c = 0; c < w; ++c) {
            for (int r = 0; r < h; ++r) col_in[r] = ch[static_cast<size_t>(r) * w + c];
            line_naive(col_in.data(), col_out.data(), h, th);
            for (int r = 0; r < h; ++r) ch[static_cast<size_t>(r) * w + c] = col_out[r];
        }
    }
}

Spectrum transform_all(Spectrum f, int sign, DftImpl impl) {
    const size_t plane = static_cast<size_t>(f.height) * f.width;
    for (int c = 0; c < f.channels; ++c) {
        transform_channel(f.values.data() + c * plane, f.height, f.width, sign, impl);
    }
    return f;
}

Spectrum to_complex(const FeatureMap& x) {
    Spectrum s(x.channels, x.height, x.width);
    for (size_t i = 0; i < x.size(); ++i) s.values[i] = {x.values[i], 0.0};
    return s;
}

FeatureMap real_part(const Spectrum& s, double scale) {
    FeatureMap y(s.channels, s.height, s.width);
    for (size_t i = 0; i < s.size(); ++i) y.values[i] = s.values[i].real() * scale;
    return y;
}

}  // namespace

bool is_power_of_two(int n) { return pow2(n); }

Spectrum dft2(const FeatureMap& x, DftImpl impl) {
    return transform_all(to_complex(x), -1, impl);
}

FeatureMap idft2(const Spectrum& f, DftImpl impl) {
    const double scale = 1.0 / (static_cast<double>(f.height) * f.width);
    return real_part(transform_all(f, +1, impl), scale);
}

Spectrum idft2_complex(const Spectrum& f, DftImpl impl) {
    Spectrum out = transform_all(f, +1, impl);
    const double scale = 1.0 / (static_cast<double>(f.height) * f.width);
    for (auto& v : out.values) v *= scale;
    return out;
}

FeatureMap dft2_vjp(const Spectrum& grad_f, DftImpl impl) {
    return real_part(transform_all(grad_f, +1, impl), 1.0);
}

Spectrum idft2_vjp(const FeatureMap& grad_y, DftImpl impl) {
    Spectrum g = transform_all(to_complex(grad_y), -1, impl);
    const double scale = 1.0 / (static_cast<double>(grad_y.height) * grad_y.width);
    for (auto& v : g.values) v *= scale;
    return g;
}

}  // namespace freqpriv
