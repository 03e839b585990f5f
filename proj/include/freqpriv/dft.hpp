#pragma once

#include "freqpriv/tensor.hpp"

namespace freqpriv {

// Transform implementation selector. Auto picks the radix-2 path on
// power-of-two axis lengths and the direct summation otherwise.
enum class DftImpl { Auto, Naive, Radix2 };

// Per-channel 2D DFT, unnormalized forward:
//   F_c(u,v) = sum_{h,w} X_c(h,w) * exp(-j*2*pi*(u*h/H + v*w/W))
Spectrum dft2(const FeatureMap& x, DftImpl impl = DftImpl::Auto);

// Per-channel inverse with 1/(H*W) normalization, real part only:
//   Y_c(h,w) = Re[ (1/HW) * sum_{u,v} F_c(u,v) * exp(+j*2*pi*(u*h/H + v*w/W)) ]
FeatureMap idft2(const Spectrum& f, DftImpl impl = DftImpl::Auto);

// Full complex inverse (no real-part projection); used to test that
// Hermitian-symmetric spectra invert to real maps.
Spectrum idft2_complex(const Spectrum& f, DftImpl impl = DftImpl::Auto);

// VJP of dft2: cotangent on the spectrum -> gradient on the real input.
// Equals the real part of the unnormalized inverse transform of grad_f.
FeatureMap dft2_vjp(const Spectrum& grad_f, DftImpl impl = DftImpl::Auto);

// VJP of idft2: cotangent on the real output -> gradient on the spectrum.
// Equals (1/HW) times the forward transform of grad_y.
Spectrum idft2_vjp(const FeatureMap& grad_y, DftImpl impl = DftImpl::Auto);

bool is_power_of_two(int n);

}  // namespace freqpriv
