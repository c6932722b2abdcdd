#pragma once

#include <complex>
#include <cstddef>
#include <span>

namespace levylab {

using cplx = std::complex<double>;

/// Multidimensional complex FFT on an N^d cube (row-major, last axis fastest),
/// backed by FFTW. Plans are created once per (d, N, direction) and shared;
/// execution is safe from concurrent threads.
///
/// Conventions: `forward` returns Fourier coefficients c_k = N^{-d} sum_n f_n e^{-2 pi i k.n/N},
/// so `inverse(forward(f)) == f` without further scaling.
namespace fft {

void forward(int dim, std::size_t n, std::span<const cplx> in, std::span<cplx> out);
void inverse(int dim, std::size_t n, std::span<const cplx> in, std::span<cplx> out);

} // namespace fft
} // namespace levylab
