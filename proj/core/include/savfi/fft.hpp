#pragma once

#include <complex>

namespace savfi::fft {

// In-place complex transforms (FFTW backend, double precision). The inverse
// transforms are normalized by 1/N. Plan creation is serialized internally;
// execution is thread-safe on distinct buffers.
void c2c_1d(std::complex<double>* data, int n, bool inverse);
void c2c_2d(std::complex<double>* data, int rows, int cols, bool inverse);

}  // namespace savfi::fft
