#pragma once

#include <cstdint>
#include <vector>

namespace savfi::cnn {

// Building-block kernels behind the network. Exposed for layer-level tests.
// All arrays are dense row-major [C][H][W].

// Stride-1 same-padding convolution (asymmetric zero padding for even k:
// (k-1)/2 leading, the rest trailing). relu applies max(0, .) to the output.
template <typename T>
void conv_same(const T* in, int c_in, int h, int w, const T* weights,
               const T* bias, int c_out, int k, bool relu, T* out);

// Gradients of conv_same. d_w/d_b are accumulated (+=); d_in (if non-null)
// is overwritten. d_out must already include the ReLU mask when the layer
// had one.
template <typename T>
void conv_same_backward(const T* in, int c_in, int h, int w, const T* weights,
                        int c_out, int k, const T* d_out, T* d_w, T* d_b,
                        T* d_in);

// 2x2 max-pool, stride 2; h and w must be even. arg records the winning
// corner (0..3) per output pixel for the backward routing.
template <typename T>
void maxpool2(const T* in, int c, int h, int w, T* out, std::uint8_t* arg);

template <typename T>
void maxpool2_backward(const T* d_out, int c, int h, int w,
                       const std::uint8_t* arg, T* d_in);

// Nearest-neighbour 2x upsampling ("unpooling") and its adjoint.
template <typename T>
void unpool2(const T* in, int c, int h, int w, T* out);

template <typename T>
void unpool2_backward(const T* d_out, int c, int h, int w, T* d_in);

}  // namespace savfi::cnn
