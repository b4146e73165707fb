#pragma once

#include <cstdint>
#include <vector>

#include "savfi/cnn/tensor.hpp"

namespace savfi::cnn {

// Encoder-decoder with skip concatenation. Every convolution is stride-1
// same-padding; encoder stages end in a 2x2 max-pool, decoder stages start
// with a nearest-neighbour 2x upsample. All convolutions but the
// prediction head are followed by ReLU.
struct NetSpec {
  static constexpr int kFirstKernel = 5;  // first encoder conv
  static constexpr int kKernel = 4;       // every other conv

  int input_channels = 4;   // two complex frames, re/im each
  int output_channels = 2;  // axial and lateral displacement
  std::vector<int> encoder_channels{16, 32, 64};
  std::vector<int> decoder_channels{32, 16, 8};

  int stages() const { return static_cast<int>(encoder_channels.size()); }
  void validate() const;
  // channel count entering decoder stage j (upsampled + skip concat)
  int decoder_input_channels(int j) const;
};

template <typename T>
struct ConvParam {
  Tensor<T> w;  // [out][in][k][k]
  Tensor<T> b;  // [out]
};

template <typename T>
struct ModelParams {
  NetSpec spec;
  std::vector<ConvParam<T>> encoder;
  std::vector<ConvParam<T>> decoder;
  ConvParam<T> head;

  static ModelParams he_init(const NetSpec& spec, std::uint64_t seed);

  std::size_t parameter_count() const;
  // flat views over every parameter tensor, fixed order; used by the
  // optimizer and the finite-difference checks
  std::vector<Tensor<T>*> tensors();
  std::vector<const Tensor<T>*> tensors() const;

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    out.spec = spec;
    for (const auto& p : encoder) {
      out.encoder.push_back({p.w.template cast<U>(), p.b.template cast<U>()});
    }
    for (const auto& p : decoder) {
      out.decoder.push_back({p.w.template cast<U>(), p.b.template cast<U>()});
    }
    out.head = {head.w.template cast<U>(), head.b.template cast<U>()};
    return out;
  }
};

// Forward pass, input [N][C][H][W] -> [N][out][H][W]. H and W must be
// divisible by 2^stages.
template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& input,
                  int threads = 1);

template <typename T>
struct BackwardResult {
  ModelParams<T> grads;
  double loss = 0.0;
};

// Mean smoothed-endpoint-error loss over the batch,
// per pixel sqrt(dz^2 + dx^2 + eps^2) with eps = 1e-8, optionally weighted
// by per-sample masks [N][H][W], and its gradients for every parameter.
template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params,
                           const Tensor<T>& batch, const Tensor<T>& targets,
                           const Tensor<T>* masks = nullptr, int threads = 1);

// Loss alone (shares the forward path with backward); used by tests and
// the finite-difference oracle.
template <typename T>
double loss_only(const ModelParams<T>& params, const Tensor<T>& batch,
                 const Tensor<T>& targets, const Tensor<T>* masks = nullptr);

inline constexpr double kLossEpsilon = 1e-8;

}  // namespace savfi::cnn
