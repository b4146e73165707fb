#pragma once

#include <complex>
#include <string>
#include <vector>

#include "savfi/cnn/tensor.hpp"
#include "savfi/manifest.hpp"

namespace savfi::cnn {

// Network input from two consecutive complex frames: channels
// [Re(f_k), Im(f_k), Re(f_k+1), Im(f_k+1)], each frame normalized by its
// maximum absolute (complex magnitude) value. Throws on an all-zero frame.
Tensor<float> prepare_input(const std::complex<float>* frame_k,
                            const std::complex<float>* frame_k1, int height,
                            int width);

// One supervised sample: prepared input, displacement target in px/frame,
// optional vessel mask. `masked` selects mask weighting in the loss.
struct TrainSample {
  Tensor<float> input;   // [4][H][W]
  Tensor<float> target;  // [2][H][W]
  Tensor<float> mask;    // [H][W] or empty
  bool masked = false;
  std::string tag;
};

// In-line augmentation: {original, complex-negated} and, when a mask is
// present, additionally the mask-weighted variant of each. Negating the
// complex input leaves the velocity target unchanged.
std::vector<TrainSample> augment_pair(const TrainSample& base);

// Expands every window entry of a manifest into consecutive-frame pairs.
// Targets are converted from m/s to px/frame with the manifest's pitch and
// frame interval; pair k uses the truth field of frame k.
std::vector<TrainSample> load_frame_pairs(const DatasetManifest& manifest);

}  // namespace savfi::cnn
