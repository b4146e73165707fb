#include "savfi/cnn/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "savfi/tensorfile.hpp"

namespace savfi::cnn {

Tensor<float> prepare_input(const std::complex<float>* frame_k,
                            const std::complex<float>* frame_k1, int height,
                            int width) {
  const std::size_t plane =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  Tensor<float> input({4, height, width});
  const std::complex<float>* frames[2] = {frame_k, frame_k1};
  for (int f = 0; f < 2; ++f) {
    double peak = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      peak = std::max(peak, static_cast<double>(std::abs(frames[f][i])));
    }
    if (peak == 0.0) {
      throw std::invalid_argument("cannot normalize an all-zero frame");
    }
    const auto scale = static_cast<float>(1.0 / peak);
    float* re = input.data() + static_cast<std::size_t>(2 * f) * plane;
    float* im = re + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      re[i] = frames[f][i].real() * scale;
      im[i] = frames[f][i].imag() * scale;
    }
  }
  return input;
}

std::vector<TrainSample> augment_pair(const TrainSample& base) {
  std::vector<TrainSample> out;
  TrainSample original = base;
  original.masked = false;
  TrainSample negated = base;
  negated.masked = false;
  for (std::size_t i = 0; i < negated.input.size(); ++i) {
    negated.input[i] = -negated.input[i];
  }
  out.push_back(original);
  out.push_back(negated);
  if (!base.mask.empty()) {
    TrainSample m0 = original;
    m0.masked = true;
    TrainSample m1 = negated;
    m1.masked = true;
    out.push_back(std::move(m0));
    out.push_back(std::move(m1));
  }
  return out;
}

std::vector<TrainSample> load_frame_pairs(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) {
    return {};
  }
  const double to_px_per_frame = manifest.frame_dt_s / manifest.pitch_m;
  std::vector<TrainSample> pairs;
  for (const ManifestEntry& entry : manifest.entries) {
    const TensorData iq = read_tensor(entry.input);
    const TensorData truth = read_tensor(entry.truth);
    if (iq.dtype() != Dtype::C64 || iq.dims.size() != 3) {
      throw DataError("expected complex [F,H,W] stack: " +
                      entry.input.string());
    }
    if (truth.dims.size() != 4 || truth.dims[0] != iq.dims[0] ||
        truth.dims[1] != 2 || truth.dims[2] != iq.dims[1] ||
        truth.dims[3] != iq.dims[2]) {
      throw DataError("truth dims do not match stack: " +
                      entry.truth.string());
    }
    const int frames = static_cast<int>(iq.dims[0]);
    const int h = static_cast<int>(iq.dims[1]);
    const int w = static_cast<int>(iq.dims[2]);
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor<float> mask;
    if (entry.mask) {
      const TensorData m = read_tensor(*entry.mask);
      if (m.dims.size() != 2 || static_cast<int>(m.dims[0]) != h ||
          static_cast<int>(m.dims[1]) != w) {
        throw DataError("mask dims mismatch: " + entry.mask->string());
      }
      mask = Tensor<float>({h, w});
      std::copy(m.f32().begin(), m.f32().end(), mask.data());
    }

    for (int k = 0; k + 1 < frames; ++k) {
      TrainSample sample;
      sample.tag = entry.tag;
      sample.input = prepare_input(iq.c64().data() + plane * k,
                                   iq.c64().data() + plane * (k + 1), h, w);
      sample.target = Tensor<float>({2, h, w});
      const float* truth_frame = truth.f32().data() + 2 * plane * k;
      for (std::size_t i = 0; i < 2 * plane; ++i) {
        sample.target[i] =
            truth_frame[i] * static_cast<float>(to_px_per_frame);
      }
      sample.mask = mask;
      pairs.push_back(std::move(sample));
    }
  }
  return pairs;
}

}  // namespace savfi::cnn
