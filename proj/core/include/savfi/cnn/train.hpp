#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "savfi/cnn/dataset.hpp"
#include "savfi/cnn/network.hpp"
#include "savfi/echopiv.hpp"
#include "savfi/manifest.hpp"

namespace savfi::cnn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double momentum = 0.9;
  int batch_size = 8;
  int epochs = 30;
  std::uint64_t seed = 0;
  bool use_masks = true;       // include mask-weighted augmentation variants
  double val_fraction = 0.1;   // used when no validation manifest is given
  double divergence_abort = 1e6;
  int threads = 1;
  bool verbose = false;
};

struct TrainResult {
  ModelParams<float> params;      // best validation-EPE parameters
  std::vector<double> train_loss; // mean loss per epoch
  std::vector<double> val_epe;    // median validation EPE (%) per epoch
  int best_epoch = -1;
};

// SGD with momentum over seeded shuffled batches of the augmented sample
// set. Validation samples come from val_manifest when given, otherwise from
// a seeded split of the training manifest.
TrainResult train(const DatasetManifest& manifest,
                  const DatasetManifest* val_manifest, const NetSpec& spec,
                  const TrainConfig& config);

// Lower-level entry point on materialized samples (used by train and by the
// overfit tests).
TrainResult train_samples(std::vector<TrainSample> train_set,
                          std::vector<TrainSample> val_set,
                          const NetSpec& spec, const TrainConfig& config);

// Median EPE (%) of the network on unaugmented samples.
double validation_epe(const ModelParams<float>& params,
                      const std::vector<TrainSample>& samples, int threads);

// Network inference on a complex frame pair. Larger images are tiled into
// spec-sized patches with 32 px overlap (stride = patch - 32) and blended by
// linear feathering. Output velocities are scaled to m/s by pitch / dt.
VelocityEstimate infer(const ModelParams<float>& params,
                       const std::complex<float>* frame_k,
                       const std::complex<float>* frame_k1, int height,
                       int width, double pitch_m, double frame_dt_s,
                       int patch = 128, int threads = 1);

// Patch start offsets covering `extent` with the inference tiling rule.
std::vector<int> tile_offsets(int extent, int patch, int overlap);

}  // namespace savfi::cnn
