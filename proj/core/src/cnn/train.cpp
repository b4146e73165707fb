#include "savfi/cnn/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "savfi/metrics.hpp"
#include "savfi/rng.hpp"

namespace savfi::cnn {
namespace {

// (sample, negate) decode of an augmented-epoch index.
struct View {
  int sample;
  bool negated;
  bool masked;
};

std::vector<View> build_views(const std::vector<TrainSample>& samples,
                              bool use_masks) {
  std::vector<View> views;
  for (int i = 0; i < static_cast<int>(samples.size()); ++i) {
    views.push_back({i, false, false});
    views.push_back({i, true, false});
    if (use_masks && !samples[static_cast<std::size_t>(i)].mask.empty()) {
      views.push_back({i, false, true});
      views.push_back({i, true, true});
    }
  }
  return views;
}

}  // namespace

double validation_epe(const ModelParams<float>& params,
                      const std::vector<TrainSample>& samples, int threads) {
  if (samples.empty()) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> epes;
  epes.reserve(samples.size());
  for (const TrainSample& s : samples) {
    Tensor<float> batch({1, s.input.dim(0), s.input.dim(1), s.input.dim(2)});
    std::copy(s.input.data(), s.input.data() + s.input.size(), batch.data());
    const Tensor<float> pred = forward(params, batch, threads);
    epes.push_back(
        epe_percent(s.target.data(), pred.data(), s.target.dim(1),
                    s.target.dim(2), nullptr));
  }
  std::vector<double> sorted = epes;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2]
                    : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

TrainResult train_samples(std::vector<TrainSample> train_set,
                          std::vector<TrainSample> val_set,
                          const NetSpec& spec, const TrainConfig& config) {
  if (train_set.empty()) {
    throw std::invalid_argument("training set is empty");
  }
  if (config.learning_rate < 0.0 || config.batch_size < 1 ||
      config.epochs < 0) {
    throw std::invalid_argument("invalid train config");
  }
  const int h = train_set.front().input.dim(1);
  const int w = train_set.front().input.dim(2);

  ModelParams<float> params =
      ModelParams<float>::he_init(spec, hash64(config.seed, "init"));
  ModelParams<float> velocity = params;  // momentum buffer
  for (auto* t : velocity.tensors()) {
    t->fill(0.0f);
  }

  std::vector<View> views = build_views(train_set, config.use_masks);
  Rng shuffle_rng(hash64(config.seed, "shuffle"));

  TrainResult result;
  result.params = params;
  double best_epe = std::numeric_limits<double>::infinity();
  const bool has_val = !val_set.empty();

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(views);
    double epoch_loss = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < views.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(views.size(),
                   start + static_cast<std::size_t>(config.batch_size));
      const int n = static_cast<int>(stop - start);
      Tensor<float> batch({n, 4, h, w});
      Tensor<float> targets({n, 2, h, w});
      Tensor<float> masks({n, h, w});
      bool any_mask = false;
      const std::size_t in_stride = static_cast<std::size_t>(4) * h * w;
      const std::size_t out_stride = static_cast<std::size_t>(2) * h * w;
      const std::size_t mask_stride = static_cast<std::size_t>(h) * w;
      for (int b = 0; b < n; ++b) {
        const View& view = views[start + static_cast<std::size_t>(b)];
        const TrainSample& s =
            train_set[static_cast<std::size_t>(view.sample)];
        float* in = batch.data() + in_stride * static_cast<std::size_t>(b);
        if (view.negated) {
          for (std::size_t i = 0; i < in_stride; ++i) {
            in[i] = -s.input[i];
          }
        } else {
          std::copy(s.input.data(), s.input.data() + in_stride, in);
        }
        std::copy(s.target.data(), s.target.data() + out_stride,
                  targets.data() + out_stride * static_cast<std::size_t>(b));
        float* m = masks.data() + mask_stride * static_cast<std::size_t>(b);
        if (view.masked) {
          std::copy(s.mask.data(), s.mask.data() + mask_stride, m);
          any_mask = true;
        } else {
          std::fill(m, m + mask_stride, 1.0f);
        }
      }

      const BackwardResult<float> back =
          backward(params, batch, targets, any_mask ? &masks : nullptr,
                   config.threads);
      if (!std::isfinite(back.loss) || back.loss > config.divergence_abort) {
        throw std::runtime_error("training diverged (loss " +
                                 std::to_string(back.loss) + ")");
      }
      epoch_loss += back.loss;
      ++batches;

      // SGD with momentum: v = mu * v + g; p -= lr * v
      auto ps = params.tensors();
      auto vs = velocity.tensors();
      auto gs = back.grads.tensors();
      const auto mu = static_cast<float>(config.momentum);
      const auto lr = static_cast<float>(config.learning_rate);
      for (std::size_t t = 0; t < ps.size(); ++t) {
        float* p = ps[t]->data();
        float* v = vs[t]->data();
        const float* g = gs[t]->data();
        for (std::size_t i = 0; i < ps[t]->size(); ++i) {
          v[i] = mu * v[i] + g[i];
          p[i] -= lr * v[i];
        }
      }
    }
    result.train_loss.push_back(batches > 0 ? epoch_loss / batches : 0.0);

    if (has_val) {
      const double epe = validation_epe(params, val_set, config.threads);
      result.val_epe.push_back(epe);
      if (epe < best_epe) {
        best_epe = epe;
        result.params = params;
        result.best_epoch = epoch;
      }
      if (config.verbose) {
        std::printf("epoch %3d  loss %.5f  val-epe %.2f%%%s\n", epoch,
                    result.train_loss.back(), epe,
                    result.best_epoch == epoch ? "  *" : "");
        std::fflush(stdout);
      }
    } else {
      result.params = params;
      result.best_epoch = epoch;
      if (config.verbose) {
        std::printf("epoch %3d  loss %.5f\n", epoch,
                    result.train_loss.back());
        std::fflush(stdout);
      }
    }
  }
  if (config.epochs == 0) {
    result.params = params;
  }
  return result;
}

TrainResult train(const DatasetManifest& manifest,
                  const DatasetManifest* val_manifest, const NetSpec& spec,
                  const TrainConfig& config) {
  if (manifest.entries.empty()) {
    throw std::invalid_argument("training manifest is empty");
  }
  std::vector<TrainSample> train_set = load_frame_pairs(manifest);
  std::vector<TrainSample> val_set;
  if (val_manifest != nullptr) {
    val_set = load_frame_pairs(*val_manifest);
  } else if (config.val_fraction > 0.0 && train_set.size() >= 2) {
    // seeded split: last ceil(fraction * n) of a shuffled order
    std::vector<int> order(train_set.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      order[i] = static_cast<int>(i);
    }
    Rng split_rng(hash64(config.seed, "val-split"));
    split_rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::max<double>(
        1.0, std::ceil(config.val_fraction *
                       static_cast<double>(train_set.size()))));
    std::vector<TrainSample> kept;
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (i + n_val < order.size()) {
        kept.push_back(std::move(train_set[static_cast<std::size_t>(
            order[i])]));
      } else {
        val_set.push_back(std::move(train_set[static_cast<std::size_t>(
            order[i])]));
      }
    }
    train_set = std::move(kept);
  }
  return train_samples(std::move(train_set), std::move(val_set), spec,
                       config);
}

std::vector<int> tile_offsets(int extent, int patch, int overlap) {
  const int stride = patch - overlap;
  std::vector<int> starts;
  for (int s = 0; s + patch < extent; s += stride) {
    starts.push_back(s);
  }
  const int last = extent - patch;
  if (starts.empty() || starts.back() != last) {
    starts.push_back(last);
  }
  return starts;
}

VelocityEstimate infer(const ModelParams<float>& params,
                       const std::complex<float>* frame_k,
                       const std::complex<float>* frame_k1, int height,
                       int width, double pitch_m, double frame_dt_s,
                       int patch, int threads) {
  if (height < patch || width < patch) {
    throw std::invalid_argument("frames smaller than the network patch");
  }
  if (pitch_m <= 0.0 || frame_dt_s <= 0.0) {
    throw std::invalid_argument("pitch and frame interval must be > 0");
  }
  constexpr int kOverlap = 32;
  const std::vector<int> ys = tile_offsets(height, patch, kOverlap);
  const std::vector<int> xs = tile_offsets(width, patch, kOverlap);
  const std::size_t plane =
      static_cast<std::size_t>(height) * static_cast<std::size_t>(width);

  std::vector<double> acc(2 * plane, 0.0);
  std::vector<double> weight(plane, 0.0);
  std::vector<std::complex<float>> patch_a(
      static_cast<std::size_t>(patch) * patch);
  std::vector<std::complex<float>> patch_b(patch_a.size());

  // linear feather: ramps over the overlap width at the patch borders
  const auto feather = [&](int i) {
    const double ramp = kOverlap + 1;
    return std::min({static_cast<double>(i + 1),
                     static_cast<double>(patch - i), ramp}) /
           ramp;
  };

  for (int ty : ys) {
    for (int tx : xs) {
      for (int r = 0; r < patch; ++r) {
        const std::size_t src =
            static_cast<std::size_t>(ty + r) * width + tx;
        std::copy(frame_k + src, frame_k + src + patch,
                  patch_a.begin() + static_cast<std::size_t>(r) * patch);
        std::copy(frame_k1 + src, frame_k1 + src + patch,
                  patch_b.begin() + static_cast<std::size_t>(r) * patch);
      }
      const Tensor<float> input =
          prepare_input(patch_a.data(), patch_b.data(), patch, patch);
      Tensor<float> batch({1, 4, patch, patch});
      std::copy(input.data(), input.data() + input.size(), batch.data());
      const Tensor<float> pred = forward(params, batch, threads);
      const std::size_t patch_plane = static_cast<std::size_t>(patch) * patch;
      for (int r = 0; r < patch; ++r) {
        const double wr = feather(r);
        for (int c = 0; c < patch; ++c) {
          const double wt = wr * feather(c);
          const std::size_t dst =
              static_cast<std::size_t>(ty + r) * width + (tx + c);
          const std::size_t src = static_cast<std::size_t>(r) * patch + c;
          acc[dst] += wt * pred[src];
          acc[plane + dst] += wt * pred[patch_plane + src];
          weight[dst] += wt;
        }
      }
    }
  }

  VelocityEstimate out;
  out.height = height;
  out.width = width;
  out.source = "cnn";
  out.pitch_m = pitch_m;
  out.frame_dt_s = frame_dt_s;
  out.v.resize(2 * plane);
  out.valid.assign(plane, 1);
  const double scale = pitch_m / frame_dt_s;
  for (std::size_t i = 0; i < plane; ++i) {
    out.v[i] = static_cast<float>(acc[i] / weight[i] * scale);
    out.v[plane + i] =
        static_cast<float>(acc[plane + i] / weight[i] * scale);
  }
  return out;
}

}  // namespace savfi::cnn
