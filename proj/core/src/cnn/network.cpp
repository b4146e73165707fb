#include "savfi/cnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "savfi/cnn/ops.hpp"
#include "savfi/parallel.hpp"
#include "savfi/rng.hpp"

namespace savfi::cnn {

void NetSpec::validate() const {
  if (input_channels < 1 || output_channels < 1) {
    throw std::invalid_argument("net spec channel counts must be positive");
  }
  if (encoder_channels.empty() ||
      encoder_channels.size() != decoder_channels.size()) {
    throw std::invalid_argument(
        "net spec needs matching encoder/decoder stage counts");
  }
  for (int c : encoder_channels) {
    if (c < 1) {
      throw std::invalid_argument("encoder channels must be positive");
    }
  }
  for (int c : decoder_channels) {
    if (c < 1) {
      throw std::invalid_argument("decoder channels must be positive");
    }
  }
}

int NetSpec::decoder_input_channels(int j) const {
  const int s = stages();
  const int up_channels =
      j == 0 ? encoder_channels[static_cast<std::size_t>(s - 1)]
             : decoder_channels[static_cast<std::size_t>(j - 1)];
  return up_channels + encoder_channels[static_cast<std::size_t>(s - 1 - j)];
}

namespace {

template <typename T>
void zero_pad(const T* in, int c, int h, int w, int k, std::vector<T>& pad) {
  const int hp = h + k - 1;
  const int wp = w + k - 1;
  const int pt = (k - 1) / 2;
  const int pl = (k - 1) / 2;
  pad.assign(static_cast<std::size_t>(c) * hp * wp, T{});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<std::size_t>(ch) * h * w;
    T* dst = pad.data() + static_cast<std::size_t>(ch) * hp * wp;
    for (int y = 0; y < h; ++y) {
      std::copy(src + static_cast<std::size_t>(y) * w,
                src + static_cast<std::size_t>(y + 1) * w,
                dst + static_cast<std::size_t>(y + pt) * wp + pl);
    }
  }
}

}  // namespace

template <typename T>
void conv_same(const T* in, int c_in, int h, int w, const T* weights,
               const T* bias, int c_out, int k, bool relu, T* out) {
  std::vector<T> pad;
  zero_pad(in, c_in, h, w, k, pad);
  const int hp = h + k - 1;
  const int wp = w + k - 1;
  for (int oc = 0; oc < c_out; ++oc) {
    T* dst = out + static_cast<std::size_t>(oc) * h * w;
    std::fill(dst, dst + static_cast<std::size_t>(h) * w, bias[oc]);
    const T* wc = weights + static_cast<std::size_t>(oc) * c_in * k * k;
    for (int ic = 0; ic < c_in; ++ic) {
      const T* base = pad.data() + static_cast<std::size_t>(ic) * hp * wp;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const T wv = wc[(static_cast<std::size_t>(ic) * k + ky) * k + kx];
          for (int y = 0; y < h; ++y) {
            const T* src = base + static_cast<std::size_t>(y + ky) * wp + kx;
            T* row = dst + static_cast<std::size_t>(y) * w;
            for (int x = 0; x < w; ++x) {
              row[x] += wv * src[x];
            }
          }
        }
      }
    }
    if (relu) {
      for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
        dst[i] = std::max(T{}, dst[i]);
      }
    }
  }
}

template <typename T>
void conv_same_backward(const T* in, int c_in, int h, int w, const T* weights,
                        int c_out, int k, const T* d_out, T* d_w, T* d_b,
                        T* d_in) {
  std::vector<T> pad;
  zero_pad(in, c_in, h, w, k, pad);
  const int hp = h + k - 1;
  const int wp = w + k - 1;
  std::vector<T> d_pad;
  if (d_in != nullptr) {
    d_pad.assign(static_cast<std::size_t>(c_in) * hp * wp, T{});
  }

  for (int oc = 0; oc < c_out; ++oc) {
    const T* dout_c = d_out + static_cast<std::size_t>(oc) * h * w;
    T acc_b = T{};
    for (std::size_t i = 0; i < static_cast<std::size_t>(h) * w; ++i) {
      acc_b += dout_c[i];
    }
    d_b[oc] += acc_b;
    const T* wc = weights + static_cast<std::size_t>(oc) * c_in * k * k;
    T* dwc = d_w + static_cast<std::size_t>(oc) * c_in * k * k;
    for (int ic = 0; ic < c_in; ++ic) {
      const T* base = pad.data() + static_cast<std::size_t>(ic) * hp * wp;
      T* dbase = d_in != nullptr
                     ? d_pad.data() + static_cast<std::size_t>(ic) * hp * wp
                     : nullptr;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          T acc_w = T{};
          const T wv = wc[(static_cast<std::size_t>(ic) * k + ky) * k + kx];
          for (int y = 0; y < h; ++y) {
            const T* src = base + static_cast<std::size_t>(y + ky) * wp + kx;
            const T* drow = dout_c + static_cast<std::size_t>(y) * w;
            if (dbase != nullptr) {
              T* ddst = dbase + static_cast<std::size_t>(y + ky) * wp + kx;
              for (int x = 0; x < w; ++x) {
                acc_w += drow[x] * src[x];
                ddst[x] += wv * drow[x];
              }
            } else {
              for (int x = 0; x < w; ++x) {
                acc_w += drow[x] * src[x];
              }
            }
          }
          dwc[(static_cast<std::size_t>(ic) * k + ky) * k + kx] += acc_w;
        }
      }
    }
  }

  if (d_in != nullptr) {
    const int pt = (k - 1) / 2;
    const int pl = (k - 1) / 2;
    for (int ic = 0; ic < c_in; ++ic) {
      const T* src = d_pad.data() + static_cast<std::size_t>(ic) * hp * wp;
      T* dst = d_in + static_cast<std::size_t>(ic) * h * w;
      for (int y = 0; y < h; ++y) {
        const T* row = src + static_cast<std::size_t>(y + pt) * wp + pl;
        std::copy(row, row + w, dst + static_cast<std::size_t>(y) * w);
      }
    }
  }
}

template <typename T>
void maxpool2(const T* in, int c, int h, int w, T* out, std::uint8_t* arg) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw std::invalid_argument("maxpool2 needs even spatial dims");
  }
  const int ho = h / 2;
  const int wo = w / 2;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<std::size_t>(ch) * h * w;
    T* dst = out + static_cast<std::size_t>(ch) * ho * wo;
    std::uint8_t* a = arg + static_cast<std::size_t>(ch) * ho * wo;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const T* cell = src + static_cast<std::size_t>(2 * y) * w + 2 * x;
        T best = cell[0];
        std::uint8_t which = 0;
        if (cell[1] > best) {
          best = cell[1];
          which = 1;
        }
        if (cell[w] > best) {
          best = cell[w];
          which = 2;
        }
        if (cell[w + 1] > best) {
          best = cell[w + 1];
          which = 3;
        }
        dst[static_cast<std::size_t>(y) * wo + x] = best;
        a[static_cast<std::size_t>(y) * wo + x] = which;
      }
    }
  }
}

template <typename T>
void maxpool2_backward(const T* d_out, int c, int h, int w,
                       const std::uint8_t* arg, T* d_in) {
  const int ho = h / 2;
  const int wo = w / 2;
  std::fill(d_in, d_in + static_cast<std::size_t>(c) * h * w, T{});
  for (int ch = 0; ch < c; ++ch) {
    const T* src = d_out + static_cast<std::size_t>(ch) * ho * wo;
    const std::uint8_t* a = arg + static_cast<std::size_t>(ch) * ho * wo;
    T* dst = d_in + static_cast<std::size_t>(ch) * h * w;
    for (int y = 0; y < ho; ++y) {
      for (int x = 0; x < wo; ++x) {
        const std::uint8_t which = a[static_cast<std::size_t>(y) * wo + x];
        const int yy = 2 * y + (which >> 1);
        const int xx = 2 * x + (which & 1);
        dst[static_cast<std::size_t>(yy) * w + xx] +=
            src[static_cast<std::size_t>(y) * wo + x];
      }
    }
  }
}

template <typename T>
void unpool2(const T* in, int c, int h, int w, T* out) {
  const int ho = 2 * h;
  const int wo = 2 * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = in + static_cast<std::size_t>(ch) * h * w;
    T* dst = out + static_cast<std::size_t>(ch) * ho * wo;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T v = src[static_cast<std::size_t>(y) * w + x];
        T* cell = dst + static_cast<std::size_t>(2 * y) * wo + 2 * x;
        cell[0] = v;
        cell[1] = v;
        cell[wo] = v;
        cell[wo + 1] = v;
      }
    }
  }
}

template <typename T>
void unpool2_backward(const T* d_out, int c, int h, int w, T* d_in) {
  const int wo = 2 * w;
  for (int ch = 0; ch < c; ++ch) {
    const T* src = d_out + static_cast<std::size_t>(ch) * (2 * h) * wo;
    T* dst = d_in + static_cast<std::size_t>(ch) * h * w;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const T* cell = src + static_cast<std::size_t>(2 * y) * wo + 2 * x;
        dst[static_cast<std::size_t>(y) * w + x] =
            cell[0] + cell[1] + cell[wo] + cell[wo + 1];
      }
    }
  }
}

namespace {

// Everything the backward pass needs from one sample's forward pass.
template <typename T>
struct SampleTrace {
  std::vector<Tensor<T>> enc_in;    // conv inputs x_i
  std::vector<Tensor<T>> enc_out;   // f_i, post-ReLU
  std::vector<std::vector<std::uint8_t>> pool_arg;
  std::vector<Tensor<T>> pooled;    // x_{i+1}
  std::vector<Tensor<T>> dec_in;    // concat(upsample, skip)
  std::vector<Tensor<T>> dec_out;   // post-ReLU
  Tensor<T> pred;                   // head output
};

template <typename T>
void forward_sample(const ModelParams<T>& params, const T* input, int h,
                    int w, SampleTrace<T>& trace) {
  const NetSpec& spec = params.spec;
  const int s = spec.stages();
  trace.enc_in.clear();
  trace.enc_out.clear();
  trace.pool_arg.clear();
  trace.pooled.clear();
  trace.dec_in.clear();
  trace.dec_out.clear();

  // encoder
  int ch = spec.input_channels;
  int hh = h;
  int ww = w;
  Tensor<T> x({ch, hh, ww});
  std::copy(input, input + x.size(), x.data());
  for (int i = 0; i < s; ++i) {
    const int oc = spec.encoder_channels[static_cast<std::size_t>(i)];
    const int k = i == 0 ? NetSpec::kFirstKernel : NetSpec::kKernel;
    Tensor<T> f({oc, hh, ww});
    conv_same(x.data(), ch, hh, ww,
              params.encoder[static_cast<std::size_t>(i)].w.data(),
              params.encoder[static_cast<std::size_t>(i)].b.data(), oc, k,
              true, f.data());
    Tensor<T> pooled({oc, hh / 2, ww / 2});
    std::vector<std::uint8_t> arg(pooled.size());
    maxpool2(f.data(), oc, hh, ww, pooled.data(), arg.data());
    trace.enc_in.push_back(std::move(x));
    trace.enc_out.push_back(std::move(f));
    trace.pool_arg.push_back(std::move(arg));
    trace.pooled.push_back(pooled);
    x = std::move(pooled);
    ch = oc;
    hh /= 2;
    ww /= 2;
  }

  // decoder with skip concatenation
  for (int j = 0; j < s; ++j) {
    const int skip = s - 1 - j;
    const Tensor<T>& f = trace.enc_out[static_cast<std::size_t>(skip)];
    const int up_h = 2 * hh;
    const int up_w = 2 * ww;
    const int cat_c = ch + f.dim(0);
    Tensor<T> cat({cat_c, up_h, up_w});
    unpool2(x.data(), ch, hh, ww, cat.data());
    std::copy(f.data(), f.data() + f.size(),
              cat.data() + static_cast<std::size_t>(ch) * up_h * up_w);
    const int oc = spec.decoder_channels[static_cast<std::size_t>(j)];
    Tensor<T> d({oc, up_h, up_w});
    conv_same(cat.data(), cat_c, up_h, up_w,
              params.decoder[static_cast<std::size_t>(j)].w.data(),
              params.decoder[static_cast<std::size_t>(j)].b.data(), oc,
              NetSpec::kKernel, true, d.data());
    trace.dec_in.push_back(std::move(cat));
    trace.dec_out.push_back(d);
    x = std::move(d);
    ch = oc;
    hh = up_h;
    ww = up_w;
  }

  // prediction head, linear
  trace.pred = Tensor<T>({spec.output_channels, hh, ww});
  conv_same(x.data(), ch, hh, ww, params.head.w.data(), params.head.b.data(),
            spec.output_channels, NetSpec::kKernel, false,
            trace.pred.data());
}

// dL/dpred for one sample plus its loss term. Loss per pixel is
// sqrt(dz^2 + dx^2 + eps^2); sample loss is the (mask-weighted) pixel mean.
template <typename T>
double loss_grad(const Tensor<T>& pred, const T* target, const T* mask,
                 Tensor<T>& d_pred) {
  const int plane = pred.dim(1) * pred.dim(2);
  const T* pz = pred.data();
  const T* px = pred.data() + plane;
  T* gz = d_pred.data();
  T* gx = d_pred.data() + plane;
  double weight_sum = 0.0;
  if (mask != nullptr) {
    for (int i = 0; i < plane; ++i) {
      weight_sum += static_cast<double>(mask[i]);
    }
  } else {
    weight_sum = plane;
  }
  if (weight_sum <= 0.0) {
    throw std::invalid_argument("mask excludes every pixel");
  }
  double loss = 0.0;
  const double eps2 = kLossEpsilon * kLossEpsilon;
  for (int i = 0; i < plane; ++i) {
    const double wt = mask != nullptr ? static_cast<double>(mask[i]) : 1.0;
    const double dz = static_cast<double>(pz[i]) - target[i];
    const double dx = static_cast<double>(px[i]) - target[plane + i];
    const double root = std::sqrt(dz * dz + dx * dx + eps2);
    loss += wt * root;
    const double g = wt / (weight_sum * root);
    gz[i] = static_cast<T>(g * dz);
    gx[i] = static_cast<T>(g * dx);
  }
  return loss / weight_sum;
}

template <typename T>
void zero_like(const ModelParams<T>& params, ModelParams<T>& grads) {
  grads.spec = params.spec;
  grads.encoder.resize(params.encoder.size());
  grads.decoder.resize(params.decoder.size());
  for (std::size_t i = 0; i < params.encoder.size(); ++i) {
    grads.encoder[i].w = Tensor<T>(params.encoder[i].w.dims());
    grads.encoder[i].b = Tensor<T>(params.encoder[i].b.dims());
  }
  for (std::size_t i = 0; i < params.decoder.size(); ++i) {
    grads.decoder[i].w = Tensor<T>(params.decoder[i].w.dims());
    grads.decoder[i].b = Tensor<T>(params.decoder[i].b.dims());
  }
  grads.head.w = Tensor<T>(params.head.w.dims());
  grads.head.b = Tensor<T>(params.head.b.dims());
}

template <typename T>
void relu_mask(const Tensor<T>& post, Tensor<T>& grad) {
  for (std::size_t i = 0; i < post.size(); ++i) {
    if (post[i] <= T{}) {
      grad[i] = T{};
    }
  }
}

template <typename T>
void backward_sample(const ModelParams<T>& params, const SampleTrace<T>& trace,
                     Tensor<T>& d_pred, ModelParams<T>& grads) {
  const NetSpec& spec = params.spec;
  const int s = spec.stages();

  // head
  const Tensor<T>& head_in = trace.dec_out[static_cast<std::size_t>(s - 1)];
  Tensor<T> d_cur(head_in.dims());
  conv_same_backward(head_in.data(), head_in.dim(0), head_in.dim(1),
                     head_in.dim(2), params.head.w.data(),
                     spec.output_channels, NetSpec::kKernel, d_pred.data(),
                     grads.head.w.data(), grads.head.b.data(), d_cur.data());

  // decoder stages in reverse; gradient flowing into each encoder skip
  // output accumulates with the gradient coming through the pooling path.
  std::vector<Tensor<T>> d_skip(static_cast<std::size_t>(s));
  for (int j = s - 1; j >= 0; --j) {
    relu_mask(trace.dec_out[static_cast<std::size_t>(j)], d_cur);
    const Tensor<T>& cat = trace.dec_in[static_cast<std::size_t>(j)];
    Tensor<T> d_cat(cat.dims());
    conv_same_backward(
        cat.data(), cat.dim(0), cat.dim(1), cat.dim(2),
        params.decoder[static_cast<std::size_t>(j)].w.data(),
        spec.decoder_channels[static_cast<std::size_t>(j)], NetSpec::kKernel,
        d_cur.data(), grads.decoder[static_cast<std::size_t>(j)].w.data(),
        grads.decoder[static_cast<std::size_t>(j)].b.data(), d_cat.data());

    const int skip = s - 1 - j;
    const Tensor<T>& f = trace.enc_out[static_cast<std::size_t>(skip)];
    const int up_c = cat.dim(0) - f.dim(0);
    const int up_h = cat.dim(1);
    const int up_w = cat.dim(2);
    // split: first up_c channels feed the unpool, the rest the skip
    d_skip[static_cast<std::size_t>(skip)] = Tensor<T>(f.dims());
    std::copy(d_cat.data() + static_cast<std::size_t>(up_c) * up_h * up_w,
              d_cat.data() + d_cat.size(),
              d_skip[static_cast<std::size_t>(skip)].data());
    Tensor<T> d_down({up_c, up_h / 2, up_w / 2});
    unpool2_backward(d_cat.data(), up_c, up_h / 2, up_w / 2, d_down.data());
    d_cur = std::move(d_down);
  }

  // encoder stages in reverse; d_cur currently holds dL/d(pooled last)
  for (int i = s - 1; i >= 0; --i) {
    const Tensor<T>& f = trace.enc_out[static_cast<std::size_t>(i)];
    Tensor<T> d_f(f.dims());
    maxpool2_backward(d_cur.data(), f.dim(0), f.dim(1), f.dim(2),
                      trace.pool_arg[static_cast<std::size_t>(i)].data(),
                      d_f.data());
    // add the decoder skip gradient
    const Tensor<T>& ds = d_skip[static_cast<std::size_t>(i)];
    for (std::size_t p = 0; p < d_f.size(); ++p) {
      d_f[p] += ds[p];
    }
    relu_mask(f, d_f);
    const Tensor<T>& x = trace.enc_in[static_cast<std::size_t>(i)];
    const int k = i == 0 ? NetSpec::kFirstKernel : NetSpec::kKernel;
    if (i == 0) {
      conv_same_backward(x.data(), x.dim(0), x.dim(1), x.dim(2),
                         params.encoder[0].w.data(),
                         spec.encoder_channels[0], k, d_f.data(),
                         grads.encoder[0].w.data(), grads.encoder[0].b.data(),
                         static_cast<T*>(nullptr));
    } else {
      Tensor<T> d_x(x.dims());
      conv_same_backward(
          x.data(), x.dim(0), x.dim(1), x.dim(2),
          params.encoder[static_cast<std::size_t>(i)].w.data(),
          spec.encoder_channels[static_cast<std::size_t>(i)], k, d_f.data(),
          grads.encoder[static_cast<std::size_t>(i)].w.data(),
          grads.encoder[static_cast<std::size_t>(i)].b.data(), d_x.data());
      d_cur = std::move(d_x);
    }
  }
}

template <typename T>
void check_batch(const ModelParams<T>& params, const Tensor<T>& batch) {
  params.spec.validate();
  if (batch.ndim() != 4 || batch.dim(1) != params.spec.input_channels) {
    throw std::invalid_argument("batch must be [N][C][H][W] matching spec");
  }
  const int divisor = 1 << params.spec.stages();
  if (batch.dim(2) % divisor != 0 || batch.dim(3) % divisor != 0) {
    throw std::invalid_argument(
        "spatial dims must be divisible by 2^stages (got " +
        std::to_string(batch.dim(2)) + "x" + std::to_string(batch.dim(3)) +
        ")");
  }
}

}  // namespace

template <typename T>
ModelParams<T> ModelParams<T>::he_init(const NetSpec& spec,
                                       std::uint64_t seed) {
  spec.validate();
  ModelParams<T> params;
  params.spec = spec;
  Rng rng(seed);
  const auto init_layer = [&rng](int oc, int ic, int k) {
    ConvParam<T> p;
    p.w = Tensor<T>({oc, ic, k, k});
    p.b = Tensor<T>({oc});
    const double stddev = std::sqrt(2.0 / (static_cast<double>(ic) * k * k));
    for (std::size_t i = 0; i < p.w.size(); ++i) {
      p.w[i] = static_cast<T>(rng.normal() * stddev);
    }
    return p;
  };
  int ch = spec.input_channels;
  for (int i = 0; i < spec.stages(); ++i) {
    const int k = i == 0 ? NetSpec::kFirstKernel : NetSpec::kKernel;
    const int oc = spec.encoder_channels[static_cast<std::size_t>(i)];
    params.encoder.push_back(init_layer(oc, ch, k));
    ch = oc;
  }
  for (int j = 0; j < spec.stages(); ++j) {
    params.decoder.push_back(
        init_layer(spec.decoder_channels[static_cast<std::size_t>(j)],
                   spec.decoder_input_channels(j), NetSpec::kKernel));
  }
  params.head = init_layer(
      spec.output_channels,
      spec.decoder_channels[static_cast<std::size_t>(spec.stages() - 1)],
      NetSpec::kKernel);
  return params;
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) {
    n += t->size();
  }
  return n;
}

template <typename T>
std::vector<Tensor<T>*> ModelParams<T>::tensors() {
  std::vector<Tensor<T>*> out;
  for (auto& p : encoder) {
    out.push_back(&p.w);
    out.push_back(&p.b);
  }
  for (auto& p : decoder) {
    out.push_back(&p.w);
    out.push_back(&p.b);
  }
  out.push_back(&head.w);
  out.push_back(&head.b);
  return out;
}

template <typename T>
std::vector<const Tensor<T>*> ModelParams<T>::tensors() const {
  std::vector<const Tensor<T>*> out;
  for (const auto& p : encoder) {
    out.push_back(&p.w);
    out.push_back(&p.b);
  }
  for (const auto& p : decoder) {
    out.push_back(&p.w);
    out.push_back(&p.b);
  }
  out.push_back(&head.w);
  out.push_back(&head.b);
  return out;
}

template <typename T>
Tensor<T> forward(const ModelParams<T>& params, const Tensor<T>& input,
                  int threads) {
  check_batch(params, input);
  const int n = input.dim(0);
  const int h = input.dim(2);
  const int w = input.dim(3);
  Tensor<T> out({n, params.spec.output_channels, h, w});
  const std::size_t in_stride = input.size() / static_cast<std::size_t>(n);
  const std::size_t out_stride = out.size() / static_cast<std::size_t>(n);
  parallel_for(0, n, threads, [&](int i) {
    SampleTrace<T> trace;
    forward_sample(params, input.data() + in_stride * i, h, w, trace);
    std::copy(trace.pred.data(), trace.pred.data() + out_stride,
              out.data() + out_stride * i);
  });
  return out;
}

template <typename T>
BackwardResult<T> backward(const ModelParams<T>& params, const Tensor<T>& batch,
                           const Tensor<T>& targets, const Tensor<T>* masks,
                           int threads) {
  check_batch(params, batch);
  const int n = batch.dim(0);
  const int h = batch.dim(2);
  const int w = batch.dim(3);
  if (targets.ndim() != 4 || targets.dim(0) != n ||
      targets.dim(1) != params.spec.output_channels || targets.dim(2) != h ||
      targets.dim(3) != w) {
    throw std::invalid_argument("target dims do not match batch");
  }
  if (masks != nullptr &&
      (masks->ndim() != 3 || masks->dim(0) != n || masks->dim(1) != h ||
       masks->dim(2) != w)) {
    throw std::invalid_argument("mask dims do not match batch");
  }

  const std::size_t in_stride = batch.size() / static_cast<std::size_t>(n);
  const std::size_t out_stride =
      static_cast<std::size_t>(params.spec.output_channels) * h * w;
  const std::size_t mask_stride = static_cast<std::size_t>(h) * w;

  // Per-sample gradients, reduced in sample order afterwards: results are
  // bit-identical for every thread count.
  std::vector<ModelParams<T>> sample_grads(static_cast<std::size_t>(n));
  std::vector<double> sample_loss(static_cast<std::size_t>(n), 0.0);
  parallel_for(0, n, threads, [&](int i) {
    SampleTrace<T> trace;
    forward_sample(params, batch.data() + in_stride * i, h, w, trace);
    Tensor<T> d_pred(trace.pred.dims());
    sample_loss[static_cast<std::size_t>(i)] = loss_grad(
        trace.pred, targets.data() + out_stride * i,
        masks != nullptr ? masks->data() + mask_stride * i : nullptr, d_pred);
    zero_like(params, sample_grads[static_cast<std::size_t>(i)]);
    backward_sample(params, trace, d_pred,
                    sample_grads[static_cast<std::size_t>(i)]);
  });

  BackwardResult<T> result;
  zero_like(params, result.grads);
  auto total = result.grads.tensors();
  const T inv_n = static_cast<T>(1.0 / n);
  for (int i = 0; i < n; ++i) {
    auto parts = sample_grads[static_cast<std::size_t>(i)].tensors();
    for (std::size_t t = 0; t < total.size(); ++t) {
      T* dst = total[t]->data();
      const T* src = parts[t]->data();
      for (std::size_t p = 0; p < total[t]->size(); ++p) {
        dst[p] += inv_n * src[p];
      }
    }
    result.loss += sample_loss[static_cast<std::size_t>(i)];
  }
  result.loss /= n;
  if (!std::isfinite(result.loss)) {
    throw std::runtime_error("non-finite training loss");
  }
  return result;
}

template <typename T>
double loss_only(const ModelParams<T>& params, const Tensor<T>& batch,
                 const Tensor<T>& targets, const Tensor<T>* masks) {
  check_batch(params, batch);
  const int n = batch.dim(0);
  const int h = batch.dim(2);
  const int w = batch.dim(3);
  const std::size_t in_stride = batch.size() / static_cast<std::size_t>(n);
  const std::size_t out_stride =
      static_cast<std::size_t>(params.spec.output_channels) * h * w;
  const std::size_t mask_stride = static_cast<std::size_t>(h) * w;
  double loss = 0.0;
  SampleTrace<T> trace;
  for (int i = 0; i < n; ++i) {
    forward_sample(params, batch.data() + in_stride * i, h, w, trace);
    Tensor<T> d_pred(trace.pred.dims());
    loss += loss_grad(trace.pred, targets.data() + out_stride * i,
                      masks != nullptr ? masks->data() + mask_stride * i
                                       : nullptr,
                      d_pred);
  }
  return loss / n;
}

// explicit instantiations: float for training, double for gradient checks
template void conv_same<float>(const float*, int, int, int, const float*,
                               const float*, int, int, bool, float*);
template void conv_same<double>(const double*, int, int, int, const double*,
                                const double*, int, int, bool, double*);
template void conv_same_backward<float>(const float*, int, int, int,
                                        const float*, int, int, const float*,
                                        float*, float*, float*);
template void conv_same_backward<double>(const double*, int, int, int,
                                         const double*, int, int,
                                         const double*, double*, double*,
                                         double*);
template void maxpool2<float>(const float*, int, int, int, float*,
                              std::uint8_t*);
template void maxpool2<double>(const double*, int, int, int, double*,
                               std::uint8_t*);
template void maxpool2_backward<float>(const float*, int, int, int,
                                       const std::uint8_t*, float*);
template void maxpool2_backward<double>(const double*, int, int, int,
                                        const std::uint8_t*, double*);
template void unpool2<float>(const float*, int, int, int, float*);
template void unpool2<double>(const double*, int, int, int, double*);
template void unpool2_backward<float>(const float*, int, int, int, float*);
template void unpool2_backward<double>(const double*, int, int, int, double*);

template struct ModelParams<float>;
template struct ModelParams<double>;
template Tensor<float> forward<float>(const ModelParams<float>&,
                                      const Tensor<float>&, int);
template Tensor<double> forward<double>(const ModelParams<double>&,
                                        const Tensor<double>&, int);
template BackwardResult<float> backward<float>(const ModelParams<float>&,
                                               const Tensor<float>&,
                                               const Tensor<float>&,
                                               const Tensor<float>*, int);
template BackwardResult<double> backward<double>(const ModelParams<double>&,
                                                 const Tensor<double>&,
                                                 const Tensor<double>&,
                                                 const Tensor<double>*, int);
template double loss_only<float>(const ModelParams<float>&,
                                 const Tensor<float>&, const Tensor<float>&,
                                 const Tensor<float>*);
template double loss_only<double>(const ModelParams<double>&,
                                  const Tensor<double>&,
                                  const Tensor<double>&,
                                  const Tensor<double>*);

}  // namespace savfi::cnn
