#include "savfi/beamform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "savfi/fft.hpp"
#include "savfi/parallel.hpp"

namespace savfi {

std::vector<float> das_event(const ChannelData& data, int event,
                             const ImageGrid& grid, double f_number,
                             int threads) {
  if (event < 0 || event >= data.n_events) {
    throw std::invalid_argument("event index out of range");
  }
  if (grid.width <= 0 || grid.height <= 0 || grid.pitch_m <= 0.0) {
    throw std::invalid_argument("invalid image grid");
  }
  if (f_number <= 0.0) {
    throw std::invalid_argument("f-number must be > 0");
  }
  const Vec2 source =
      data.sources[static_cast<std::size_t>(event) % data.sources.size()];
  const double center_dist = source.norm();
  const float* rf = data.event(event);
  const double inv_c = 1.0 / data.c_mps;
  std::vector<float> image(grid.pixels(), 0.0f);

  parallel_for(0, grid.height, threads, [&](int row) {
    const double z = grid.z_at(row);
    const double half_aperture = 0.5 * z / f_number;
    float* out_row = image.data() + static_cast<std::size_t>(row) * grid.width;
    for (int col = 0; col < grid.width; ++col) {
      const Vec2 p{grid.x_at(col), z};
      const double tx_delay = ((p - source).norm() - center_dist) * inv_c;
      double acc = 0.0;
      for (int e = 0; e < data.n_elements; ++e) {
        const double ex = data.element_pitch_m * (e - 0.5 * (data.n_elements - 1));
        const double dx = std::abs(p.x - ex);
        if (dx > half_aperture) {
          continue;
        }
        // Hann over the dynamic receive aperture
        const double w =
            0.5 + 0.5 * std::cos(std::numbers::pi * dx / half_aperture);
        const double rx_delay = std::sqrt(dx * dx + z * z) * inv_c;
        const double pos = (tx_delay + rx_delay - data.t0_s) * data.fs_hz;
        const auto i0 = static_cast<int>(std::floor(pos));
        if (i0 < 0 || i0 + 1 >= data.n_time) {
          continue;  // outside the recorded window
        }
        const double frac = pos - i0;
        const float* line = rf + static_cast<std::size_t>(e) * data.n_time;
        acc += w * ((1.0 - frac) * line[i0] + frac * line[i0 + 1]);
      }
      out_row[col] = static_cast<float>(acc);
    }
  });
  return image;
}

std::vector<float> compound(const std::vector<std::vector<float>>& images) {
  if (images.empty()) {
    throw std::invalid_argument("cannot compound an empty image list");
  }
  std::vector<float> out = images.front();
  for (std::size_t k = 1; k < images.size(); ++k) {
    if (images[k].size() != out.size()) {
      throw std::invalid_argument("compound: image sizes differ");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] += images[k][i];
    }
  }
  return out;
}

IqImage analytic_signal(const std::vector<float>& rf, const ImageGrid& grid,
                        int frame_index, double frame_dt_s) {
  const int h = grid.height;
  const int w = grid.width;
  if (h < 8) {
    throw std::invalid_argument("analytic signal needs height >= 8");
  }
  if (rf.size() != grid.pixels()) {
    throw std::invalid_argument("rf size does not match grid");
  }
  IqImage iq;
  iq.grid = grid;
  iq.frame_index = frame_index;
  iq.frame_dt_s = frame_dt_s;
  iq.pixels.resize(grid.pixels());

  std::vector<std::complex<double>> column(static_cast<std::size_t>(h));
  for (int col = 0; col < w; ++col) {
    for (int row = 0; row < h; ++row) {
      column[static_cast<std::size_t>(row)] = {
          static_cast<double>(rf[static_cast<std::size_t>(row) * w + col]),
          0.0};
    }
    fft::c2c_1d(column.data(), h, false);
    // analytic-signal spectrum weights: keep DC (and Nyquist when h even),
    // double positive frequencies, zero negative ones
    const int nyquist = h / 2;
    for (int k = 1; k < nyquist; ++k) {
      column[static_cast<std::size_t>(k)] *= 2.0;
    }
    if (h % 2 != 0) {
      column[static_cast<std::size_t>(nyquist)] *= 2.0;
    }
    for (int k = nyquist + 1; k < h; ++k) {
      column[static_cast<std::size_t>(k)] = 0.0;
    }
    fft::c2c_1d(column.data(), h, true);
    for (int row = 0; row < h; ++row) {
      const auto& z = column[static_cast<std::size_t>(row)];
      iq.pixels[static_cast<std::size_t>(row) * w + col] = {
          rf[static_cast<std::size_t>(row) * w + col],  // exact real part
          static_cast<float>(z.imag())};
    }
  }
  return iq;
}

std::vector<float> bmode(const IqImage& iq, double dynamic_range_db) {
  double peak = 0.0;
  for (const auto& z : iq.pixels) {
    peak = std::max(peak, static_cast<double>(std::abs(z)));
  }
  std::vector<float> db(iq.pixels.size(),
                        static_cast<float>(-dynamic_range_db));
  if (peak == 0.0) {
    return db;
  }
  for (std::size_t i = 0; i < iq.pixels.size(); ++i) {
    const double mag = std::abs(iq.pixels[i]);
    if (mag > 0.0) {
      db[i] = static_cast<float>(std::max(
          -dynamic_range_db, 20.0 * std::log10(mag / peak)));
    }
  }
  return db;
}

IqStack beamform_frames(const ChannelData& data, const ImageGrid& grid,
                        double f_number, int threads) {
  const int n_sources = static_cast<int>(data.sources.size());
  if (n_sources < 1 || data.n_events % n_sources != 0) {
    throw DataError("channel data does not hold whole compounded frames");
  }
  const int n_frames = data.n_events / n_sources;
  const double frame_dt = n_sources / data.prf_hz;

  IqStack stack;
  stack.n_frames = n_frames;
  stack.height = grid.height;
  stack.width = grid.width;
  stack.grid = grid;
  stack.frame_dt_s = frame_dt;
  stack.data.resize(static_cast<std::size_t>(n_frames) * grid.pixels());

  for (int f = 0; f < n_frames; ++f) {
    std::vector<std::vector<float>> events;
    events.reserve(static_cast<std::size_t>(n_sources));
    for (int s = 0; s < n_sources; ++s) {
      events.push_back(
          das_event(data, f * n_sources + s, grid, f_number, threads));
    }
    const std::vector<float> rf = compound(events);
    const IqImage iq = analytic_signal(rf, grid, f, frame_dt);
    std::copy(iq.pixels.begin(), iq.pixels.end(), stack.frame(f));
  }
  return stack;
}

std::vector<IqImage> stack_to_frames(const IqStack& stack) {
  std::vector<IqImage> frames;
  frames.reserve(static_cast<std::size_t>(stack.n_frames));
  for (int f = 0; f < stack.n_frames; ++f) {
    IqImage img;
    img.grid = stack.grid;
    img.frame_index = f;
    img.frame_dt_s = stack.frame_dt_s;
    img.pixels.assign(stack.frame(f), stack.frame(f) + stack.grid.pixels());
    frames.push_back(std::move(img));
  }
  return frames;
}

IqStack frames_to_stack(const std::vector<IqImage>& frames) {
  if (frames.empty()) {
    throw std::invalid_argument("empty frame list");
  }
  IqStack stack;
  stack.n_frames = static_cast<int>(frames.size());
  stack.grid = frames.front().grid;
  stack.height = stack.grid.height;
  stack.width = stack.grid.width;
  stack.frame_dt_s = frames.front().frame_dt_s;
  stack.data.resize(static_cast<std::size_t>(stack.n_frames) *
                    stack.grid.pixels());
  for (int f = 0; f < stack.n_frames; ++f) {
    if (frames[static_cast<std::size_t>(f)].pixels.size() !=
        stack.grid.pixels()) {
      throw std::invalid_argument("frame sizes differ");
    }
    std::copy(frames[static_cast<std::size_t>(f)].pixels.begin(),
              frames[static_cast<std::size_t>(f)].pixels.end(),
              stack.frame(f));
  }
  return stack;
}

}  // namespace savfi
