#pragma once

#include <complex>
#include <vector>

#include "savfi/common.hpp"
#include "savfi/ussim.hpp"

namespace savfi {

// Square-pixel reconstruction grid; (row, col) -> (z, x) with pixel centers
// at x0 + col * pitch, z0 + row * pitch.
struct ImageGrid {
  double x0_m = 0.0;
  double z0_m = 0.0;
  double pitch_m = 0.0;
  int width = 0;
  int height = 0;

  double x_at(int col) const { return x0_m + col * pitch_m; }
  double z_at(int row) const { return z0_m + row * pitch_m; }
  std::size_t pixels() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  // Grid centered laterally on the array, covering depth_top .. depth_top +
  // size*pitch; matches the window-sample pixel layout.
  static ImageGrid centered(int size, double pitch_m, double depth_top_m) {
    ImageGrid g;
    g.width = size;
    g.height = size;
    g.pitch_m = pitch_m;
    g.x0_m = -0.5 * (size - 1) * pitch_m;
    g.z0_m = depth_top_m + 0.5 * pitch_m;
    return g;
  }
};

struct IqImage {
  std::vector<std::complex<float>> pixels;  // [height][width]
  ImageGrid grid;
  int frame_index = 0;
  double frame_dt_s = 0.0;
};

// Contiguous [n_frames][H][W] complex stack (file layout order).
struct IqStack {
  std::vector<std::complex<float>> data;
  int n_frames = 0;
  int height = 0;
  int width = 0;
  ImageGrid grid;
  double frame_dt_s = 0.0;

  const std::complex<float>* frame(int f) const {
    return data.data() + static_cast<std::size_t>(f) * height * width;
  }
  std::complex<float>* frame(int f) {
    return data.data() + static_cast<std::size_t>(f) * height * width;
  }
};

// Delay-and-sum of one transmit event onto the grid. Hann receive
// apodization over the depth-dependent aperture z / f_number; 2-point
// interpolation between RF samples; delays outside the recorded window
// contribute zero.
std::vector<float> das_event(const ChannelData& data, int event,
                             const ImageGrid& grid, double f_number = 1.5,
                             int threads = 1);

// Pixel-wise sum of per-event images (coherent compounding).
std::vector<float> compound(const std::vector<std::vector<float>>& images);

// Per-column analytic signal along the axial direction via the FFT method:
// zero negative frequencies, double positive, keep DC and Nyquist.
IqImage analytic_signal(const std::vector<float>& rf, const ImageGrid& grid,
                        int frame_index = 0, double frame_dt_s = 0.0);

// 20 log10(|iq| / max|iq|) floored at -dynamic_range_db.
std::vector<float> bmode(const IqImage& iq, double dynamic_range_db = 60.0);

// Whole pipeline: DAS each event, compound per frame, analytic signal.
// frame_dt = n_virtual_sources / prf.
IqStack beamform_frames(const ChannelData& data, const ImageGrid& grid,
                        double f_number = 1.5, int threads = 1);

std::vector<IqImage> stack_to_frames(const IqStack& stack);
IqStack frames_to_stack(const std::vector<IqImage>& frames);

}  // namespace savfi
