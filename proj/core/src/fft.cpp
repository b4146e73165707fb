#include "savfi/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>

namespace savfi::fft {
namespace {

// One cached in-place plan per (rows, cols, sign). Plans are created on an
// aligned scratch buffer and re-executed with the new-array interface on
// fftw_malloc'd buffers, which carry the same alignment guarantee.
class PlanCache {
public:
  fftw_plan get(int rows, int cols, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(rows, cols, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) {
      return it->second;
    }
    fftw_complex* scratch = fftw_alloc_complex(
        static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
    if (scratch == nullptr) {
      throw std::bad_alloc();
    }
    fftw_plan plan =
        rows == 1
            ? fftw_plan_dft_1d(cols, scratch, scratch, sign, FFTW_ESTIMATE)
            : fftw_plan_dft_2d(rows, cols, scratch, scratch, sign,
                               FFTW_ESTIMATE);
    fftw_free(scratch);
    if (plan == nullptr) {
      throw std::runtime_error("fftw plan creation failed");
    }
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

void execute(std::complex<double>* data, int rows, int cols, bool inverse) {
  const std::size_t n =
      static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  const int sign = inverse ? FFTW_BACKWARD : FFTW_FORWARD;
  fftw_plan plan = cache().get(rows, cols, sign);
  fftw_complex* buf = fftw_alloc_complex(n);
  if (buf == nullptr) {
    throw std::bad_alloc();
  }
  std::memcpy(buf, data, n * sizeof(fftw_complex));
  fftw_execute_dft(plan, buf, buf);
  std::memcpy(data, buf, n * sizeof(fftw_complex));
  fftw_free(buf);
  if (inverse) {
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      data[i] *= scale;
    }
  }
}

}  // namespace

void c2c_1d(std::complex<double>* data, int n, bool inverse) {
  execute(data, 1, n, inverse);
}

void c2c_2d(std::complex<double>* data, int rows, int cols, bool inverse) {
  execute(data, rows, cols, inverse);
}

}  // namespace savfi::fft
