#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <variant>
#include <vector>

#include "savfi/common.hpp"

namespace savfi {

// On-disk tensor container used by every pipeline stage:
//   magic "VFIT" | version u8 (=1) | dtype u8 | ndims u8 |
//   ndims x u64 little-endian dims | row-major little-endian payload.
// dtype 0 = float32, 1 = float64, 2 = complex64 (interleaved float32 pairs).

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1, C64 = 2 };

enum class TensorIoErrc {
  BadMagic,
  BadVersion,
  BadDtype,
  BadHeader,
  Truncated,
  Io,
};

class TensorIoError : public DataError {
public:
  TensorIoError(TensorIoErrc code, const std::string& what)
      : DataError(what), code_(code) {}
  TensorIoErrc code() const { return code_; }

private:
  TensorIoErrc code_;
};

struct TensorData {
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>,
               std::vector<std::complex<float>>>
      values;

  Dtype dtype() const { return static_cast<Dtype>(values.index()); }
  std::uint64_t element_count() const;

  std::vector<float>& f32() { return std::get<std::vector<float>>(values); }
  const std::vector<float>& f32() const {
    return std::get<std::vector<float>>(values);
  }
  std::vector<double>& f64() { return std::get<std::vector<double>>(values); }
  const std::vector<double>& f64() const {
    return std::get<std::vector<double>>(values);
  }
  std::vector<std::complex<float>>& c64() {
    return std::get<std::vector<std::complex<float>>>(values);
  }
  const std::vector<std::complex<float>>& c64() const {
    return std::get<std::vector<std::complex<float>>>(values);
  }
};

TensorData make_tensor(std::vector<std::uint64_t> dims, std::vector<float> v);
TensorData make_tensor(std::vector<std::uint64_t> dims, std::vector<double> v);
TensorData make_tensor(std::vector<std::uint64_t> dims,
                       std::vector<std::complex<float>> v);

// Value-level bit-exact comparison (distinguishes -0.0 from 0.0, NaN == NaN).
bool bitwise_equal(const TensorData& a, const TensorData& b);

void write_tensor(const std::filesystem::path& path, const TensorData& t);
TensorData read_tensor(const std::filesystem::path& path);

// Header-only read: dims and dtype, plus a payload-size check against the
// file length. Used by manifest validation to avoid loading payloads.
struct TensorHeader {
  Dtype dtype;
  std::vector<std::uint64_t> dims;
};
TensorHeader read_tensor_header(const std::filesystem::path& path);

}  // namespace savfi
