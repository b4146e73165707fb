#include "savfi/tensorfile.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

namespace savfi {
namespace {

constexpr std::array<char, 4> kMagic = {'V', 'F', 'I', 'T'};
constexpr std::uint8_t kVersion = 1;

static_assert(sizeof(float) == 4 && sizeof(double) == 8);

std::size_t dtype_size(Dtype d) {
  switch (d) {
    case Dtype::F32:
      return 4;
    case Dtype::F64:
      return 8;
    case Dtype::C64:
      return 8;
  }
  throw TensorIoError(TensorIoErrc::BadDtype, "unsupported dtype");
}

void put_u64le(std::ostream& os, std::uint64_t v) {
  std::array<unsigned char, 8> b;
  for (int i = 0; i < 8; ++i) {
    b[static_cast<std::size_t>(i)] =
        static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  }
  os.write(reinterpret_cast<const char*>(b.data()), 8);
}

std::uint64_t get_u64le(std::istream& is) {
  std::array<unsigned char, 8> b;
  is.read(reinterpret_cast<char*>(b.data()), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(b[static_cast<std::size_t>(i)])
         << (8 * i);
  }
  return v;
}

// Payload words are 32- or 64-bit IEEE floats, little-endian on disk.
template <typename Word>
void write_words(std::ostream& os, const Word* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    os.write(reinterpret_cast<const char*>(data),
             static_cast<std::streamsize>(count * sizeof(Word)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      Word w = data[i];
      auto bytes = std::bit_cast<std::array<unsigned char, sizeof(Word)>>(w);
      for (std::size_t j = 0; j < sizeof(Word) / 2; ++j) {
        std::swap(bytes[j], bytes[sizeof(Word) - 1 - j]);
      }
      os.write(reinterpret_cast<const char*>(bytes.data()), sizeof(Word));
    }
  }
}

template <typename Word>
void read_words(std::istream& is, Word* data, std::size_t count) {
  is.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(count * sizeof(Word)));
  if constexpr (std::endian::native != std::endian::little) {
    for (std::size_t i = 0; i < count; ++i) {
      auto bytes =
          std::bit_cast<std::array<unsigned char, sizeof(Word)>>(data[i]);
      for (std::size_t j = 0; j < sizeof(Word) / 2; ++j) {
        std::swap(bytes[j], bytes[sizeof(Word) - 1 - j]);
      }
      data[i] = std::bit_cast<Word>(bytes);
    }
  }
}

std::uint64_t product(const std::vector<std::uint64_t>& dims) {
  std::uint64_t n = 1;
  for (std::uint64_t d : dims) {
    n *= d;
  }
  return n;
}

TensorHeader read_header(std::istream& is, const std::filesystem::path& path) {
  std::array<char, 4> magic{};
  is.read(magic.data(), 4);
  if (!is || magic != kMagic) {
    throw TensorIoError(TensorIoErrc::BadMagic,
                        "bad magic in " + path.string());
  }
  std::uint8_t version = 0;
  std::uint8_t dtype = 0;
  std::uint8_t ndims = 0;
  is.read(reinterpret_cast<char*>(&version), 1);
  is.read(reinterpret_cast<char*>(&dtype), 1);
  is.read(reinterpret_cast<char*>(&ndims), 1);
  if (!is) {
    throw TensorIoError(TensorIoErrc::BadHeader,
                        "truncated header in " + path.string());
  }
  if (version != kVersion) {
    throw TensorIoError(TensorIoErrc::BadVersion,
                        "unsupported version " + std::to_string(version) +
                            " in " + path.string());
  }
  if (dtype > 2) {
    throw TensorIoError(
        TensorIoErrc::BadDtype,
        "unsupported dtype " + std::to_string(dtype) + " in " + path.string());
  }
  if (ndims < 1) {
    throw TensorIoError(TensorIoErrc::BadHeader,
                        "ndims must be >= 1 in " + path.string());
  }
  TensorHeader h;
  h.dtype = static_cast<Dtype>(dtype);
  h.dims.resize(ndims);
  for (std::uint8_t i = 0; i < ndims; ++i) {
    h.dims[i] = get_u64le(is);
  }
  if (!is) {
    throw TensorIoError(TensorIoErrc::BadHeader,
                        "truncated dims in " + path.string());
  }
  return h;
}

}  // namespace

std::uint64_t TensorData::element_count() const { return product(dims); }

TensorData make_tensor(std::vector<std::uint64_t> dims, std::vector<float> v) {
  return TensorData{std::move(dims), std::move(v)};
}
TensorData make_tensor(std::vector<std::uint64_t> dims,
                       std::vector<double> v) {
  return TensorData{std::move(dims), std::move(v)};
}
TensorData make_tensor(std::vector<std::uint64_t> dims,
                       std::vector<std::complex<float>> v) {
  return TensorData{std::move(dims), std::move(v)};
}

bool bitwise_equal(const TensorData& a, const TensorData& b) {
  if (a.dims != b.dims || a.values.index() != b.values.index()) {
    return false;
  }
  const auto cmp = [](const auto& x, const auto& y) {
    return x.size() == y.size() &&
           (x.empty() ||
            std::memcmp(x.data(), y.data(),
                        x.size() * sizeof(x.front())) == 0);
  };
  switch (a.dtype()) {
    case Dtype::F32:
      return cmp(a.f32(), b.f32());
    case Dtype::F64:
      return cmp(a.f64(), b.f64());
    case Dtype::C64:
      return cmp(a.c64(), b.c64());
  }
  return false;
}

void write_tensor(const std::filesystem::path& path, const TensorData& t) {
  if (t.dims.empty()) {
    throw TensorIoError(TensorIoErrc::BadHeader, "ndims must be >= 1");
  }
  if (t.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
    throw TensorIoError(TensorIoErrc::BadHeader, "too many dims");
  }
  for (std::uint64_t d : t.dims) {
    if (d == 0) {
      throw TensorIoError(TensorIoErrc::BadHeader, "zero-sized dim");
    }
  }
  const std::uint64_t n = product(t.dims);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) {
    throw TensorIoError(TensorIoErrc::Io, "cannot open " + path.string());
  }
  os.write(kMagic.data(), 4);
  const std::uint8_t version = kVersion;
  const std::uint8_t dtype = static_cast<std::uint8_t>(t.dtype());
  const std::uint8_t ndims = static_cast<std::uint8_t>(t.dims.size());
  os.write(reinterpret_cast<const char*>(&version), 1);
  os.write(reinterpret_cast<const char*>(&dtype), 1);
  os.write(reinterpret_cast<const char*>(&ndims), 1);
  for (std::uint64_t d : t.dims) {
    put_u64le(os, d);
  }
  switch (t.dtype()) {
    case Dtype::F32:
      if (t.f32().size() != n) {
        throw TensorIoError(TensorIoErrc::BadHeader, "payload/dims mismatch");
      }
      write_words(os, t.f32().data(), n);
      break;
    case Dtype::F64:
      if (t.f64().size() != n) {
        throw TensorIoError(TensorIoErrc::BadHeader, "payload/dims mismatch");
      }
      write_words(os, t.f64().data(), n);
      break;
    case Dtype::C64:
      if (t.c64().size() != n) {
        throw TensorIoError(TensorIoErrc::BadHeader, "payload/dims mismatch");
      }
      // std::complex<float> is layout-compatible with float[2]: re then im,
      // which is exactly the interleaving the format specifies.
      write_words(os, reinterpret_cast<const float*>(t.c64().data()), 2 * n);
      break;
  }
  if (!os) {
    throw TensorIoError(TensorIoErrc::Io, "write failed for " + path.string());
  }
}

TensorData read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw TensorIoError(TensorIoErrc::Io, "cannot open " + path.string());
  }
  const TensorHeader h = read_header(is, path);
  const std::uint64_t n = product(h.dims);
  TensorData t;
  t.dims = h.dims;
  switch (h.dtype) {
    case Dtype::F32: {
      std::vector<float> v(n);
      read_words(is, v.data(), n);
      t.values = std::move(v);
      break;
    }
    case Dtype::F64: {
      std::vector<double> v(n);
      read_words(is, v.data(), n);
      t.values = std::move(v);
      break;
    }
    case Dtype::C64: {
      std::vector<std::complex<float>> v(n);
      read_words(is, reinterpret_cast<float*>(v.data()), 2 * n);
      t.values = std::move(v);
      break;
    }
  }
  if (!is) {
    throw TensorIoError(TensorIoErrc::Truncated,
                        "truncated payload in " + path.string());
  }
  return t;
}

TensorHeader read_tensor_header(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw TensorIoError(TensorIoErrc::Io, "cannot open " + path.string());
  }
  const TensorHeader h = read_header(is, path);
  const auto header_bytes =
      static_cast<std::uint64_t>(7 + 8 * h.dims.size());
  const std::uint64_t expected =
      header_bytes + product(h.dims) * dtype_size(h.dtype);
  std::error_code ec;
  const std::uint64_t actual = std::filesystem::file_size(path, ec);
  if (ec) {
    throw TensorIoError(TensorIoErrc::Io, "cannot stat " + path.string());
  }
  if (actual != expected) {
    throw TensorIoError(TensorIoErrc::Truncated,
                        "payload size mismatch in " + path.string());
  }
  return h;
}

}  // namespace savfi
