#pragma once

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace savfi::cnn {

// Dense row-major tensor, channels-first. float for training, double for
// the finite-difference gradient-check mode.
template <typename T>
class Tensor {
public:
  Tensor() = default;

  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    std::size_t n = 1;
    for (int d : dims_) {
      if (d <= 0) {
        throw std::invalid_argument("tensor dims must be positive");
      }
      n *= static_cast<std::size_t>(d);
    }
    data_.assign(n, T{});
  }

  Tensor(std::initializer_list<int> dims)
      : Tensor(std::vector<int>(dims)) {}

  const std::vector<int>& dims() const { return dims_; }
  int dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  int ndim() const { return static_cast<int>(dims_.size()); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  void fill(T v) { data_.assign(data_.size(), v); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(dims_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out[i] = static_cast<U>(data_[i]);
    }
    return out;
  }

private:
  std::vector<int> dims_;
  std::vector<T> data_;
};

}  // namespace savfi::cnn
