#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace caug {

// Dense row-major tensor. Rank 1 or 2 is all the models need.
template <typename T>
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<T> data;

  Tensor() = default;

  explicit Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
    data.assign(count(shape), T(0));
  }

  Tensor(std::vector<std::size_t> s, std::vector<T> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != count(shape)) {
      throw std::invalid_argument("tensor: shape/data size mismatch");
    }
  }

  static std::size_t count(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
  }

  static Tensor zeros(std::vector<std::size_t> s) { return Tensor(std::move(s)); }

  static Tensor row(std::vector<T> values) {
    std::size_t n = values.size();
    return Tensor({1, n}, std::move(values));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  std::size_t rows() const {
    if (shape.size() != 2) throw std::invalid_argument("tensor: rows() needs rank 2");
    return shape[0];
  }
  std::size_t cols() const {
    if (shape.size() != 2) throw std::invalid_argument("tensor: cols() needs rank 2");
    return shape[1];
  }

  T& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  const T& at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }
};

template <typename T>
std::string shape_string(const Tensor<T>& t) {
  std::string s = "[";
  for (std::size_t i = 0; i < t.shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(t.shape[i]);
  }
  return s + "]";
}

}  // namespace caug
