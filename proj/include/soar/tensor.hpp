#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "soar/errors.hpp"

namespace soar {

/// Extent of a video clip in (H, W, T, D) order.
struct Dims4 {
  std::size_t h = 0;
  std::size_t w = 0;
  std::size_t t = 0;
  std::size_t d = 0;

  std::size_t count() const { return h * w * t * d; }
  std::size_t pixels() const { return h * w * t; }
  bool operator==(const Dims4&) const = default;
};

/// Rank-4 float array laid out row-major in (H, W, T, D) order; the channel
/// index varies fastest.
class ClipTensor {
 public:
  ClipTensor() = default;
  explicit ClipTensor(Dims4 dims, float fill = 0.0f);
  ClipTensor(Dims4 dims, std::vector<float> values);

  const Dims4& dims() const { return dims_; }
  std::size_t size() const { return values_.size(); }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t t, std::size_t d) const {
    return ((i * dims_.w + j) * dims_.t + t) * dims_.d + d;
  }
  float& at(std::size_t i, std::size_t j, std::size_t t, std::size_t d) {
    return values_[offset(i, j, t, d)];
  }
  float at(std::size_t i, std::size_t j, std::size_t t, std::size_t d) const {
    return values_[offset(i, j, t, d)];
  }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }
  std::vector<float>& storage() { return values_; }
  const std::vector<float>& storage() const { return values_; }

  bool operator==(const ClipTensor&) const = default;

 private:
  Dims4 dims_{};
  std::vector<float> values_;
};

/// Arbitrary-rank float array used for model parameters and VTENSOR payloads.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, float fill = 0.0f);
  Tensor(std::vector<std::size_t> s, std::vector<float> v);

  static std::size_t count_of(std::span<const std::size_t> shape);
  std::size_t size() const { return values.size(); }
  bool operator==(const Tensor&) const = default;
};

ClipTensor to_clip(Tensor t);
Tensor to_tensor(const ClipTensor& clip);

}  // namespace soar
