#include "soar/tensor.hpp"

#include <limits>
#include <string>

namespace soar {

ClipTensor::ClipTensor(Dims4 dims, float fill) : dims_(dims), values_(dims.count(), fill) {}

ClipTensor::ClipTensor(Dims4 dims, std::vector<float> values)
    : dims_(dims), values_(std::move(values)) {
  if (values_.size() != dims_.count()) {
    throw ShapeError("tensor", "clip payload has " + std::to_string(values_.size()) +
                                   " values, dims require " + std::to_string(dims_.count()));
  }
}

Tensor::Tensor(std::vector<std::size_t> s, float fill)
    : shape(std::move(s)), values(count_of(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> s, std::vector<float> v)
    : shape(std::move(s)), values(std::move(v)) {
  if (values.size() != count_of(shape)) {
    throw ShapeError("tensor", "payload size does not match shape");
  }
}

std::size_t Tensor::count_of(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) {
    if (d != 0 && n > std::numeric_limits<std::size_t>::max() / d) {
      throw SizeError("tensor", "element count overflows size_t");
    }
    n *= d;
  }
  return n;
}

ClipTensor to_clip(Tensor t) {
  if (t.shape.size() != 4) {
    throw ShapeError("tensor", "expected rank-4 clip, got rank " + std::to_string(t.shape.size()));
  }
  Dims4 d{t.shape[0], t.shape[1], t.shape[2], t.shape[3]};
  return ClipTensor(d, std::move(t.values));
}

Tensor to_tensor(const ClipTensor& clip) {
  const auto& d = clip.dims();
  return Tensor({d.h, d.w, d.t, d.d}, clip.storage());
}

}  // namespace soar
