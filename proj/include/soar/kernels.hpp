#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace soar::kernels {

// Channels-last 3-D convolution kernels over (H, W, T, C) volumes. Weights are
// laid out [kh][kw][kt][c_in][c_out]. Each operation has an OpenMP version and
// a serial *_reference twin used by the tests and the benchmark. The parallel
// versions partition work so that every output element is produced by exactly
// one thread in a fixed summation order, which keeps results independent of
// the thread count.

struct Volume {
  std::size_t h = 0, w = 0, t = 0, c = 0;
  std::size_t count() const { return h * w * t * c; }
  std::size_t sites() const { return h * w * t; }
  bool operator==(const Volume&) const = default;
};

using Triple = std::array<std::size_t, 3>;

/// Strided, zero-padded convolution.
struct ConvGeometry {
  Volume in;
  std::size_t c_out = 0;
  Triple kernel{3, 3, 3};
  Triple stride{1, 1, 1};
  Triple pad{1, 1, 1};

  Volume out() const;
  std::size_t weight_count() const { return kernel[0] * kernel[1] * kernel[2] * in.c * c_out; }
};

/// Transposed convolution without padding: out = (in - 1) * stride + kernel.
struct TConvGeometry {
  Volume in;
  std::size_t c_out = 0;
  Triple kernel{2, 2, 2};
  Triple stride{2, 2, 2};

  Volume out() const;
  std::size_t weight_count() const { return kernel[0] * kernel[1] * kernel[2] * in.c * c_out; }
};

// y = conv(x) + b  (y overwritten)
template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y);
// gx = d/dx  (gx overwritten)
template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx);
// gw += d/dw, gb += d/db
template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy,
                            std::span<T> gw, std::span<T> gb);

template <typename T>
void conv3d_forward_reference(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y);
template <typename T>
void conv3d_backward_input_reference(const ConvGeometry& g, std::span<const T> gy,
                                     std::span<const T> w, std::span<T> gx);
template <typename T>
void conv3d_backward_params_reference(const ConvGeometry& g, std::span<const T> x,
                                      std::span<const T> gy, std::span<T> gw, std::span<T> gb);

template <typename T>
void tconv3d_forward(const TConvGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> b, std::span<T> y);
template <typename T>
void tconv3d_backward_input(const TConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                            std::span<T> gx);
template <typename T>
void tconv3d_backward_params(const TConvGeometry& g, std::span<const T> x, std::span<const T> gy,
                             std::span<T> gw, std::span<T> gb);

template <typename T>
void tconv3d_forward_reference(const TConvGeometry& g, std::span<const T> x, std::span<const T> w,
                               std::span<const T> b, std::span<T> y);
template <typename T>
void tconv3d_backward_input_reference(const TConvGeometry& g, std::span<const T> gy,
                                      std::span<const T> w, std::span<T> gx);
template <typename T>
void tconv3d_backward_params_reference(const TConvGeometry& g, std::span<const T> x,
                                       std::span<const T> gy, std::span<T> gw, std::span<T> gb);

}  // namespace soar::kernels
