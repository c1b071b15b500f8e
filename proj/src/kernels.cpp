#include "soar/kernels.hpp"

#include <algorithm>
#include <vector>

#include "soar/errors.hpp"

namespace soar::kernels {

namespace {

std::size_t conv_extent(std::size_t in, std::size_t k, std::size_t s, std::size_t p) {
  if (in + 2 * p < k) return 0;
  return (in + 2 * p - k) / s + 1;
}

std::size_t site(const Volume& v, std::size_t i, std::size_t j, std::size_t t) {
  return (i * v.w + j) * v.t + t;
}

template <typename T>
void check_sizes(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw ShapeError("kernels", std::string(what) + " has " + std::to_string(got) +
                                    " elements, expected " + std::to_string(want));
  }
}

// Input coordinate for output index o under tap k, or -1 if outside.
inline std::ptrdiff_t conv_input(std::size_t o, std::size_t k, std::size_t s, std::size_t p,
                                 std::size_t extent) {
  const auto i = static_cast<std::ptrdiff_t>(o * s + k) - static_cast<std::ptrdiff_t>(p);
  return (i < 0 || i >= static_cast<std::ptrdiff_t>(extent)) ? -1 : i;
}

// Output coordinate reached from input index i under tap k, or -1.
inline std::ptrdiff_t conv_output(std::size_t i, std::size_t k, std::size_t s, std::size_t p,
                                  std::size_t extent) {
  const auto num = static_cast<std::ptrdiff_t>(i + p) - static_cast<std::ptrdiff_t>(k);
  if (num < 0 || num % static_cast<std::ptrdiff_t>(s) != 0) return -1;
  const auto o = num / static_cast<std::ptrdiff_t>(s);
  return o >= static_cast<std::ptrdiff_t>(extent) ? -1 : o;
}

// [tap][ci][co] -> [tap][co][ci]
template <typename T>
std::vector<T> transpose_taps(std::span<const T> w, std::size_t taps, std::size_t ci, std::size_t co) {
  std::vector<T> wt(w.size());
  for (std::size_t k = 0; k < taps; ++k) {
    for (std::size_t a = 0; a < ci; ++a) {
      for (std::size_t b = 0; b < co; ++b) wt[(k * co + b) * ci + a] = w[(k * ci + a) * co + b];
    }
  }
  return wt;
}

}  // namespace

Volume ConvGeometry::out() const {
  return {conv_extent(in.h, kernel[0], stride[0], pad[0]), conv_extent(in.w, kernel[1], stride[1], pad[1]),
          conv_extent(in.t, kernel[2], stride[2], pad[2]), c_out};
}

Volume TConvGeometry::out() const {
  return {(in.h - 1) * stride[0] + kernel[0], (in.w - 1) * stride[1] + kernel[1],
          (in.t - 1) * stride[2] + kernel[2], c_out};
}

// ---------------------------------------------------------------------------
// Convolution
// ---------------------------------------------------------------------------

template <typename T>
void conv3d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                    std::span<const T> b, std::span<T> y) {
  const Volume out = g.out();
  check_sizes<T>(x.size(), g.in.count(), "conv input");
  check_sizes<T>(w.size(), g.weight_count(), "conv weight");
  check_sizes<T>(b.size(), g.c_out, "conv bias");
  check_sizes<T>(y.size(), out.count(), "conv output");
  const std::size_t ci = g.in.c, co = g.c_out;
  const auto rows = static_cast<std::ptrdiff_t>(out.h * out.w);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t oh = static_cast<std::size_t>(r) / out.w;
    const std::size_t ow = static_cast<std::size_t>(r) % out.w;
    for (std::size_t ot = 0; ot < out.t; ++ot) {
      T* acc = y.data() + site(out, oh, ow, ot) * co;
      std::copy(b.begin(), b.end(), acc);
      for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
        const auto ih = conv_input(oh, kh, g.stride[0], g.pad[0], g.in.h);
        if (ih < 0) continue;
        for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
          const auto iw = conv_input(ow, kw, g.stride[1], g.pad[1], g.in.w);
          if (iw < 0) continue;
          for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
            const auto it = conv_input(ot, kt, g.stride[2], g.pad[2], g.in.t);
            if (it < 0) continue;
            const T* xv = x.data() + site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                          static_cast<std::size_t>(it)) * ci;
            const T* wk = w.data() + ((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci * co;
            for (std::size_t a = 0; a < ci; ++a) {
              const T xa = xv[a];
              const T* wr = wk + a * co;
              for (std::size_t c = 0; c < co; ++c) acc[c] += xa * wr[c];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_input(const ConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                           std::span<T> gx) {
  const Volume out = g.out();
  check_sizes<T>(gy.size(), out.count(), "conv output grad");
  check_sizes<T>(w.size(), g.weight_count(), "conv weight");
  check_sizes<T>(gx.size(), g.in.count(), "conv input grad");
  const std::size_t ci = g.in.c, co = g.c_out;
  const std::size_t taps = g.kernel[0] * g.kernel[1] * g.kernel[2];
  const std::vector<T> wt = transpose_taps<T>(w, taps, ci, co);
  const auto rows = static_cast<std::ptrdiff_t>(g.in.h * g.in.w);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t ih = static_cast<std::size_t>(r) / g.in.w;
    const std::size_t iw = static_cast<std::size_t>(r) % g.in.w;
    for (std::size_t it = 0; it < g.in.t; ++it) {
      T* acc = gx.data() + site(g.in, ih, iw, it) * ci;
      std::fill(acc, acc + ci, T(0));
      for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
        const auto oh = conv_output(ih, kh, g.stride[0], g.pad[0], out.h);
        if (oh < 0) continue;
        for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
          const auto ow = conv_output(iw, kw, g.stride[1], g.pad[1], out.w);
          if (ow < 0) continue;
          for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
            const auto ot = conv_output(it, kt, g.stride[2], g.pad[2], out.t);
            if (ot < 0) continue;
            const T* gv = gy.data() + site(out, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow),
                                           static_cast<std::size_t>(ot)) * co;
            const T* wk = wt.data() + ((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * co * ci;
            for (std::size_t c = 0; c < co; ++c) {
              const T gc = gv[c];
              const T* wr = wk + c * ci;
              for (std::size_t a = 0; a < ci; ++a) acc[a] += gc * wr[a];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv3d_backward_params(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy,
                            std::span<T> gw, std::span<T> gb) {
  const Volume out = g.out();
  check_sizes<T>(x.size(), g.in.count(), "conv input");
  check_sizes<T>(gy.size(), out.count(), "conv output grad");
  check_sizes<T>(gw.size(), g.weight_count(), "conv weight grad");
  check_sizes<T>(gb.size(), g.c_out, "conv bias grad");
  const std::size_t ci = g.in.c, co = g.c_out;
  const auto taps = static_cast<std::ptrdiff_t>(g.kernel[0] * g.kernel[1] * g.kernel[2]);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t tap = 0; tap < taps; ++tap) {
    const std::size_t kt = static_cast<std::size_t>(tap) % g.kernel[2];
    const std::size_t kw = (static_cast<std::size_t>(tap) / g.kernel[2]) % g.kernel[1];
    const std::size_t kh = static_cast<std::size_t>(tap) / (g.kernel[2] * g.kernel[1]);
    T* gk = gw.data() + static_cast<std::size_t>(tap) * ci * co;
    for (std::size_t oh = 0; oh < out.h; ++oh) {
      const auto ih = conv_input(oh, kh, g.stride[0], g.pad[0], g.in.h);
      if (ih < 0) continue;
      for (std::size_t ow = 0; ow < out.w; ++ow) {
        const auto iw = conv_input(ow, kw, g.stride[1], g.pad[1], g.in.w);
        if (iw < 0) continue;
        for (std::size_t ot = 0; ot < out.t; ++ot) {
          const auto it = conv_input(ot, kt, g.stride[2], g.pad[2], g.in.t);
          if (it < 0) continue;
          const T* xv = x.data() + site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                        static_cast<std::size_t>(it)) * ci;
          const T* gv = gy.data() + site(out, oh, ow, ot) * co;
          for (std::size_t a = 0; a < ci; ++a) {
            const T xa = xv[a];
            T* gr = gk + a * co;
            for (std::size_t c = 0; c < co; ++c) gr[c] += xa * gv[c];
          }
        }
      }
    }
  }
  for (std::size_t s = 0; s < out.sites(); ++s) {
    const T* gv = gy.data() + s * co;
    for (std::size_t c = 0; c < co; ++c) gb[c] += gv[c];
  }
}

template <typename T>
void conv3d_forward_reference(const ConvGeometry& g, std::span<const T> x, std::span<const T> w,
                              std::span<const T> b, std::span<T> y) {
  const Volume out = g.out();
  check_sizes<T>(y.size(), out.count(), "conv output");
  const std::size_t ci = g.in.c, co = g.c_out;
  for (std::size_t oh = 0; oh < out.h; ++oh)
    for (std::size_t ow = 0; ow < out.w; ++ow)
      for (std::size_t ot = 0; ot < out.t; ++ot)
        for (std::size_t c = 0; c < co; ++c) {
          T sum = b[c];
          for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
            for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
              for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
                const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) - static_cast<std::ptrdiff_t>(g.pad[0]);
                const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) - static_cast<std::ptrdiff_t>(g.pad[1]);
                const auto it = static_cast<std::ptrdiff_t>(ot * g.stride[2] + kt) - static_cast<std::ptrdiff_t>(g.pad[2]);
                if (ih < 0 || iw < 0 || it < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h) ||
                    iw >= static_cast<std::ptrdiff_t>(g.in.w) || it >= static_cast<std::ptrdiff_t>(g.in.t))
                  continue;
                for (std::size_t a = 0; a < ci; ++a) {
                  const std::size_t xi = site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                              static_cast<std::size_t>(it)) * ci + a;
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  sum += x[xi] * w[wi];
                }
              }
          y[site(out, oh, ow, ot) * co + c] = sum;
        }
}

template <typename T>
void conv3d_backward_input_reference(const ConvGeometry& g, std::span<const T> gy,
                                     std::span<const T> w, std::span<T> gx) {
  const Volume out = g.out();
  const std::size_t ci = g.in.c, co = g.c_out;
  std::fill(gx.begin(), gx.end(), T(0));
  // Scatter form: each output site pushes its gradient back through every tap.
  for (std::size_t oh = 0; oh < out.h; ++oh)
    for (std::size_t ow = 0; ow < out.w; ++ow)
      for (std::size_t ot = 0; ot < out.t; ++ot)
        for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
          for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
            for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) - static_cast<std::ptrdiff_t>(g.pad[0]);
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) - static_cast<std::ptrdiff_t>(g.pad[1]);
              const auto it = static_cast<std::ptrdiff_t>(ot * g.stride[2] + kt) - static_cast<std::ptrdiff_t>(g.pad[2]);
              if (ih < 0 || iw < 0 || it < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h) ||
                  iw >= static_cast<std::ptrdiff_t>(g.in.w) || it >= static_cast<std::ptrdiff_t>(g.in.t))
                continue;
              for (std::size_t a = 0; a < ci; ++a)
                for (std::size_t c = 0; c < co; ++c) {
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  gx[site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                          static_cast<std::size_t>(it)) * ci + a] += gy[site(out, oh, ow, ot) * co + c] * w[wi];
                }
            }
}

template <typename T>
void conv3d_backward_params_reference(const ConvGeometry& g, std::span<const T> x,
                                      std::span<const T> gy, std::span<T> gw, std::span<T> gb) {
  const Volume out = g.out();
  const std::size_t ci = g.in.c, co = g.c_out;
  for (std::size_t oh = 0; oh < out.h; ++oh)
    for (std::size_t ow = 0; ow < out.w; ++ow)
      for (std::size_t ot = 0; ot < out.t; ++ot) {
        for (std::size_t c = 0; c < co; ++c) gb[c] += gy[site(out, oh, ow, ot) * co + c];
        for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
          for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
            for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
              const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) - static_cast<std::ptrdiff_t>(g.pad[0]);
              const auto iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) - static_cast<std::ptrdiff_t>(g.pad[1]);
              const auto it = static_cast<std::ptrdiff_t>(ot * g.stride[2] + kt) - static_cast<std::ptrdiff_t>(g.pad[2]);
              if (ih < 0 || iw < 0 || it < 0 || ih >= static_cast<std::ptrdiff_t>(g.in.h) ||
                  iw >= static_cast<std::ptrdiff_t>(g.in.w) || it >= static_cast<std::ptrdiff_t>(g.in.t))
                continue;
              for (std::size_t a = 0; a < ci; ++a)
                for (std::size_t c = 0; c < co; ++c) {
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  gw[wi] += x[site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                   static_cast<std::size_t>(it)) * ci + a] *
                            gy[site(out, oh, ow, ot) * co + c];
                }
            }
      }
}

// ---------------------------------------------------------------------------
// Transposed convolution
// ---------------------------------------------------------------------------

template <typename T>
void tconv3d_forward(const TConvGeometry& g, std::span<const T> x, std::span<const T> w,
                     std::span<const T> b, std::span<T> y) {
  const Volume out = g.out();
  check_sizes<T>(x.size(), g.in.count(), "tconv input");
  check_sizes<T>(w.size(), g.weight_count(), "tconv weight");
  check_sizes<T>(b.size(), g.c_out, "tconv bias");
  check_sizes<T>(y.size(), out.count(), "tconv output");
  const std::size_t ci = g.in.c, co = g.c_out;
  const auto rows = static_cast<std::ptrdiff_t>(out.h * out.w);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t oh = static_cast<std::size_t>(r) / out.w;
    const std::size_t ow = static_cast<std::size_t>(r) % out.w;
    for (std::size_t ot = 0; ot < out.t; ++ot) {
      T* acc = y.data() + site(out, oh, ow, ot) * co;
      std::copy(b.begin(), b.end(), acc);
      for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
        const auto ih = conv_output(oh, kh, g.stride[0], 0, g.in.h);
        if (ih < 0) continue;
        for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
          const auto iw = conv_output(ow, kw, g.stride[1], 0, g.in.w);
          if (iw < 0) continue;
          for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
            const auto it = conv_output(ot, kt, g.stride[2], 0, g.in.t);
            if (it < 0) continue;
            const T* xv = x.data() + site(g.in, static_cast<std::size_t>(ih), static_cast<std::size_t>(iw),
                                          static_cast<std::size_t>(it)) * ci;
            const T* wk = w.data() + ((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci * co;
            for (std::size_t a = 0; a < ci; ++a) {
              const T xa = xv[a];
              const T* wr = wk + a * co;
              for (std::size_t c = 0; c < co; ++c) acc[c] += xa * wr[c];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void tconv3d_backward_input(const TConvGeometry& g, std::span<const T> gy, std::span<const T> w,
                            std::span<T> gx) {
  const Volume out = g.out();
  check_sizes<T>(gy.size(), out.count(), "tconv output grad");
  check_sizes<T>(w.size(), g.weight_count(), "tconv weight");
  check_sizes<T>(gx.size(), g.in.count(), "tconv input grad");
  const std::size_t ci = g.in.c, co = g.c_out;
  const std::size_t taps = g.kernel[0] * g.kernel[1] * g.kernel[2];
  const std::vector<T> wt = transpose_taps<T>(w, taps, ci, co);
  const auto rows = static_cast<std::ptrdiff_t>(g.in.h * g.in.w);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t ih = static_cast<std::size_t>(r) / g.in.w;
    const std::size_t iw = static_cast<std::size_t>(r) % g.in.w;
    for (std::size_t it = 0; it < g.in.t; ++it) {
      T* acc = gx.data() + site(g.in, ih, iw, it) * ci;
      std::fill(acc, acc + ci, T(0));
      for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
        const std::size_t oh = ih * g.stride[0] + kh;
        for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
          const std::size_t ow = iw * g.stride[1] + kw;
          for (std::size_t kt = 0; kt < g.kernel[2]; ++kt) {
            const std::size_t ot = it * g.stride[2] + kt;
            const T* gv = gy.data() + site(out, oh, ow, ot) * co;
            const T* wk = wt.data() + ((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * co * ci;
            for (std::size_t c = 0; c < co; ++c) {
              const T gc = gv[c];
              const T* wr = wk + c * ci;
              for (std::size_t a = 0; a < ci; ++a) acc[a] += gc * wr[a];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void tconv3d_backward_params(const TConvGeometry& g, std::span<const T> x, std::span<const T> gy,
                             std::span<T> gw, std::span<T> gb) {
  const Volume out = g.out();
  check_sizes<T>(x.size(), g.in.count(), "tconv input");
  check_sizes<T>(gy.size(), out.count(), "tconv output grad");
  check_sizes<T>(gw.size(), g.weight_count(), "tconv weight grad");
  check_sizes<T>(gb.size(), g.c_out, "tconv bias grad");
  const std::size_t ci = g.in.c, co = g.c_out;
  const auto taps = static_cast<std::ptrdiff_t>(g.kernel[0] * g.kernel[1] * g.kernel[2]);

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t tap = 0; tap < taps; ++tap) {
    const std::size_t kt = static_cast<std::size_t>(tap) % g.kernel[2];
    const std::size_t kw = (static_cast<std::size_t>(tap) / g.kernel[2]) % g.kernel[1];
    const std::size_t kh = static_cast<std::size_t>(tap) / (g.kernel[2] * g.kernel[1]);
    T* gk = gw.data() + static_cast<std::size_t>(tap) * ci * co;
    for (std::size_t ih = 0; ih < g.in.h; ++ih)
      for (std::size_t iw = 0; iw < g.in.w; ++iw)
        for (std::size_t it = 0; it < g.in.t; ++it) {
          const T* xv = x.data() + site(g.in, ih, iw, it) * ci;
          const T* gv = gy.data() +
                        site(out, ih * g.stride[0] + kh, iw * g.stride[1] + kw, it * g.stride[2] + kt) * co;
          for (std::size_t a = 0; a < ci; ++a) {
            const T xa = xv[a];
            T* gr = gk + a * co;
            for (std::size_t c = 0; c < co; ++c) gr[c] += xa * gv[c];
          }
        }
  }
  for (std::size_t s = 0; s < out.sites(); ++s) {
    const T* gv = gy.data() + s * co;
    for (std::size_t c = 0; c < co; ++c) gb[c] += gv[c];
  }
}

template <typename T>
void tconv3d_forward_reference(const TConvGeometry& g, std::span<const T> x, std::span<const T> w,
                               std::span<const T> b, std::span<T> y) {
  const Volume out = g.out();
  check_sizes<T>(y.size(), out.count(), "tconv output");
  const std::size_t ci = g.in.c, co = g.c_out;
  for (std::size_t s = 0; s < out.sites(); ++s)
    for (std::size_t c = 0; c < co; ++c) y[s * co + c] = b[c];
  // Scatter form: every input site stamps its kernel-weighted copy.
  for (std::size_t ih = 0; ih < g.in.h; ++ih)
    for (std::size_t iw = 0; iw < g.in.w; ++iw)
      for (std::size_t it = 0; it < g.in.t; ++it)
        for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
          for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
            for (std::size_t kt = 0; kt < g.kernel[2]; ++kt)
              for (std::size_t a = 0; a < ci; ++a)
                for (std::size_t c = 0; c < co; ++c) {
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  y[site(out, ih * g.stride[0] + kh, iw * g.stride[1] + kw, it * g.stride[2] + kt) * co + c] +=
                      x[site(g.in, ih, iw, it) * ci + a] * w[wi];
                }
}

template <typename T>
void tconv3d_backward_input_reference(const TConvGeometry& g, std::span<const T> gy,
                                      std::span<const T> w, std::span<T> gx) {
  const Volume out = g.out();
  const std::size_t ci = g.in.c, co = g.c_out;
  for (std::size_t ih = 0; ih < g.in.h; ++ih)
    for (std::size_t iw = 0; iw < g.in.w; ++iw)
      for (std::size_t it = 0; it < g.in.t; ++it)
        for (std::size_t a = 0; a < ci; ++a) {
          T sum = 0;
          for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
            for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
              for (std::size_t kt = 0; kt < g.kernel[2]; ++kt)
                for (std::size_t c = 0; c < co; ++c) {
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  sum += gy[site(out, ih * g.stride[0] + kh, iw * g.stride[1] + kw, it * g.stride[2] + kt) * co + c] *
                         w[wi];
                }
          gx[site(g.in, ih, iw, it) * ci + a] = sum;
        }
}

template <typename T>
void tconv3d_backward_params_reference(const TConvGeometry& g, std::span<const T> x,
                                       std::span<const T> gy, std::span<T> gw, std::span<T> gb) {
  const Volume out = g.out();
  const std::size_t ci = g.in.c, co = g.c_out;
  for (std::size_t s = 0; s < out.sites(); ++s)
    for (std::size_t c = 0; c < co; ++c) gb[c] += gy[s * co + c];
  for (std::size_t ih = 0; ih < g.in.h; ++ih)
    for (std::size_t iw = 0; iw < g.in.w; ++iw)
      for (std::size_t it = 0; it < g.in.t; ++it)
        for (std::size_t kh = 0; kh < g.kernel[0]; ++kh)
          for (std::size_t kw = 0; kw < g.kernel[1]; ++kw)
            for (std::size_t kt = 0; kt < g.kernel[2]; ++kt)
              for (std::size_t a = 0; a < ci; ++a)
                for (std::size_t c = 0; c < co; ++c) {
                  const std::size_t wi = (((kh * g.kernel[1] + kw) * g.kernel[2] + kt) * ci + a) * co + c;
                  gw[wi] += x[site(g.in, ih, iw, it) * ci + a] *
                            gy[site(out, ih * g.stride[0] + kh, iw * g.stride[1] + kw, it * g.stride[2] + kt) * co + c];
                }
}

#define SOAR_INSTANTIATE_KERNELS(T)                                                                     \
  template void conv3d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,          \
                                  std::span<const T>, std::span<T>);                                    \
  template void conv3d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,   \
                                         std::span<T>);                                                 \
  template void conv3d_backward_params<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,  \
                                          std::span<T>, std::span<T>);                                  \
  template void conv3d_forward_reference<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                            std::span<const T>, std::span<T>);                          \
  template void conv3d_backward_input_reference<T>(const ConvGeometry&, std::span<const T>,             \
                                                   std::span<const T>, std::span<T>);                   \
  template void conv3d_backward_params_reference<T>(const ConvGeometry&, std::span<const T>,            \
                                                    std::span<const T>, std::span<T>, std::span<T>);    \
  template void tconv3d_forward<T>(const TConvGeometry&, std::span<const T>, std::span<const T>,        \
                                   std::span<const T>, std::span<T>);                                   \
  template void tconv3d_backward_input<T>(const TConvGeometry&, std::span<const T>, std::span<const T>, \
                                          std::span<T>);                                                \
  template void tconv3d_backward_params<T>(const TConvGeometry&, std::span<const T>, std::span<const T>, \
                                           std::span<T>, std::span<T>);                                 \
  template void tconv3d_forward_reference<T>(const TConvGeometry&, std::span<const T>,                  \
                                             std::span<const T>, std::span<const T>, std::span<T>);     \
  template void tconv3d_backward_input_reference<T>(const TConvGeometry&, std::span<const T>,           \
                                                    std::span<const T>, std::span<T>);                  \
  template void tconv3d_backward_params_reference<T>(const TConvGeometry&, std::span<const T>,          \
                                                     std::span<const T>, std::span<T>, std::span<T>);

SOAR_INSTANTIATE_KERNELS(float)
SOAR_INSTANTIATE_KERNELS(double)

#undef SOAR_INSTANTIATE_KERNELS

}  // namespace soar::kernels
