#include "soar/background.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace soar::background {

namespace {

std::size_t effective_window(const ClipTensor& clip, TmfConfig cfg) {
  const std::size_t frames = clip.dims().t;
  const std::size_t w = cfg.window == 0 ? frames : cfg.window;
  if (w > frames) {
    throw ConfigError("background", "TMF window " + std::to_string(w) + " exceeds T=" +
                                        std::to_string(frames));
  }
  return w;
}

}  // namespace

std::size_t window_start(std::size_t t, std::size_t window, std::size_t frames) {
  const std::size_t half = (window - 1) / 2;
  const std::size_t start = t > half ? t - half : 0;
  return std::min(start, frames - window);
}

ClipTensor tmf_background(const ClipTensor& clip, TmfConfig cfg) {
  const std::size_t w = effective_window(clip, cfg);
  const Dims4 dims = clip.dims();
  ClipTensor out(dims);
  const auto src = clip.values();
  auto dst = out.values();
  const std::size_t columns = dims.h * dims.w;
  const std::size_t frame_stride = dims.d;

#pragma omp parallel
  {
    std::vector<float> series(dims.t);
    std::vector<float> window(w);
#pragma omp for schedule(static)
    for (std::size_t px = 0; px < columns; ++px) {
      for (std::size_t c = 0; c < dims.d; ++c) {
        const std::size_t base = px * dims.t * dims.d + c;
        for (std::size_t t = 0; t < dims.t; ++t) series[t] = src[base + t * frame_stride];
        std::size_t last_start = dims.t;  // sentinel: nothing computed yet
        float value = 0.0f;
        for (std::size_t t = 0; t < dims.t; ++t) {
          const std::size_t s = window_start(t, w, dims.t);
          if (s != last_start) {
            std::copy_n(series.begin() + static_cast<std::ptrdiff_t>(s), w, window.begin());
            auto mid = window.begin() + static_cast<std::ptrdiff_t>(w / 2);
            std::nth_element(window.begin(), mid, window.end());
            if (w % 2 == 1) {
              value = *mid;
            } else {
              const float lower = *std::max_element(window.begin(), mid);
              value = (lower + *mid) / 2.0f;
            }
            last_start = s;
          }
          dst[base + t * frame_stride] = value;
        }
      }
    }
  }
  return out;
}

ClipTensor tmf_background_reference(const ClipTensor& clip, TmfConfig cfg) {
  const std::size_t w = effective_window(clip, cfg);
  const Dims4 dims = clip.dims();
  ClipTensor out(dims);
  std::vector<float> window(w);
  for (std::size_t i = 0; i < dims.h; ++i) {
    for (std::size_t j = 0; j < dims.w; ++j) {
      for (std::size_t c = 0; c < dims.d; ++c) {
        for (std::size_t t = 0; t < dims.t; ++t) {
          const std::size_t s = window_start(t, w, dims.t);
          for (std::size_t k = 0; k < w; ++k) window[k] = clip.at(i, j, s + k, c);
          std::sort(window.begin(), window.end());
          out.at(i, j, t, c) =
              w % 2 == 1 ? window[w / 2] : (window[w / 2 - 1] + window[w / 2]) / 2.0f;
        }
      }
    }
  }
  return out;
}

}  // namespace soar::background
