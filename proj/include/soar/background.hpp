#pragma once

#include <cstddef>

#include "soar/tensor.hpp"

namespace soar::background {

struct TmfConfig {
  /// Temporal window length; 0 selects the whole clip (w = T).
  std::size_t window = 0;
};

/// First frame of the length-w window used for output frame t. The window is
/// centred on t and shifted as a whole to stay inside [0, T-1].
std::size_t window_start(std::size_t t, std::size_t window, std::size_t frames);

/// Pixel-wise temporal median. Even windows average the two middle values.
/// Parallel over pixels.
ClipTensor tmf_background(const ClipTensor& clip, TmfConfig cfg = {});

/// Serial sort-based version of tmf_background.
ClipTensor tmf_background_reference(const ClipTensor& clip, TmfConfig cfg = {});

}  // namespace soar::background
