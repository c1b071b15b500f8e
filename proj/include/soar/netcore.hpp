#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "soar/kernels.hpp"
#include "soar/tensor.hpp"

namespace soar::netcore {

using kernels::Volume;

/// Network sizes. The backbone has three 3x3x3 conv blocks (stride 2 in H and
/// W; stride 2 in T on the last two), so F is (H/8, W/8, T/4, D').
struct ModelConfig {
  Dims4 input{32, 32, 16, 3};
  std::array<std::size_t, 3> widths{8, 16, 64};  // widths[2] is D'
  std::size_t num_classes = 4;                   // C
  std::size_t num_scenes = 4;                    // N
  std::size_t scene_hidden = 32;
  float edl_bias_init = 0.0f;  // initial evidence-head bias

  std::size_t feature_dim() const { return widths[2]; }
  Volume feature_volume() const;
  /// Throws ShapeError when the clip dims are not multiples of (8, 8, 4).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Trainable weights plus the two gradient-reversal factors. The same struct
/// doubles as a gradient accumulator.
struct ModelParams {
  ModelConfig config;
  std::array<Tensor, 3> conv_w, conv_b;  // backbone G_f
  Tensor edl_w, edl_b;                   // H_e: D' -> C
  std::array<Tensor, 3> dec_w, dec_b;    // H_d
  Tensor scene_w1, scene_b1;             // H_s layer 1: D' -> hidden
  Tensor scene_w2, scene_b2;             // H_s layer 2: hidden -> N
  float lambda_d = 1.0f;
  float lambda_s = 10.0f;

  /// Zero-filled parameters of the right shapes.
  static ModelParams zeros(const ModelConfig& cfg);
  /// He (fan-in scaled normal) weights, zero biases. Every tensor is drawn in a
  /// fixed order so the backbone init does not depend on which heads are used.
  static ModelParams he_init(const ModelConfig& cfg, std::uint64_t seed);

  enum class Group { backbone, edl, decoder, scene };
  struct Named {
    std::string name;
    Group group;
    Tensor* tensor;
  };
  std::vector<Named> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  void set_zero();
};

kernels::ConvGeometry backbone_geometry(const ModelConfig& cfg, int block);
kernels::TConvGeometry decoder_geometry(const ModelConfig& cfg, int layer);

// ---------------------------------------------------------------------------
// Backbone
// ---------------------------------------------------------------------------

struct FeatureMap {
  Volume dims;            // (H', W', T', D')
  std::vector<float> F;   // row-major (H', W', T', D')
  std::vector<float> f;   // spatio-temporal mean of F
};

struct BackboneCache {
  std::vector<float> input;
  std::array<std::vector<float>, 3> act;  // post-ReLU block outputs; act[2] == F
};

FeatureMap backbone_forward(const ClipTensor& clip, const ModelParams& p, BackboneCache* cache = nullptr);

/// Accumulates parameter gradients given dL/dF (the pooled-path gradient must
/// already be broadcast into gF).
void backbone_backward(const ModelParams& p, const BackboneCache& cache, std::span<const float> gF,
                       ModelParams& grads);

std::vector<float> mean_pool(std::span<const float> F, std::size_t channels);

// ---------------------------------------------------------------------------
// Evidential head
// ---------------------------------------------------------------------------

struct EvidentialOutput {
  std::vector<float> z;      // pre-rectification logits (pooled path)
  std::vector<float> e;      // evidence
  std::vector<float> alpha;  // e + 1
  double S = 0.0;
  std::vector<float> p;      // alpha / S
  double u = 1.0;            // C / S

  Volume map_dims;           // (H', W', T', C)
  std::vector<float> E;      // evidence map
  std::vector<float> U;      // uncertainty map, (H', W', T')
};

/// alpha, S, p, u from a non-negative evidence vector.
EvidentialOutput from_evidence(std::span<const float> e);

/// Pooled path: e = max(0, W f + b).
EvidentialOutput edl_head(std::span<const float> f, const ModelParams& p);
/// Map path: fills E and U (u_ijt = C / sum_c(e_ijtc + 1)) and leaves the pooled fields empty.
EvidentialOutput edl_head_map(const FeatureMap& fm, const ModelParams& p);

/// Gradient of the pooled path w.r.t. f and H_e given dL/de.
void edl_head_backward(std::span<const float> f, const EvidentialOutput& out, std::span<const float> grad_e,
                       const ModelParams& p, ModelParams& grads, std::span<float> grad_f);

/// Unrectified logits W f + b for the plain-softmax arm.
std::vector<float> softmax_logits(std::span<const float> f, const ModelParams& p);
void softmax_logits_backward(std::span<const float> f, std::span<const float> grad_logits,
                             const ModelParams& p, ModelParams& grads, std::span<float> grad_f);

// ---------------------------------------------------------------------------
// Uncertainty map post-processing
// ---------------------------------------------------------------------------

/// Min-max normalisation; a flat input maps to all zeros.
template <typename T>
std::vector<T> min_max_normalize(std::span<const T> v) {
  std::vector<T> out(v.size(), T(0));
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = static_cast<double>(*hi) - static_cast<double>(*lo);
  if (!(range > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = static_cast<T>((static_cast<double>(v[i]) - static_cast<double>(*lo)) / range);
  }
  return out;
}
inline std::vector<float> min_max_normalize(std::span<const float> v) { return min_max_normalize<float>(v); }

/// Backward of min_max_normalize: dL/dv from dL/dnorm(v). The first minimum and
/// first maximum carry the shift and scale terms. Zero for flat input.
template <typename T>
std::vector<T> min_max_normalize_backward(std::span<const T> v, std::span<const T> grad_norm) {
  std::vector<T> g(v.size(), T(0));
  if (v.empty()) return g;
  const auto lo_it = std::min_element(v.begin(), v.end());
  const auto hi_it = std::max_element(v.begin(), v.end());
  const double lo = static_cast<double>(*lo_it);
  const double range = static_cast<double>(*hi_it) - lo;
  if (!(range > 0.0)) return g;
  double g_min = 0.0, g_range = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double gi = static_cast<double>(grad_norm[i]);
    g[i] = static_cast<T>(gi / range);
    g_min -= gi / range;
    g_range -= gi * ((static_cast<double>(v[i]) - lo) / range) / range;
  }
  g[static_cast<std::size_t>(lo_it - v.begin())] += static_cast<T>(g_min - g_range);
  g[static_cast<std::size_t>(hi_it - v.begin())] += static_cast<T>(g_range);
  return g;
}

/// Trilinear resampling of a single-channel (h, w, t) volume with half-pixel
/// centres and clamped borders.
std::vector<float> trilinear_upsample(std::span<const float> src, Volume from, Volume to);

/// U' = up(norm(U)), output shaped (H, W, T).
std::vector<float> normalize_upsample(std::span<const float> U, Volume map_dims, const Dims4& target);

// ---------------------------------------------------------------------------
// Gradient reversal
// ---------------------------------------------------------------------------

/// Identity in the forward pass; scales incoming gradients by -lambda.
struct GradientReversal {
  float lambda = 1.0f;

  template <typename T>
  std::span<const T> forward(std::span<const T> x) const { return x; }

  template <typename T>
  void backward(std::span<const T> grad_out, std::span<T> grad_in) const {
    for (std::size_t i = 0; i < grad_out.size(); ++i) grad_in[i] = static_cast<T>(-lambda) * grad_out[i];
  }
};

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

struct DecoderCache {
  std::array<std::vector<float>, 2> act;  // post-ReLU hidden outputs
};

/// X_hat = H_d(F); linear output activation.
ClipTensor decoder_forward(const FeatureMap& fm, const ModelParams& p, DecoderCache* cache = nullptr);

/// Accumulates decoder gradients and writes dL/dF (before any reversal) into grad_F.
void decoder_backward(const FeatureMap& fm, const DecoderCache& cache, const ClipTensor& grad_out,
                      const ModelParams& p, ModelParams& grads, std::span<float> grad_F);

// ---------------------------------------------------------------------------
// Scene head
// ---------------------------------------------------------------------------

struct SceneOutput {
  std::vector<float> logits;  // pooled path, N values
  std::vector<float> hidden;  // pooled post-ReLU hidden layer
  std::vector<float> M;       // per-location logit of the true scene, (H', W', T')
  std::vector<float> map_hidden;
};

SceneOutput scene_head(std::span<const float> f, const ModelParams& p);
/// Scene class activation map for ground-truth scene `scene`.
SceneOutput scene_head_map(const FeatureMap& fm, int scene, const ModelParams& p);

void scene_head_backward(std::span<const float> f, const SceneOutput& out, std::span<const float> grad_logits,
                         const ModelParams& p, ModelParams& grads, std::span<float> grad_f);
void scene_head_map_backward(const FeatureMap& fm, int scene, const SceneOutput& out,
                             std::span<const float> grad_M, const ModelParams& p, ModelParams& grads,
                             std::span<float> grad_F);

// ---------------------------------------------------------------------------
// Checkpoints: directory with params.json (names, shapes, seed, extra metadata)
// and one VTENSOR file per parameter.
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams& p, const std::filesystem::path& dir, std::uint64_t seed,
                     const std::map<std::string, std::string>& meta);

struct Checkpoint {
  ModelParams params;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// FNV-1a over the raw bytes of every parameter tensor in `group`s.
std::uint64_t params_hash(const ModelParams& p, std::span<const ModelParams::Group> groups);

}  // namespace soar::netcore
