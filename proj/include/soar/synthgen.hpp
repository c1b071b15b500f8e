#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "soar/dataio.hpp"
#include "soar/tensor.hpp"

namespace soar::synthgen {

/// Foreground motion patterns. Known classes take the first C_known entries,
/// open-set classes the next C_open.
enum class Motion : int {
  bounce_horizontal = 0,
  bounce_vertical = 1,
  diagonal = 2,
  circular = 3,
  zigzag = 4,
  pulse_in_place = 5,
};
inline constexpr int kNumMotions = 6;
inline constexpr int kMaxScenes = 8;
/// Sprite displacement per frame along a bouncing axis, in pixels.
inline constexpr int kSpeed = 2;
inline constexpr int kZigzagAmplitude = 6;
inline constexpr int kHistBins = 8;
inline constexpr std::size_t kSceneFeatureDim = kHistBins * kHistBins * kHistBins;

enum class OpenScenePolicy { familiar, unfamiliar };

struct SynthConfig {
  std::size_t h = 32;
  std::size_t w = 32;
  std::size_t t = 16;
  std::size_t d = 3;
  int c_known = 4;
  int c_open = 2;
  int n_scenes = 4;
  double correlation = 1.0;          // rho
  int clips_per_class = 10;          // train clips per known class
  double closed_test_fraction = 0.5;   // of the train count, round-robin over known classes
  int open_clips_per_class = 0;      // 0 = same as clips_per_class
  OpenScenePolicy open_scene_policy = OpenScenePolicy::familiar;
  double noise_std = 0.02;
  int sprite_size = 6;
  double train_scene_shift = 0.0;    // max per-clip background colour shift, train split
  double test_scene_shift = 0.25;    // same for closed_test / open_test
  std::uint64_t master_seed = 0;

  /// Throws ConfigError listing the first violated invariant.
  void validate() const;
};

/// Per-clip randomness that fixes the sprite trajectory.
struct MotionDraw {
  int phase_x = 0;
  int phase_y = 0;
  int x0 = 0;
  int y0 = 0;
  double angle0 = 0.0;
};

struct SpritePos {
  int row = 0;  // top-left, along H
  int col = 0;  // top-left, along W
  float intensity = 1.0f;
  bool operator==(const SpritePos&) const = default;
};

/// 64-bit mix hash used to derive per-clip seeds: splitmix64 finalizer over
/// master + golden_gamma * (index + 1).
std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index);

/// Triangle wave bouncing in [0, range]: range - |(p mod 2*range) - range|.
int triangle(int p, int range);

MotionDraw draw_motion(const SynthConfig& cfg, Motion m, std::uint64_t seed);
std::vector<SpritePos> sprite_track(const SynthConfig& cfg, Motion m, std::uint64_t seed);

ClipTensor generate_clip(const SynthConfig& cfg, int action, int scene, std::uint64_t seed,
                         double scene_shift_max = 0.0);

dataio::DatasetManifest generate_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

/// Label layout of a dataset without rendering any pixels.
dataio::DatasetManifest plan_dataset(const SynthConfig& cfg);

/// L2-normalised 8x8x8 joint colour histogram of the whole-clip TMF background.
std::vector<float> scene_feature(const ClipTensor& clip);

}  // namespace soar::synthgen
