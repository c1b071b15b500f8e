#include "soar/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>

#include "soar/background.hpp"

namespace soar::synthgen {

namespace fs = std::filesystem;

namespace {

using Rgb = std::array<float, 3>;

struct Texture {
  bool checkerboard;
  Rgb a;
  Rgb b;
};

// Two-colour families; even scenes are horizontal gradients, odd scenes
// checkerboards. Sprite pixels are grey/white, so no scene colour reaches 1.
constexpr std::array<Texture, kMaxScenes> kTextures = {{
    {false, {0.80f, 0.10f, 0.10f}, {0.50f, 0.05f, 0.20f}},
    {true, {0.10f, 0.60f, 0.10f}, {0.20f, 0.40f, 0.05f}},
    {false, {0.10f, 0.20f, 0.80f}, {0.05f, 0.40f, 0.60f}},
    {true, {0.70f, 0.60f, 0.10f}, {0.50f, 0.30f, 0.05f}},
    {false, {0.10f, 0.70f, 0.70f}, {0.20f, 0.50f, 0.40f}},
    {true, {0.70f, 0.10f, 0.60f}, {0.40f, 0.05f, 0.50f}},
    {false, {0.30f, 0.30f, 0.30f}, {0.60f, 0.60f, 0.60f}},
    {true, {0.90f, 0.50f, 0.10f}, {0.60f, 0.30f, 0.00f}},
}};
constexpr int kCheckerCell = 4;

// Independent random streams derived from one clip seed.
enum Stream : std::uint64_t { kMotionStream = 1, kNoiseStream = 2, kShiftStream = 3 };

std::mt19937_64 stream(std::uint64_t seed, Stream s) { return std::mt19937_64(mix_seed(seed, s)); }

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

int triangle(int p, int range) {
  if (range <= 0) return 0;
  const int period = 2 * range;
  const int m = ((p % period) + period) % period;
  return range - std::abs(m - range);
}

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("synthgen", msg); };
  if (h == 0 || w == 0 || t == 0) fail("clip dims must be positive");
  if (d != 3) fail("D must be 3 (RGB)");
  if (!(correlation >= 0.0 && correlation <= 1.0)) fail("correlation must lie in [0, 1]");
  if (c_known < 1) fail("C_known must be >= 1");
  if (c_open < 0) fail("C_open must be >= 0");
  if (c_known + c_open > kNumMotions) {
    fail("C_known + C_open exceeds the " + std::to_string(kNumMotions) + " defined motion patterns");
  }
  if (n_scenes < 1 || n_scenes > kMaxScenes) {
    fail("N_scenes must lie in [1, " + std::to_string(kMaxScenes) + "]");
  }
  if (clips_per_class < 0 || open_clips_per_class < 0) fail("clip counts must be non-negative");
  if (closed_test_fraction < 0.0) fail("closed_test_fraction must be non-negative");
  if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
  if (sprite_size < 0 || static_cast<std::size_t>(sprite_size) >= std::min(h, w)) {
    fail("sprite_size must lie in [0, min(H, W))");
  }
  if (train_scene_shift < 0.0 || test_scene_shift < 0.0) fail("scene shifts must be non-negative");
  if (open_scene_policy == OpenScenePolicy::unfamiliar && c_open > 0) {
    bool any = false;
    for (int s = 0; s < n_scenes; ++s) {
      bool dominant = false;
      for (int c = 0; c < c_known; ++c) dominant = dominant || (c % n_scenes == s);
      any = any || !dominant;
    }
    if (!any) fail("unfamiliar open-scene policy needs a scene outside the training pairings");
  }
}

MotionDraw draw_motion(const SynthConfig& cfg, Motion m, std::uint64_t seed) {
  auto rng = stream(seed, kMotionStream);
  const int rx = static_cast<int>(cfg.w) - cfg.sprite_size;
  const int ry = static_cast<int>(cfg.h) - cfg.sprite_size;
  auto uniform_int = [&rng](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, std::max(lo, hi))(rng);
  };
  MotionDraw d;
  // Fixed draw order keeps every field defined for every pattern.
  d.phase_x = uniform_int(0, 2 * rx - 1);
  d.phase_y = uniform_int(0, 2 * ry - 1);
  d.x0 = uniform_int(0, rx);
  d.y0 = uniform_int(0, m == Motion::zigzag ? ry - kZigzagAmplitude : ry);
  d.angle0 = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  return d;
}

std::vector<SpritePos> sprite_track(const SynthConfig& cfg, Motion m, std::uint64_t seed) {
  const MotionDraw d = draw_motion(cfg, m, seed);
  const int rx = static_cast<int>(cfg.w) - cfg.sprite_size;
  const int ry = static_cast<int>(cfg.h) - cfg.sprite_size;
  std::vector<SpritePos> track(cfg.t);
  for (std::size_t ti = 0; ti < cfg.t; ++ti) {
    const int t = static_cast<int>(ti);
    SpritePos p;
    switch (m) {
      case Motion::bounce_horizontal:
        p.col = triangle(d.phase_x + kSpeed * t, rx);
        p.row = d.y0;
        break;
      case Motion::bounce_vertical:
        p.col = d.x0;
        p.row = triangle(d.phase_y + kSpeed * t, ry);
        break;
      case Motion::diagonal:
        p.col = triangle(d.phase_x + kSpeed * t, rx);
        p.row = triangle(d.phase_y + kSpeed * t, ry);
        break;
      case Motion::circular: {
        const double radius = std::min(rx, ry) / 2.0;
        const double theta = d.angle0 + 2.0 * std::numbers::pi * t / static_cast<double>(cfg.t);
        p.col = static_cast<int>(std::lround(rx / 2.0 + radius * std::cos(theta)));
        p.row = static_cast<int>(std::lround(ry / 2.0 + radius * std::sin(theta)));
        break;
      }
      case Motion::zigzag:
        p.col = triangle(d.phase_x + kSpeed * t, rx);
        p.row = d.y0 + triangle(3 * t, kZigzagAmplitude);
        break;
      case Motion::pulse_in_place:
        p.col = d.x0;
        p.row = d.y0;
        p.intensity = static_cast<float>(0.55 + 0.45 * std::cos(2.0 * std::numbers::pi * t / 8.0));
        break;
    }
    track[ti] = p;
  }
  return track;
}

ClipTensor generate_clip(const SynthConfig& cfg, int action, int scene, std::uint64_t seed,
                         double scene_shift_max) {
  if (action < 0 || action >= kNumMotions) {
    throw RangeError("synthgen", "unknown action index " + std::to_string(action));
  }
  if (scene < 0 || scene >= std::min(cfg.n_scenes, kMaxScenes)) {
    throw RangeError("synthgen", "unknown scene index " + std::to_string(scene));
  }
  const Texture& tex = kTextures[static_cast<std::size_t>(scene)];

  Rgb shift{0.0f, 0.0f, 0.0f};
  if (scene_shift_max > 0.0) {
    auto rng = stream(seed, kShiftStream);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double v[3] = {gauss(rng), gauss(rng), gauss(rng)};
    const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    const double amp = std::uniform_real_distribution<double>(0.0, scene_shift_max)(rng);
    for (int c = 0; c < 3; ++c) shift[c] = static_cast<float>(norm > 0 ? amp * v[c] / norm : 0.0);
  }

  const Dims4 dims{cfg.h, cfg.w, cfg.t, cfg.d};
  ClipTensor clip(dims);
  // Static background.
  for (std::size_t i = 0; i < cfg.h; ++i) {
    for (std::size_t j = 0; j < cfg.w; ++j) {
      Rgb color;
      if (tex.checkerboard) {
        const bool odd = ((i / kCheckerCell) + (j / kCheckerCell)) % 2 == 1;
        color = odd ? tex.b : tex.a;
      } else {
        const float s = cfg.w > 1 ? static_cast<float>(j) / static_cast<float>(cfg.w - 1) : 0.0f;
        for (int c = 0; c < 3; ++c) color[c] = tex.a[c] + s * (tex.b[c] - tex.a[c]);
      }
      for (std::size_t t = 0; t < cfg.t; ++t) {
        for (std::size_t c = 0; c < 3; ++c) clip.at(i, j, t, c) = clamp01(color[c] + shift[c]);
      }
    }
  }

  if (cfg.sprite_size > 0) {
    const auto track = sprite_track(cfg, static_cast<Motion>(action), seed);
    const auto size = static_cast<std::size_t>(cfg.sprite_size);
    for (std::size_t t = 0; t < cfg.t; ++t) {
      const auto& p = track[t];
      for (std::size_t di = 0; di < size; ++di) {
        for (std::size_t dj = 0; dj < size; ++dj) {
          const std::size_t i = static_cast<std::size_t>(p.row) + di;
          const std::size_t j = static_cast<std::size_t>(p.col) + dj;
          if (i >= cfg.h || j >= cfg.w) continue;
          for (std::size_t c = 0; c < 3; ++c) clip.at(i, j, t, c) = p.intensity;
        }
      }
    }
  }

  if (cfg.noise_std > 0.0) {
    auto rng = stream(seed, kNoiseStream);
    std::normal_distribution<double> gauss(0.0, cfg.noise_std);
    for (auto& v : clip.values()) v = clamp01(v + gauss(rng));
  }
  return clip;
}

namespace {

// Scenes for one (split, action) group: round(rho * n) clips on the paired
// scene, the rest cycling through a seeded permutation of `pool`.
std::vector<int> assign_scenes(std::size_t n, double rho, int paired, std::vector<int> pool,
                               std::uint64_t group_seed) {
  std::mt19937_64 rng(group_seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n_paired = static_cast<std::size_t>(std::llround(rho * static_cast<double>(n)));
  std::vector<int> scenes(n, paired);
  for (std::size_t k = n_paired; k < n; ++k) scenes[order[k]] = pool[(k - n_paired) % pool.size()];
  return scenes;
}

}  // namespace

dataio::DatasetManifest plan_dataset(const SynthConfig& cfg) {
  cfg.validate();
  dataio::DatasetManifest m;
  m.c_known = cfg.c_known;
  m.n_scenes = cfg.n_scenes;
  m.meta["master_seed"] = std::to_string(cfg.master_seed);

  std::vector<int> all_scenes(static_cast<std::size_t>(cfg.n_scenes));
  for (int s = 0; s < cfg.n_scenes; ++s) all_scenes[static_cast<std::size_t>(s)] = s;
  std::vector<int> unfamiliar;
  for (int s = 0; s < cfg.n_scenes; ++s) {
    bool dominant = false;
    for (int c = 0; c < cfg.c_known; ++c) dominant = dominant || (c % cfg.n_scenes == s);
    if (!dominant) unfamiliar.push_back(s);
  }

  std::uint64_t index = 0;
  std::uint64_t group = 0;
  auto emit = [&](int action, dataio::Split split, std::size_t count) {
    const bool open = split == dataio::Split::open_test;
    const bool use_unfamiliar = open && cfg.open_scene_policy == OpenScenePolicy::unfamiliar;
    const double rho = use_unfamiliar ? 0.0 : cfg.correlation;
    const auto scenes = assign_scenes(count, rho, action % cfg.n_scenes,
                                      use_unfamiliar ? unfamiliar : all_scenes,
                                      mix_seed(cfg.master_seed ^ 0xA5A5A5A5ULL, group++));
    for (std::size_t k = 0; k < count; ++k) {
      char id[32];
      std::snprintf(id, sizeof(id), "clip_%05llu", static_cast<unsigned long long>(index));
      dataio::ClipRecord r;
      r.clip_id = id;
      r.path = std::string("clips/") + id + ".vtn";
      r.scene_feature_path = std::string("features/") + id + ".vtn";
      r.action_label = action;
      r.scene_label = scenes[k];
      r.split = split;
      r.seed = mix_seed(cfg.master_seed, index);
      m.clips.push_back(std::move(r));
      ++index;
    }
  };

  const auto per_class = static_cast<std::size_t>(cfg.clips_per_class);
  for (int c = 0; c < cfg.c_known; ++c) emit(c, dataio::Split::train, per_class);

  const auto closed_total = static_cast<std::size_t>(
      std::llround(cfg.closed_test_fraction * static_cast<double>(per_class * cfg.c_known)));
  const auto ck = static_cast<std::size_t>(cfg.c_known);
  for (std::size_t c = 0; c < ck; ++c) {
    emit(static_cast<int>(c), dataio::Split::closed_test, closed_total / ck + (c < closed_total % ck ? 1 : 0));
  }

  const auto open_per_class =
      static_cast<std::size_t>(cfg.open_clips_per_class > 0 ? cfg.open_clips_per_class : cfg.clips_per_class);
  for (int c = cfg.c_known; c < cfg.c_known + cfg.c_open; ++c) {
    emit(c, dataio::Split::open_test, open_per_class);
  }
  return m;
}

dataio::DatasetManifest generate_dataset(const SynthConfig& cfg, const fs::path& out_dir) {
  auto m = plan_dataset(cfg);
  std::error_code ec;
  fs::create_directories(out_dir / "clips", ec);
  fs::create_directories(out_dir / "features", ec);
  if (ec || !fs::is_directory(out_dir / "clips")) {
    throw Error("synthgen", "cannot create output directory " + out_dir.string());
  }

  const auto n = static_cast<std::ptrdiff_t>(m.clips.size());
  std::string first_error;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    const auto& r = m.clips[static_cast<std::size_t>(k)];
    try {
      const double shift = r.split == dataio::Split::train ? cfg.train_scene_shift : cfg.test_scene_shift;
      const auto clip = generate_clip(cfg, r.action_label, r.scene_label, r.seed, shift);
      dataio::write_vtensor(out_dir / r.path, clip);
      const auto feat = scene_feature(clip);
      dataio::write_vtensor(out_dir / *r.scene_feature_path, Tensor({feat.size()}, feat));
    } catch (const std::exception& e) {
#pragma omp critical
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw Error("synthgen", first_error);
  dataio::save_manifest(m, out_dir / "manifest.json");
  return m;
}

std::vector<float> scene_feature(const ClipTensor& clip) {
  if (clip.dims().d != 3) throw ShapeError("synthgen", "scene feature needs an RGB clip");
  const ClipTensor bg = background::tmf_background(clip);
  std::vector<double> hist(kSceneFeatureDim, 0.0);
  auto bin = [](float v) {
    return std::min(kHistBins - 1, std::max(0, static_cast<int>(std::floor(v * kHistBins))));
  };
  const auto vals = bg.values();
  for (std::size_t p = 0; p < vals.size(); p += 3) {
    const int idx = (bin(vals[p]) * kHistBins + bin(vals[p + 1])) * kHistBins + bin(vals[p + 2]);
    hist[static_cast<std::size_t>(idx)] += 1.0;
  }
  double norm = 0.0;
  for (double h : hist) norm += h * h;
  norm = std::sqrt(norm);
  std::vector<float> out(kSceneFeatureDim);
  for (std::size_t k = 0; k < kSceneFeatureDim; ++k) out[k] = static_cast<float>(hist[k] / norm);
  return out;
}

}  // namespace soar::synthgen
