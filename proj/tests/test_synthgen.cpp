#include <doctest.h>

#include <cmath>
#include <map>

#include "soar/background.hpp"
#include "soar/synthgen.hpp"
#include "support.hpp"

using namespace soar;
using namespace soar::synthgen;
using testing_support::TempDir;

namespace {

// Sprite centroid of frame t found from pixel differences against the TMF background.
std::pair<double, double> centroid(const ClipTensor& clip, const ClipTensor& bg, std::size_t t) {
  double si = 0, sj = 0, n = 0;
  const auto& d = clip.dims();
  for (std::size_t i = 0; i < d.h; ++i)
    for (std::size_t j = 0; j < d.w; ++j) {
      double diff = 0;
      for (std::size_t c = 0; c < d.d; ++c) diff += std::abs(clip.at(i, j, t, c) - bg.at(i, j, t, c));
      if (diff > 0.15) si += i, sj += j, n += 1;
    }
  return {si / n, sj / n};
}

double mutual_information(const dataio::DatasetManifest& m, int actions, int scenes) {
  std::map<std::pair<int, int>, double> joint;
  std::vector<double> pa(actions, 0), ps(scenes, 0);
  double n = 0;
  for (const auto* r : m.split(dataio::Split::train)) {
    joint[{r->action_label, r->scene_label}] += 1;
    pa[r->action_label] += 1;
    ps[r->scene_label] += 1;
    n += 1;
  }
  double mi = 0;
  for (const auto& [k, c] : joint) mi += c / n * std::log((c / n) / (pa[k.first] / n * ps[k.second] / n));
  return mi;
}

}  // namespace

TEST_CASE("pulse-in-place keeps the same centroid in every frame") {
  SynthConfig cfg;
  cfg.noise_std = 0.0;
  for (int scene = 0; scene < 4; ++scene) {
    const auto track = sprite_track(cfg, Motion::pulse_in_place, 100 + scene);
    for (const auto& p : track) {
      CHECK(p.row == track[0].row);
      CHECK(p.col == track[0].col);
    }
  }
}

TEST_CASE("bounce-horizontal follows the closed-form triangle wave") {
  SynthConfig cfg;
  cfg.noise_std = 0.0;
  const std::uint64_t seed = 3;
  const auto draw = draw_motion(cfg, Motion::bounce_horizontal, seed);
  const int range = static_cast<int>(cfg.w) - cfg.sprite_size;
  const auto track = sprite_track(cfg, Motion::bounce_horizontal, seed);
  for (int t = 0; t < static_cast<int>(cfg.t); ++t) {
    const int p = draw.phase_x + kSpeed * t;
    const int m = p % (2 * range);
    const int expected = m <= range ? m : 2 * range - m;
    CHECK(track[t].col == expected);
    CHECK(track[t].row == track[0].row);
  }
  // The rendered clip agrees with the track on scene 0.
  const auto clip = generate_clip(cfg, 0, 0, seed);
  cfg.sprite_size = 0;
  const auto bg = generate_clip(cfg, 0, 0, seed);
  for (std::size_t t = 0; t < clip.dims().t; ++t) {
    const auto [ci, cj] = centroid(clip, bg, t);
    CHECK(cj == doctest::Approx(track[t].col + 2.5).epsilon(0.05));
  }
}

TEST_CASE("no sprite and no noise gives identical frames") {
  SynthConfig cfg;
  cfg.noise_std = 0.0;
  cfg.sprite_size = 0;
  for (int scene = 0; scene < 4; ++scene) {
    const auto clip = generate_clip(cfg, 1, scene, 9);
    const auto& d = clip.dims();
    for (std::size_t i = 0; i < d.h; ++i)
      for (std::size_t j = 0; j < d.w; ++j)
        for (std::size_t t = 1; t < d.t; ++t)
          for (std::size_t c = 0; c < d.d; ++c) CHECK(clip.at(i, j, t, c) == clip.at(i, j, 0, c));
  }
}

TEST_CASE("generated clips stay in [0,1]") {
  SynthConfig cfg;
  cfg.noise_std = 0.3;
  for (int a = 0; a < kNumMotions; ++a) {
    const auto clip = generate_clip(cfg, a, a % 4, 40 + a, 0.2);
    for (float v : clip.values()) {
      CHECK(v >= 0.0f);
      CHECK(v <= 1.0f);
    }
  }
}

TEST_CASE("unknown action or scene raises a range error") {
  SynthConfig cfg;
  CHECK_THROWS_AS(generate_clip(cfg, 6, 0, 1), RangeError);
  CHECK_THROWS_AS(generate_clip(cfg, -1, 0, 1), RangeError);
  CHECK_THROWS_AS(generate_clip(cfg, 0, 4, 1), RangeError);
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg;
  cfg.correlation = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.c_known = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.sprite_size = 32;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("full correlation pairs every train clip of action c with scene c") {
  SynthConfig cfg;
  const auto m = plan_dataset(cfg);
  for (const auto& r : m.clips) {
    if (r.split != dataio::Split::open_test) CHECK(r.scene_label == r.action_label);
  }
  CHECK(mutual_information(m, 4, 4) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("zero correlation spreads scenes within 20 percent of uniform") {
  SynthConfig cfg;
  cfg.correlation = 0.0;
  cfg.clips_per_class = 100;
  const auto m = plan_dataset(cfg);
  std::map<std::pair<int, int>, int> cells;
  int n = 0;
  for (const auto* r : m.split(dataio::Split::train)) cells[{r->action_label, r->scene_label}]++, ++n;
  CHECK(n == 400);
  for (int a = 0; a < 4; ++a)
    for (int s = 0; s < 4; ++s) {
      const double expected = 100.0 / 4.0;
      CHECK(std::abs(cells[{a, s}] - expected) <= 0.2 * expected);
    }
  CHECK(mutual_information(m, 4, 4) < 0.05);
}

TEST_CASE("default sizes with ten clips per class") {
  SynthConfig cfg;
  const auto m = plan_dataset(cfg);
  CHECK(m.split(dataio::Split::train).size() == 40);
  CHECK(m.split(dataio::Split::closed_test).size() == 20);
  CHECK(m.split(dataio::Split::open_test).size() == 20);
  for (const auto* r : m.split(dataio::Split::open_test)) CHECK(r->action_label >= 4);
}

TEST_CASE("unfamiliar open scenes avoid the training pairings") {
  SynthConfig cfg;
  cfg.n_scenes = 6;
  cfg.open_scene_policy = OpenScenePolicy::unfamiliar;
  const auto m = plan_dataset(cfg);
  for (const auto* r : m.split(dataio::Split::open_test)) CHECK(r->scene_label >= 4);
}

TEST_CASE("per-clip seeds come from the mix hash") {
  SynthConfig cfg;
  cfg.master_seed = 17;
  const auto m = plan_dataset(cfg);
  for (std::size_t k = 0; k < m.clips.size(); ++k) CHECK(m.clips[k].seed == mix_seed(17, k));
  CHECK(mix_seed(17, 0) != mix_seed(17, 1));
  CHECK(mix_seed(17, 0) != mix_seed(18, 0));
}

TEST_CASE("constant red clip has a one-hot histogram at the top red bin") {
  ClipTensor clip(Dims4{4, 4, 4, 3});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t t = 0; t < 4; ++t) clip.at(i, j, t, 0) = 1.0f;
  const auto f = scene_feature(clip);
  REQUIRE(f.size() == 512);
  for (std::size_t k = 0; k < f.size(); ++k) CHECK(f[k] == (k == 7 * 64 ? 1.0f : 0.0f));
}

TEST_CASE("scene feature ignores the sprite path and is unit norm") {
  SynthConfig cfg;
  const auto a = scene_feature(generate_clip(cfg, 0, 2, 1));
  const auto b = scene_feature(generate_clip(cfg, 1, 2, 2));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k], na += a[k] * a[k], nb += b[k] * b[k];
  CHECK(1.0 - dot / std::sqrt(na * nb) < 0.05);
  CHECK(std::sqrt(na) == doctest::Approx(1.0).epsilon(1e-6));
  for (int s = 0; s < 4; ++s) {
    const auto f = scene_feature(generate_clip(cfg, s, s, 30 + s));
    double n = 0;
    for (float v : f) n += static_cast<double>(v) * v;
    CHECK(std::abs(std::sqrt(n) - 1.0) <= 1e-6);
  }
}

TEST_CASE("scene features separate the textures") {
  SynthConfig cfg;
  std::vector<std::vector<float>> feats;
  for (int s = 0; s < 4; ++s) feats.push_back(scene_feature(generate_clip(cfg, 0, s, 5)));
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      double dot = 0;
      for (std::size_t k = 0; k < 512; ++k) dot += feats[a][k] * feats[b][k];
      CHECK(dot < 0.9);
    }
}

TEST_CASE("same config and seed give a byte-identical dataset") {
  TempDir a("det_a"), b("det_b");
  SynthConfig cfg;
  cfg.clips_per_class = 2;
  cfg.master_seed = 4;
  generate_dataset(cfg, a.path());
  generate_dataset(cfg, b.path());
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    CHECK(dataio::read_text(e.path()) == dataio::read_text(b.path() / rel));
  }
}
