#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "soar/dataio.hpp"
#include "soar/synthgen.hpp"
#include "support.hpp"

using namespace soar;
using namespace soar::dataio;
using testing_support::TempDir;

namespace {

std::vector<std::uint8_t> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

// Header and payload packed by hand, one byte at a time.
std::vector<std::uint8_t> hand_pack(const std::vector<std::uint32_t>& dims, const std::vector<float>& vals) {
  std::vector<std::uint8_t> out = {'V', 'T', 'N', '1'};
  put_u32(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put_u32(out, d);
  out.push_back(0);
  for (float f : vals) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32(out, bits);
  }
  return out;
}

void touch(const std::filesystem::path& p) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p) << "x";
}

DatasetManifest two_clip_manifest() {
  DatasetManifest m;
  m.c_known = 2;
  m.n_scenes = 2;
  m.clips.push_back({"a", "a.vtn", 0, 0, Split::train, 11, std::nullopt});
  m.clips.push_back({"b", "b.vtn", 1, 1, Split::closed_test, 12, std::string("b_feat.vtn")});
  return m;
}

}  // namespace

TEST_CASE("single-element tensor survives the roundtrip") {
  TempDir dir("vt1");
  ClipTensor t(Dims4{1, 1, 1, 1}, 0.5f);
  CHECK(roundtrip_tensor(t, dir / "one.vtn") == t);
}

TEST_CASE("file bytes match a hand-packed header and payload") {
  TempDir dir("vt2");
  std::mt19937_64 rng(7);
  const auto clip = testing_support::random_clip(rng, Dims4{4, 4, 2, 3});
  const auto back = roundtrip_tensor(clip, dir / "r.vtn");
  CHECK(back.dims() == Dims4{4, 4, 2, 3});
  CHECK(std::memcmp(back.storage().data(), clip.storage().data(), clip.size() * 4) == 0);
  const auto expected = hand_pack({4, 4, 2, 3}, clip.storage());
  CHECK(file_bytes(dir / "r.vtn") == expected);
}

TEST_CASE("roundtrip is bitwise identity on odd float values") {
  TempDir dir("vt3");
  std::vector<float> vals = {0.0f, -0.0f, 1e-40f, -3.5f, std::numeric_limits<float>::max(),
                             std::numeric_limits<float>::denorm_min()};
  ClipTensor t(Dims4{1, 2, 3, 1}, vals);
  const auto back = roundtrip_tensor(t, dir / "odd.vtn");
  CHECK(std::memcmp(back.storage().data(), vals.data(), vals.size() * 4) == 0);
}

TEST_CASE("bad magic is reported at offset 0") {
  auto bytes = hand_pack({1}, {1.0f});
  std::memcpy(bytes.data(), "XXXX", 4);
  try {
    decode_vtensor(bytes);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 0);
  }
}

TEST_CASE("truncated payload and bad dtype raise format errors") {
  auto bytes = hand_pack({2, 2}, {1, 2, 3, 4});
  auto cut = bytes;
  cut.resize(cut.size() - 3);
  CHECK_THROWS_AS(decode_vtensor(cut), FormatError);
  auto short_header = bytes;
  short_header.resize(6);
  CHECK_THROWS_AS(decode_vtensor(short_header), FormatError);
  auto dtype = bytes;
  dtype[4 + 4 + 8] = 3;
  CHECK_THROWS_AS(decode_vtensor(dtype), FormatError);
}

TEST_CASE("overflowing dims raise a size error") {
  std::vector<std::uint8_t> bytes = {'V', 'T', 'N', '1'};
  put_u32(bytes, 4);
  for (int k = 0; k < 4; ++k) put_u32(bytes, 0xFFFFFFFFu);
  bytes.push_back(0);
  CHECK_THROWS_AS(decode_vtensor(bytes), SizeError);
}

TEST_CASE("two-clip manifest loads") {
  TempDir dir("man1");
  touch(dir / "a.vtn");
  touch(dir / "b.vtn");
  touch(dir / "b_feat.vtn");
  const auto m = two_clip_manifest();
  save_manifest(m, dir / "manifest.json");
  const auto back = load_manifest(dir / "manifest.json");
  CHECK(back.clips.size() == 2);
  CHECK(back == m);
}

TEST_CASE("open-test clip with a known label is rejected") {
  auto m = two_clip_manifest();
  m.clips[1].split = Split::open_test;
  CHECK_THROWS_AS(parse_manifest(serialize_manifest(m), ".", false), ValidationError);
}

TEST_CASE("validation lists every offending record") {
  auto m = two_clip_manifest();
  m.clips.push_back({"a", "c.vtn", 5, 0, Split::train, 1, std::nullopt});   // duplicate id, label
  m.clips.push_back({"d", "d.vtn", 0, 9, Split::train, 1, std::nullopt});   // scene out of range
  try {
    parse_manifest(serialize_manifest(m), ".", false);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() >= 3);
  }
  TempDir dir("man2");
  try {
    parse_manifest(serialize_manifest(two_clip_manifest()), dir.path(), true);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.issues().size() == 3);  // two clips and one feature file missing
  }
}

TEST_CASE("malformed manifest text reports the byte offset") {
  try {
    parse_manifest("{not json", ".", false);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.offset() == 3);
  }
}

TEST_CASE("twelve-clip generated manifest splits 8/2/2") {
  TempDir dir("man3");
  synthgen::SynthConfig cfg;
  cfg.clips_per_class = 2;
  cfg.closed_test_fraction = 0.25;
  cfg.open_clips_per_class = 1;
  const auto m = synthgen::generate_dataset(cfg, dir.path());
  const auto back = load_manifest(dir / "manifest.json");
  CHECK(back.clips.size() == 12);
  CHECK(back.split(Split::train).size() == 8);
  CHECK(back.split(Split::closed_test).size() == 2);
  CHECK(back.split(Split::open_test).size() == 2);
  CHECK(back == m);
}

TEST_CASE("manifest save/load is the identity on random manifests") {
  std::mt19937_64 rng(5);
  TempDir dir("man4");
  for (int trial = 0; trial < 20; ++trial) {
    DatasetManifest m;
    m.c_known = 3;
    m.n_scenes = 4;
    m.meta["k"] = std::to_string(trial);
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int i = 0; i < n; ++i) {
      ClipRecord r;
      r.clip_id = "c" + std::to_string(i);
      r.path = "p/" + std::to_string(i) + ".vtn";
      r.split = static_cast<Split>(rng() % 3);
      r.action_label = r.split == Split::open_test ? 3 + static_cast<int>(rng() % 2) : static_cast<int>(rng() % 3);
      r.scene_label = static_cast<int>(rng() % 4);
      r.seed = rng();
      if (rng() % 2) r.scene_feature_path = "f/" + std::to_string(i) + ".vtn";
      m.clips.push_back(r);
    }
    CHECK(parse_manifest(serialize_manifest(m), dir.path(), false) == m);
  }
}

TEST_CASE("prediction dump roundtrip keeps every float bit") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  PredictionDump d;
  d.meta["seed"] = "3";
  for (int i = 0; i < 6; ++i) {
    PredictionRow r;
    r.clip_id = "clip_" + std::to_string(i);
    r.true_action = i % 3;
    r.u = u(rng);
    float s = 0;
    for (int c = 0; c < 3; ++c) r.probs.push_back(u(rng)), s += r.probs.back();
    for (auto& p : r.probs) p /= s;
    for (int k = 0; k < 5; ++k) r.feature.push_back(u(rng) - 0.5f);
    r.scene_feature = std::vector<float>{u(rng), u(rng)};
    d.rows.push_back(r);
  }
  CHECK(parse_dump(serialize_dump(d)) == d);
  TempDir dir("dump");
  save_dump(d, dir / "d.csv");
  CHECK(load_dump(dir / "d.csv") == d);
}

TEST_CASE("dump with probs off the simplex or u outside (0,1] is rejected") {
  PredictionDump d;
  d.rows.push_back({"a", 0, 0.5f, {0.7f, 0.7f}, {1.0f}, std::nullopt});
  CHECK_THROWS(parse_dump(serialize_dump(d)));
  d.rows[0].probs = {0.5f, 0.5f};
  d.rows[0].u = 0.0f;
  CHECK_THROWS(parse_dump(serialize_dump(d)));
}
