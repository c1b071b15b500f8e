#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "soar/tensor.hpp"

namespace soar::dataio {

// ---------------------------------------------------------------------------
// VTENSOR: "VTN1" | u32 rank | rank x u32 dims | u8 dtype (0 = f32) | payload.
// All integers and floats little-endian; payload row-major.
// ---------------------------------------------------------------------------

inline constexpr char kVtensorMagic[4] = {'V', 'T', 'N', '1'};
inline constexpr std::uint8_t kDtypeFloat32 = 0;

std::vector<std::uint8_t> encode_vtensor(std::span<const std::size_t> shape,
                                         std::span<const float> values);
Tensor decode_vtensor(std::span<const std::uint8_t> bytes);

void write_vtensor(const std::filesystem::path& path, const Tensor& t);
void write_vtensor(const std::filesystem::path& path, const ClipTensor& clip);
Tensor read_vtensor(const std::filesystem::path& path);
ClipTensor read_clip(const std::filesystem::path& path);

/// Writes then reads back; the result is bitwise identical for any valid clip.
ClipTensor roundtrip_tensor(const ClipTensor& t, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dataset manifest
// ---------------------------------------------------------------------------

enum class Split { train, closed_test, open_test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ClipRecord {
  std::string clip_id;
  std::string path;
  int action_label = 0;
  int scene_label = 0;
  Split split = Split::train;
  std::uint64_t seed = 0;
  std::optional<std::string> scene_feature_path;

  bool operator==(const ClipRecord&) const = default;
};

struct DatasetManifest {
  std::vector<ClipRecord> clips;
  int c_known = 0;
  int n_scenes = 0;
  // Provenance (config hash, master seed). Not part of validation.
  std::map<std::string, std::string> meta;

  std::vector<const ClipRecord*> split(Split s) const;
  bool operator==(const DatasetManifest&) const = default;
};

std::string serialize_manifest(const DatasetManifest& m);

/// Parses and validates. Relative paths are resolved against `base_dir` when
/// `check_files` is set; every offending record is listed in the error.
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                               bool check_files = true);

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

std::filesystem::path resolve(const std::filesystem::path& base_dir, const std::string& p);

// ---------------------------------------------------------------------------
// Prediction dumps (CSV). Column order: clip_id, true_action, u, p_*, f_*,
// then s_* when scene features are attached. Lines beginning with '#' carry
// provenance and are skipped by readers.
// ---------------------------------------------------------------------------

struct PredictionRow {
  std::string clip_id;
  int true_action = 0;
  float u = 1.0f;
  std::vector<float> probs;
  std::vector<float> feature;
  std::optional<std::vector<float>> scene_feature;

  bool operator==(const PredictionRow&) const = default;
};

struct PredictionDump {
  std::vector<PredictionRow> rows;
  std::map<std::string, std::string> meta;

  bool operator==(const PredictionDump&) const = default;
};

std::string serialize_dump(const PredictionDump& dump);
PredictionDump parse_dump(const std::string& text);
void save_dump(const PredictionDump& dump, const std::filesystem::path& path);
PredictionDump load_dump(const std::filesystem::path& path);

// Small helpers shared by the CLI and trainer.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);
std::string format_float(double v);

}  // namespace soar::dataio
