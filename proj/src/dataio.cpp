#include "soar/dataio.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace soar::dataio {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint32_t kMaxRank = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[at + i]) << (8 * i);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_vtensor(std::span<const std::size_t> shape,
                                         std::span<const float> values) {
  if (shape.empty() || shape.size() > kMaxRank) {
    throw SizeError("dataio", "rank " + std::to_string(shape.size()) + " outside [1, 16]");
  }
  for (auto d : shape) {
    if (d == 0) throw SizeError("dataio", "zero-length dimension");
    if (d > std::numeric_limits<std::uint32_t>::max()) {
      throw SizeError("dataio", "dimension " + std::to_string(d) + " does not fit in u32");
    }
  }
  if (Tensor::count_of(shape) != values.size()) {
    throw SizeError("dataio", "payload size does not match dims");
  }
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 + 4 * shape.size() + 1 + 4 * values.size());
  out.insert(out.end(), std::begin(kVtensorMagic), std::end(kVtensorMagic));
  put_u32(out, static_cast<std::uint32_t>(shape.size()));
  for (auto d : shape) put_u32(out, static_cast<std::uint32_t>(d));
  out.push_back(kDtypeFloat32);
  for (float f : values) put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

Tensor decode_vtensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("truncated magic", bytes.size());
  if (std::memcmp(bytes.data(), kVtensorMagic, 4) != 0) throw FormatError("bad magic", 0);
  if (bytes.size() < 8) throw FormatError("truncated rank", bytes.size());
  const std::uint32_t rank = get_u32(bytes, 4);
  if (rank == 0 || rank > kMaxRank) {
    throw FormatError("rank " + std::to_string(rank) + " outside [1, 16]", 4);
  }
  std::size_t at = 8;
  std::vector<std::size_t> shape(rank);
  for (std::uint32_t r = 0; r < rank; ++r) {
    if (bytes.size() < at + 4) throw FormatError("truncated dims", bytes.size());
    shape[r] = get_u32(bytes, at);
    if (shape[r] == 0) throw FormatError("zero-length dimension", at);
    at += 4;
  }
  if (bytes.size() < at + 1) throw FormatError("truncated dtype", bytes.size());
  if (bytes[at] != kDtypeFloat32) {
    throw FormatError("unsupported dtype code " + std::to_string(bytes[at]), at);
  }
  at += 1;

  std::size_t count = 0;
  try {
    count = Tensor::count_of(shape);
  } catch (const SizeError&) {
    throw SizeError("dataio", "dims overflow the addressable element count");
  }
  if (count > (std::numeric_limits<std::size_t>::max() - at) / 4) {
    throw SizeError("dataio", "payload byte size overflows");
  }
  const std::size_t expected_end = at + 4 * count;
  if (bytes.size() < expected_end) throw FormatError("truncated payload", bytes.size());
  if (bytes.size() > expected_end) throw FormatError("trailing bytes after payload", expected_end);

  std::vector<float> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, at + 4 * i));
  }
  return Tensor(std::move(shape), std::move(values));
}

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("dataio", "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("dataio", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("dataio", "short write to " + path.string());
}

}  // namespace

void write_vtensor(const fs::path& path, const Tensor& t) {
  write_bytes(path, encode_vtensor(t.shape, t.values));
}

void write_vtensor(const fs::path& path, const ClipTensor& clip) {
  const auto& d = clip.dims();
  const std::size_t shape[4] = {d.h, d.w, d.t, d.d};
  write_bytes(path, encode_vtensor(shape, clip.values()));
}

Tensor read_vtensor(const fs::path& path) { return decode_vtensor(read_bytes(path)); }

ClipTensor read_clip(const fs::path& path) { return to_clip(read_vtensor(path)); }

ClipTensor roundtrip_tensor(const ClipTensor& t, const fs::path& path) {
  for (float v : t.values()) {
    if (!std::isfinite(v)) throw ContractError("dataio", "clip contains a non-finite value");
  }
  write_vtensor(path, t);
  return read_clip(path);
}

// ---------------------------------------------------------------------------

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::closed_test: return "closed_test";
    case Split::open_test: return "open_test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "closed_test") return Split::closed_test;
  if (s == "open_test") return Split::open_test;
  throw ConfigError("dataio", "unknown split '" + s + "'");
}

std::vector<const ClipRecord*> DatasetManifest::split(Split s) const {
  std::vector<const ClipRecord*> out;
  for (const auto& c : clips) {
    if (c.split == s) out.push_back(&c);
  }
  return out;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base_dir / path;
}

std::string serialize_manifest(const DatasetManifest& m) {
  json j;
  j["C_known"] = m.c_known;
  j["N_scenes"] = m.n_scenes;
  if (!m.meta.empty()) j["meta"] = m.meta;
  json clips = json::array();
  for (const auto& c : m.clips) {
    json r;
    r["clip_id"] = c.clip_id;
    r["path"] = c.path;
    r["action_label"] = c.action_label;
    r["scene_label"] = c.scene_label;
    r["split"] = to_string(c.split);
    r["seed"] = c.seed;
    if (c.scene_feature_path) r["scene_feature_path"] = *c.scene_feature_path;
    clips.push_back(std::move(r));
  }
  j["clips"] = std::move(clips);
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& text, const fs::path& base_dir, bool check_files) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("manifest is not valid structured text: ") + e.what(), e.byte);
  }
  static const std::set<std::string> top_keys = {"C_known", "N_scenes", "meta", "clips"};
  static const std::set<std::string> clip_keys = {"clip_id", "path", "action_label", "scene_label",
                                                  "split", "seed", "scene_feature_path"};
  std::vector<std::string> issues;
  for (const auto& [k, v] : j.items()) {
    if (!top_keys.contains(k)) issues.push_back("unknown top-level key '" + k + "'");
  }
  DatasetManifest m;
  try {
    m.c_known = j.at("C_known").get<int>();
    m.n_scenes = j.at("N_scenes").get<int>();
    if (j.contains("meta")) m.meta = j.at("meta").get<std::map<std::string, std::string>>();
    for (const auto& r : j.at("clips")) {
      for (const auto& [k, v] : r.items()) {
        if (!clip_keys.contains(k)) issues.push_back("unknown clip key '" + k + "'");
      }
      ClipRecord c;
      c.clip_id = r.at("clip_id").get<std::string>();
      c.path = r.at("path").get<std::string>();
      c.action_label = r.at("action_label").get<int>();
      c.scene_label = r.at("scene_label").get<int>();
      c.split = split_from_string(r.at("split").get<std::string>());
      c.seed = r.at("seed").get<std::uint64_t>();
      if (r.contains("scene_feature_path")) {
        c.scene_feature_path = r.at("scene_feature_path").get<std::string>();
      }
      m.clips.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ValidationError("dataio", {std::string("malformed manifest: ") + e.what()});
  }

  if (m.c_known < 1) issues.push_back("C_known must be >= 1");
  if (m.n_scenes < 1) issues.push_back("N_scenes must be >= 1");
  std::set<std::string> seen;
  for (const auto& c : m.clips) {
    const std::string tag = "clip '" + c.clip_id + "': ";
    if (!seen.insert(c.clip_id).second) issues.push_back(tag + "duplicate clip_id");
    if (c.action_label < 0) issues.push_back(tag + "negative action_label");
    if (c.split == Split::open_test) {
      if (c.action_label < m.c_known) {
        issues.push_back(tag + "open_test action_label " + std::to_string(c.action_label) +
                         " < C_known " + std::to_string(m.c_known));
      }
    } else if (c.action_label >= m.c_known) {
      issues.push_back(tag + to_string(c.split) + " action_label " + std::to_string(c.action_label) +
                       " >= C_known " + std::to_string(m.c_known));
    }
    if (c.scene_label < 0 || c.scene_label >= m.n_scenes) {
      issues.push_back(tag + "scene_label " + std::to_string(c.scene_label) + " outside [0, " +
                       std::to_string(m.n_scenes) + ")");
    }
    if (check_files) {
      if (!fs::exists(resolve(base_dir, c.path))) issues.push_back(tag + "missing file " + c.path);
      if (c.scene_feature_path && !fs::exists(resolve(base_dir, *c.scene_feature_path))) {
        issues.push_back(tag + "missing scene feature file " + *c.scene_feature_path);
      }
    }
  }
  if (!issues.empty()) throw ValidationError("dataio", std::move(issues));
  return m;
}

void save_manifest(const DatasetManifest& m, const fs::path& path) {
  write_text(path, serialize_manifest(m));
}

DatasetManifest load_manifest(const fs::path& path) {
  return parse_manifest(read_text(path), path.parent_path());
}

// ---------------------------------------------------------------------------

std::string format_float(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string format_f32(float v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

float parse_f32(std::string_view s, std::size_t line) {
  float v = 0.0f;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ParseError("dataio", "bad float '" + std::string(s) + "' on line " + std::to_string(line));
  }
  return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void validate_row(const PredictionRow& r) {
  double sum = 0.0;
  for (float p : r.probs) sum += p;
  if (std::abs(sum - 1.0) > 1e-5) {
    throw ValidationError("dataio", {"row '" + r.clip_id + "': probs sum to " + format_float(sum)});
  }
  if (!(r.u > 0.0f && r.u <= 1.0f)) {
    throw ValidationError("dataio", {"row '" + r.clip_id + "': u outside (0, 1]"});
  }
}

}  // namespace

std::string serialize_dump(const PredictionDump& dump) {
  std::ostringstream os;
  for (const auto& [k, v] : dump.meta) os << "# " << k << "=" << v << "\n";
  const std::size_t c = dump.rows.empty() ? 0 : dump.rows.front().probs.size();
  const std::size_t dfeat = dump.rows.empty() ? 0 : dump.rows.front().feature.size();
  const std::size_t dscene =
      dump.rows.empty() || !dump.rows.front().scene_feature ? 0 : dump.rows.front().scene_feature->size();
  os << "clip_id,true_action,u";
  for (std::size_t i = 0; i < c; ++i) os << ",p" << i;
  for (std::size_t i = 0; i < dfeat; ++i) os << ",f" << i;
  for (std::size_t i = 0; i < dscene; ++i) os << ",s" << i;
  os << "\n";
  for (const auto& r : dump.rows) {
    if (r.probs.size() != c || r.feature.size() != dfeat ||
        (r.scene_feature ? r.scene_feature->size() : 0) != dscene) {
      throw ShapeError("dataio", "row '" + r.clip_id + "' has inconsistent column counts");
    }
    if (r.clip_id.find_first_of(",\n") != std::string::npos) {
      throw ValidationError("dataio", {"clip_id '" + r.clip_id + "' contains a separator"});
    }
    os << r.clip_id << "," << r.true_action << "," << format_f32(r.u);
    for (float v : r.probs) os << "," << format_f32(v);
    for (float v : r.feature) os << "," << format_f32(v);
    if (r.scene_feature) {
      for (float v : *r.scene_feature) os << "," << format_f32(v);
    }
    os << "\n";
  }
  return os.str();
}

PredictionDump parse_dump(const std::string& text) {
  PredictionDump dump;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::size_t c = 0, dfeat = 0, dscene = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      auto body = line.substr(1);
      if (!body.empty() && body.front() == ' ') body.erase(0, 1);
      auto eq = body.find('=');
      if (eq != std::string::npos) dump.meta[body.substr(0, eq)] = body.substr(eq + 1);
      continue;
    }
    auto cols = split_csv(line);
    if (!have_header) {
      if (cols.size() < 3 || cols[0] != "clip_id" || cols[1] != "true_action" || cols[2] != "u") {
        throw ParseError("dataio", "dump header must start with clip_id,true_action,u (line " +
                              std::to_string(lineno) + ")");
      }
      for (std::size_t i = 3; i < cols.size(); ++i) {
        switch (cols[i].front()) {
          case 'p': ++c; break;
          case 'f': ++dfeat; break;
          case 's': ++dscene; break;
          default: throw ParseError("dataio", "unknown dump column '" + std::string(cols[i]) + "'");
        }
      }
      have_header = true;
      continue;
    }
    if (cols.size() != 3 + c + dfeat + dscene) {
      throw ParseError("dataio", "row has " + std::to_string(cols.size()) + " columns on line " +
                            std::to_string(lineno));
    }
    PredictionRow r;
    r.clip_id = std::string(cols[0]);
    {
      auto res = std::from_chars(cols[1].data(), cols[1].data() + cols[1].size(), r.true_action);
      if (res.ec != std::errc()) throw ParseError("dataio", "bad true_action on line " + std::to_string(lineno));
    }
    r.u = parse_f32(cols[2], lineno);
    std::size_t k = 3;
    for (std::size_t i = 0; i < c; ++i) r.probs.push_back(parse_f32(cols[k++], lineno));
    for (std::size_t i = 0; i < dfeat; ++i) r.feature.push_back(parse_f32(cols[k++], lineno));
    if (dscene > 0) {
      r.scene_feature.emplace();
      for (std::size_t i = 0; i < dscene; ++i) r.scene_feature->push_back(parse_f32(cols[k++], lineno));
    }
    validate_row(r);
    dump.rows.push_back(std::move(r));
  }
  if (!have_header) throw ParseError("dataio", "dump has no header row");
  return dump;
}

void save_dump(const PredictionDump& dump, const fs::path& path) { write_text(path, serialize_dump(dump)); }

PredictionDump load_dump(const fs::path& path) { return parse_dump(read_text(path)); }

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("dataio", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("dataio", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("dataio", "short write to " + path.string());
}

}  // namespace soar::dataio
