#include "soar/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>

#include <json.hpp>

#include "soar/dataio.hpp"

namespace soar::netcore {

namespace fs = std::filesystem;
using nlohmann::json;

Volume ModelConfig::feature_volume() const {
  return {input.h / 8, input.w / 8, input.t / 4, feature_dim()};
}

void ModelConfig::validate() const {
  if (input.h == 0 || input.w == 0 || input.t == 0 || input.h % 8 != 0 || input.w % 8 != 0 ||
      input.t % 4 != 0) {
    throw ShapeError("netcore", "clip dims (" + std::to_string(input.h) + ", " + std::to_string(input.w) +
                                    ", " + std::to_string(input.t) +
                                    ") must be positive multiples of (8, 8, 4) for the total backbone stride");
  }
  if (input.d == 0) throw ShapeError("netcore", "clip needs at least one channel");
  for (auto w : widths) {
    if (w == 0) throw ShapeError("netcore", "channel widths must be positive");
  }
  if (num_classes == 0 || num_scenes == 0 || scene_hidden == 0) {
    throw ShapeError("netcore", "class, scene and hidden counts must be positive");
  }
}

kernels::ConvGeometry backbone_geometry(const ModelConfig& cfg, int block) {
  kernels::ConvGeometry g;
  Volume in{cfg.input.h, cfg.input.w, cfg.input.t, cfg.input.d};
  for (int b = 0; b < block; ++b) {
    in = backbone_geometry(cfg, b).out();
  }
  g.in = in;
  g.c_out = cfg.widths[static_cast<std::size_t>(block)];
  g.kernel = {3, 3, 3};
  g.stride = block == 0 ? kernels::Triple{2, 2, 1} : kernels::Triple{2, 2, 2};
  g.pad = {1, 1, 1};
  return g;
}

kernels::TConvGeometry decoder_geometry(const ModelConfig& cfg, int layer) {
  kernels::TConvGeometry g;
  Volume in = cfg.feature_volume();
  for (int l = 0; l < layer; ++l) in = decoder_geometry(cfg, l).out();
  g.in = in;
  switch (layer) {
    case 0: g.c_out = cfg.widths[1]; g.kernel = g.stride = {2, 2, 2}; break;
    case 1: g.c_out = cfg.widths[0]; g.kernel = g.stride = {2, 2, 2}; break;
    default: g.c_out = cfg.input.d; g.kernel = g.stride = {2, 2, 1}; break;
  }
  return g;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.validate();
  ModelParams p;
  p.config = cfg;
  for (int b = 0; b < 3; ++b) {
    const auto g = backbone_geometry(cfg, b);
    p.conv_w[b] = Tensor({3, 3, 3, g.in.c, g.c_out});
    p.conv_b[b] = Tensor({g.c_out});
  }
  const std::size_t dp = cfg.feature_dim();
  p.edl_w = Tensor({dp, cfg.num_classes});
  p.edl_b = Tensor({cfg.num_classes});
  for (int l = 0; l < 3; ++l) {
    const auto g = decoder_geometry(cfg, l);
    p.dec_w[l] = Tensor({g.kernel[0], g.kernel[1], g.kernel[2], g.in.c, g.c_out});
    p.dec_b[l] = Tensor({g.c_out});
  }
  p.scene_w1 = Tensor({dp, cfg.scene_hidden});
  p.scene_b1 = Tensor({cfg.scene_hidden});
  p.scene_w2 = Tensor({cfg.scene_hidden, cfg.num_scenes});
  p.scene_b2 = Tensor({cfg.num_scenes});
  return p;
}

ModelParams ModelParams::he_init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zeros(cfg);
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Tensor& t, std::size_t fan_in) {
    std::normal_distribution<float> gauss(0.0f, std::sqrt(2.0f / static_cast<float>(fan_in)));
    for (auto& v : t.values) v = gauss(rng);
  };
  for (int b = 0; b < 3; ++b) fill(p.conv_w[b], 27 * p.conv_w[b].shape[3]);
  fill(p.edl_w, cfg.feature_dim());
  std::fill(p.edl_b.values.begin(), p.edl_b.values.end(), cfg.edl_bias_init);
  for (int l = 0; l < 3; ++l) fill(p.dec_w[l], p.dec_w[l].shape[3]);
  fill(p.scene_w1, cfg.feature_dim());
  fill(p.scene_w2, cfg.scene_hidden);
  return p;
}

std::vector<ModelParams::Named> ModelParams::named() {
  std::vector<Named> out;
  for (int b = 0; b < 3; ++b) {
    out.push_back({"backbone.conv" + std::to_string(b) + ".weight", Group::backbone, &conv_w[b]});
    out.push_back({"backbone.conv" + std::to_string(b) + ".bias", Group::backbone, &conv_b[b]});
  }
  out.push_back({"edl.weight", Group::edl, &edl_w});
  out.push_back({"edl.bias", Group::edl, &edl_b});
  for (int l = 0; l < 3; ++l) {
    out.push_back({"decoder.tconv" + std::to_string(l) + ".weight", Group::decoder, &dec_w[l]});
    out.push_back({"decoder.tconv" + std::to_string(l) + ".bias", Group::decoder, &dec_b[l]});
  }
  out.push_back({"scene.fc0.weight", Group::scene, &scene_w1});
  out.push_back({"scene.fc0.bias", Group::scene, &scene_b1});
  out.push_back({"scene.fc1.weight", Group::scene, &scene_w2});
  out.push_back({"scene.fc1.bias", Group::scene, &scene_b2});
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (const auto& n : const_cast<ModelParams*>(this)->named()) out.emplace_back(n.name, n.tensor);
  return out;
}

void ModelParams::set_zero() {
  for (auto& n : named()) std::fill(n.tensor->values.begin(), n.tensor->values.end(), 0.0f);
}

// ---------------------------------------------------------------------------

namespace {

void relu_inplace(std::vector<float>& v) {
  for (auto& x : v) x = std::max(x, 0.0f);
}

void relu_mask(std::span<float> g, std::span<const float> act) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(act[i] > 0.0f)) g[i] = 0.0f;
  }
}

// out[o] = b[o] + sum_i x[i] * W[i][o]
void affine(std::span<const float> x, const Tensor& W, const Tensor& b, std::span<float> out) {
  const std::size_t din = W.shape[0], dout = W.shape[1];
  for (std::size_t o = 0; o < dout; ++o) out[o] = b.values[o];
  for (std::size_t i = 0; i < din; ++i) {
    const float xi = x[i];
    const float* row = W.values.data() + i * dout;
    for (std::size_t o = 0; o < dout; ++o) out[o] += xi * row[o];
  }
}

// Accumulates dW, db and (optionally) writes dx.
void affine_backward(std::span<const float> x, std::span<const float> gout, const Tensor& W, Tensor& gW,
                     Tensor& gb, std::span<float> gx) {
  const std::size_t din = W.shape[0], dout = W.shape[1];
  for (std::size_t o = 0; o < dout; ++o) gb.values[o] += gout[o];
  for (std::size_t i = 0; i < din; ++i) {
    const float xi = x[i];
    float* grow = gW.values.data() + i * dout;
    const float* row = W.values.data() + i * dout;
    float acc = 0.0f;
    for (std::size_t o = 0; o < dout; ++o) {
      grow[o] += xi * gout[o];
      acc += row[o] * gout[o];
    }
    if (!gx.empty()) gx[i] = acc;
  }
}

void check_feature_map(const FeatureMap& fm, const ModelParams& p) {
  if (fm.dims != p.config.feature_volume() || fm.F.size() != fm.dims.count()) {
    throw ShapeError("netcore", "feature map shape does not match the model configuration");
  }
}

}  // namespace

std::vector<float> mean_pool(std::span<const float> F, std::size_t channels) {
  std::vector<double> acc(channels, 0.0);
  const std::size_t sites = F.size() / channels;
  for (std::size_t s = 0; s < sites; ++s) {
    for (std::size_t c = 0; c < channels; ++c) acc[c] += F[s * channels + c];
  }
  std::vector<float> f(channels);
  for (std::size_t c = 0; c < channels; ++c) f[c] = static_cast<float>(acc[c] / static_cast<double>(sites));
  return f;
}

FeatureMap backbone_forward(const ClipTensor& clip, const ModelParams& p, BackboneCache* cache) {
  const auto& cfg = p.config;
  if (clip.dims() != cfg.input) {
    const auto& d = clip.dims();
    if (d.h % 8 != 0 || d.w % 8 != 0 || d.t % 4 != 0) {
      throw ShapeError("netcore", "clip dims (" + std::to_string(d.h) + ", " + std::to_string(d.w) + ", " +
                                      std::to_string(d.t) + ") must be multiples of (8, 8, 4)");
    }
    throw ShapeError("netcore", "clip dims do not match the model input dims");
  }
  std::vector<float> x = clip.storage();
  std::array<std::vector<float>, 3> act;
  std::span<const float> in = x;
  for (int b = 0; b < 3; ++b) {
    const auto g = backbone_geometry(cfg, b);
    act[b].resize(g.out().count());
    kernels::conv3d_forward<float>(g, in, p.conv_w[b].values, p.conv_b[b].values, act[b]);
    relu_inplace(act[b]);
    in = act[b];
  }
  FeatureMap fm;
  fm.dims = cfg.feature_volume();
  fm.F = act[2];
  fm.f = mean_pool(fm.F, fm.dims.c);
  if (cache) {
    cache->input = std::move(x);
    cache->act = std::move(act);
  }
  return fm;
}

void backbone_backward(const ModelParams& p, const BackboneCache& cache, std::span<const float> gF,
                       ModelParams& grads) {
  const auto& cfg = p.config;
  std::vector<float> g(gF.begin(), gF.end());
  for (int b = 2; b >= 0; --b) {
    const auto geo = backbone_geometry(cfg, b);
    relu_mask(g, cache.act[b]);
    std::span<const float> in = b == 0 ? std::span<const float>(cache.input) : std::span<const float>(cache.act[b - 1]);
    kernels::conv3d_backward_params<float>(geo, in, g, grads.conv_w[b].values, grads.conv_b[b].values);
    if (b > 0) {
      std::vector<float> gin(geo.in.count());
      kernels::conv3d_backward_input<float>(geo, g, p.conv_w[b].values, gin);
      g = std::move(gin);
    }
  }
}

// ---------------------------------------------------------------------------

EvidentialOutput from_evidence(std::span<const float> e) {
  EvidentialOutput out;
  out.e.assign(e.begin(), e.end());
  out.alpha.resize(e.size());
  double S = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!(e[i] >= 0.0f)) throw ContractError("netcore", "evidence must be non-negative");
    out.alpha[i] = e[i] + 1.0f;
    S += static_cast<double>(e[i]) + 1.0;
  }
  out.S = S;
  out.p.resize(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) out.p[i] = static_cast<float>((static_cast<double>(e[i]) + 1.0) / S);
  out.u = static_cast<double>(e.size()) / S;
  return out;
}

EvidentialOutput edl_head(std::span<const float> f, const ModelParams& p) {
  if (f.size() != p.config.feature_dim()) throw ShapeError("netcore", "feature vector size mismatch");
  std::vector<float> z(p.config.num_classes);
  affine(f, p.edl_w, p.edl_b, z);
  std::vector<float> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) e[i] = std::max(z[i], 0.0f);
  auto out = from_evidence(e);
  out.z = std::move(z);
  return out;
}

EvidentialOutput edl_head_map(const FeatureMap& fm, const ModelParams& p) {
  check_feature_map(fm, p);
  const std::size_t C = p.config.num_classes, D = fm.dims.c, sites = fm.dims.sites();
  EvidentialOutput out;
  out.map_dims = {fm.dims.h, fm.dims.w, fm.dims.t, C};
  out.E.resize(sites * C);
  out.U.resize(sites);
  for (std::size_t s = 0; s < sites; ++s) {
    std::span<float> es(out.E.data() + s * C, C);
    affine(std::span<const float>(fm.F.data() + s * D, D), p.edl_w, p.edl_b, es);
    double strength = 0.0;
    for (auto& v : es) {
      v = std::max(v, 0.0f);
      strength += static_cast<double>(v) + 1.0;
    }
    out.U[s] = static_cast<float>(static_cast<double>(C) / strength);
  }
  return out;
}

void edl_head_backward(std::span<const float> f, const EvidentialOutput& out, std::span<const float> grad_e,
                       const ModelParams& p, ModelParams& grads, std::span<float> grad_f) {
  std::vector<float> gz(grad_e.begin(), grad_e.end());
  for (std::size_t i = 0; i < gz.size(); ++i) {
    if (!(out.z[i] > 0.0f)) gz[i] = 0.0f;
  }
  affine_backward(f, gz, p.edl_w, grads.edl_w, grads.edl_b, grad_f);
}

std::vector<float> softmax_logits(std::span<const float> f, const ModelParams& p) {
  std::vector<float> z(p.config.num_classes);
  affine(f, p.edl_w, p.edl_b, z);
  return z;
}

void softmax_logits_backward(std::span<const float> f, std::span<const float> grad_logits, const ModelParams& p,
                             ModelParams& grads, std::span<float> grad_f) {
  affine_backward(f, grad_logits, p.edl_w, grads.edl_w, grads.edl_b, grad_f);
}

// ---------------------------------------------------------------------------

namespace {

struct Taps {
  std::vector<std::size_t> i0, i1;
  std::vector<double> frac;
};

Taps linear_taps(std::size_t in, std::size_t out) {
  Taps t;
  t.i0.resize(out);
  t.i1.resize(out);
  t.frac.resize(out);
  const double scale = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double x = (static_cast<double>(o) + 0.5) * scale - 0.5;
    x = std::clamp(x, 0.0, static_cast<double>(in - 1));
    const auto i0 = static_cast<std::size_t>(std::floor(x));
    t.i0[o] = i0;
    t.i1[o] = std::min(i0 + 1, in - 1);
    t.frac[o] = x - static_cast<double>(i0);
  }
  return t;
}

}  // namespace

std::vector<float> trilinear_upsample(std::span<const float> src, Volume from, Volume to) {
  if (src.size() != from.sites()) throw ShapeError("netcore", "upsample source size mismatch");
  const Taps th = linear_taps(from.h, to.h), tw = linear_taps(from.w, to.w), tt = linear_taps(from.t, to.t);
  auto at = [&](std::size_t i, std::size_t j, std::size_t k) -> double {
    return src[(i * from.w + j) * from.t + k];
  };
  std::vector<float> out(to.h * to.w * to.t);
  for (std::size_t i = 0; i < to.h; ++i) {
    for (std::size_t j = 0; j < to.w; ++j) {
      for (std::size_t k = 0; k < to.t; ++k) {
        const double a = th.frac[i], b = tw.frac[j], c = tt.frac[k];
        double v = 0.0;
        v += (1 - a) * (1 - b) * (1 - c) * at(th.i0[i], tw.i0[j], tt.i0[k]);
        v += (1 - a) * (1 - b) * c * at(th.i0[i], tw.i0[j], tt.i1[k]);
        v += (1 - a) * b * (1 - c) * at(th.i0[i], tw.i1[j], tt.i0[k]);
        v += (1 - a) * b * c * at(th.i0[i], tw.i1[j], tt.i1[k]);
        v += a * (1 - b) * (1 - c) * at(th.i1[i], tw.i0[j], tt.i0[k]);
        v += a * (1 - b) * c * at(th.i1[i], tw.i0[j], tt.i1[k]);
        v += a * b * (1 - c) * at(th.i1[i], tw.i1[j], tt.i0[k]);
        v += a * b * c * at(th.i1[i], tw.i1[j], tt.i1[k]);
        out[(i * to.w + j) * to.t + k] = static_cast<float>(v);
      }
    }
  }
  return out;
}

std::vector<float> normalize_upsample(std::span<const float> U, Volume map_dims, const Dims4& target) {
  const auto norm = min_max_normalize(U);
  auto up = trilinear_upsample(norm, {map_dims.h, map_dims.w, map_dims.t, 1}, {target.h, target.w, target.t, 1});
  for (auto& v : up) v = std::clamp(v, 0.0f, 1.0f);
  return up;
}

// ---------------------------------------------------------------------------

ClipTensor decoder_forward(const FeatureMap& fm, const ModelParams& p, DecoderCache* cache) {
  check_feature_map(fm, p);
  std::array<std::vector<float>, 2> act;
  std::span<const float> in = fm.F;
  for (int l = 0; l < 2; ++l) {
    const auto g = decoder_geometry(p.config, l);
    act[l].resize(g.out().count());
    kernels::tconv3d_forward<float>(g, in, p.dec_w[l].values, p.dec_b[l].values, act[l]);
    relu_inplace(act[l]);
    in = act[l];
  }
  const auto g = decoder_geometry(p.config, 2);
  ClipTensor out(p.config.input);
  kernels::tconv3d_forward<float>(g, in, p.dec_w[2].values, p.dec_b[2].values, out.values());
  if (cache) cache->act = std::move(act);
  return out;
}

void decoder_backward(const FeatureMap& fm, const DecoderCache& cache, const ClipTensor& grad_out,
                      const ModelParams& p, ModelParams& grads, std::span<float> grad_F) {
  if (grad_out.dims() != p.config.input) throw ShapeError("netcore", "decoder gradient shape mismatch");
  std::vector<float> g(grad_out.storage());
  for (int l = 2; l >= 0; --l) {
    const auto geo = decoder_geometry(p.config, l);
    std::span<const float> in = l == 0 ? std::span<const float>(fm.F) : std::span<const float>(cache.act[l - 1]);
    kernels::tconv3d_backward_params<float>(geo, in, g, grads.dec_w[l].values, grads.dec_b[l].values);
    std::vector<float> gin(geo.in.count());
    kernels::tconv3d_backward_input<float>(geo, g, p.dec_w[l].values, gin);
    if (l > 0) relu_mask(gin, cache.act[l - 1]);
    g = std::move(gin);
  }
  std::copy(g.begin(), g.end(), grad_F.begin());
}

// ---------------------------------------------------------------------------

SceneOutput scene_head(std::span<const float> f, const ModelParams& p) {
  if (f.size() != p.config.feature_dim()) throw ShapeError("netcore", "feature vector size mismatch");
  SceneOutput out;
  out.hidden.resize(p.config.scene_hidden);
  affine(f, p.scene_w1, p.scene_b1, out.hidden);
  relu_inplace(out.hidden);
  out.logits.resize(p.config.num_scenes);
  affine(out.hidden, p.scene_w2, p.scene_b2, out.logits);
  return out;
}

SceneOutput scene_head_map(const FeatureMap& fm, int scene, const ModelParams& p) {
  check_feature_map(fm, p);
  if (scene < 0 || static_cast<std::size_t>(scene) >= p.config.num_scenes) {
    throw RangeError("netcore", "scene label " + std::to_string(scene) + " outside [0, " +
                                    std::to_string(p.config.num_scenes) + ")");
  }
  const std::size_t D = fm.dims.c, Hd = p.config.scene_hidden, N = p.config.num_scenes;
  const std::size_t sites = fm.dims.sites();
  SceneOutput out;
  out.M.resize(sites);
  out.map_hidden.resize(sites * Hd);
  const auto n = static_cast<std::size_t>(scene);
  for (std::size_t s = 0; s < sites; ++s) {
    std::span<float> h(out.map_hidden.data() + s * Hd, Hd);
    affine(std::span<const float>(fm.F.data() + s * D, D), p.scene_w1, p.scene_b1, h);
    double m = p.scene_b2.values[n];
    for (std::size_t k = 0; k < Hd; ++k) {
      h[k] = std::max(h[k], 0.0f);
      m += static_cast<double>(h[k]) * p.scene_w2.values[k * N + n];
    }
    out.M[s] = static_cast<float>(m);
  }
  return out;
}

void scene_head_backward(std::span<const float> f, const SceneOutput& out, std::span<const float> grad_logits,
                         const ModelParams& p, ModelParams& grads, std::span<float> grad_f) {
  std::vector<float> gh(p.config.scene_hidden);
  affine_backward(out.hidden, grad_logits, p.scene_w2, grads.scene_w2, grads.scene_b2, gh);
  relu_mask(gh, out.hidden);
  affine_backward(f, gh, p.scene_w1, grads.scene_w1, grads.scene_b1, grad_f);
}

void scene_head_map_backward(const FeatureMap& fm, int scene, const SceneOutput& out,
                             std::span<const float> grad_M, const ModelParams& p, ModelParams& grads,
                             std::span<float> grad_F) {
  const std::size_t D = fm.dims.c, Hd = p.config.scene_hidden, N = p.config.num_scenes;
  const auto n = static_cast<std::size_t>(scene);
  std::vector<float> gh(Hd);
  for (std::size_t s = 0; s < fm.dims.sites(); ++s) {
    const float gm = grad_M[s];
    const float* h = out.map_hidden.data() + s * Hd;
    grads.scene_b2.values[n] += gm;
    for (std::size_t k = 0; k < Hd; ++k) {
      grads.scene_w2.values[k * N + n] += h[k] * gm;
      gh[k] = h[k] > 0.0f ? p.scene_w2.values[k * N + n] * gm : 0.0f;
    }
    affine_backward(std::span<const float>(fm.F.data() + s * D, D), gh, p.scene_w1, grads.scene_w1,
                    grads.scene_b1, std::span<float>(grad_F.data() + s * D, D));
  }
}

// ---------------------------------------------------------------------------

namespace {

json config_to_json(const ModelConfig& c) {
  return json{{"input", {c.input.h, c.input.w, c.input.t, c.input.d}},
              {"widths", c.widths},
              {"num_classes", c.num_classes},
              {"num_scenes", c.num_scenes},
              {"scene_hidden", c.scene_hidden},
              {"edl_bias_init", c.edl_bias_init}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  const auto in = j.at("input").get<std::vector<std::size_t>>();
  if (in.size() != 4) throw ShapeError("netcore", "checkpoint input dims must have 4 entries");
  c.input = {in[0], in[1], in[2], in[3]};
  c.widths = j.at("widths").get<std::array<std::size_t, 3>>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.num_scenes = j.at("num_scenes").get<std::size_t>();
  c.scene_hidden = j.at("scene_hidden").get<std::size_t>();
  c.edl_bias_init = j.at("edl_bias_init").get<float>();
  return c;
}

}  // namespace

void save_checkpoint(const ModelParams& p, const fs::path& dir, std::uint64_t seed,
                     const std::map<std::string, std::string>& meta) {
  fs::create_directories(dir);
  json j;
  j["seed"] = seed;
  j["config"] = config_to_json(p.config);
  j["lambda_d"] = p.lambda_d;
  j["lambda_s"] = p.lambda_s;
  j["meta"] = meta;
  json list = json::array();
  for (const auto& [name, t] : p.named()) {
    const std::string file = name + ".vtn";
    dataio::write_vtensor(dir / file, *t);
    list.push_back({{"name", name}, {"shape", t->shape}, {"file", file}});
  }
  j["params"] = std::move(list);
  dataio::write_text(dir / "params.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  json j;
  try {
    j = json::parse(dataio::read_text(dir / "params.json"));
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint manifest: ") + e.what(), 0);
  }
  Checkpoint ck;
  ck.seed = j.at("seed").get<std::uint64_t>();
  ck.meta = j.at("meta").get<std::map<std::string, std::string>>();
  ck.params = ModelParams::zeros(config_from_json(j.at("config")));
  ck.params.lambda_d = j.at("lambda_d").get<float>();
  ck.params.lambda_s = j.at("lambda_s").get<float>();
  std::map<std::string, std::string> files;
  for (const auto& e : j.at("params")) files[e.at("name").get<std::string>()] = e.at("file").get<std::string>();
  for (auto& n : ck.params.named()) {
    auto it = files.find(n.name);
    if (it == files.end()) throw ValidationError("netcore", {"checkpoint lacks parameter " + n.name});
    Tensor t = dataio::read_vtensor(dir / it->second);
    if (t.shape != n.tensor->shape) throw ShapeError("netcore", "parameter " + n.name + " has the wrong shape");
    *n.tensor = std::move(t);
  }
  return ck;
}

std::uint64_t params_hash(const ModelParams& p, std::span<const ModelParams::Group> groups) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto& n : const_cast<ModelParams&>(p).named()) {
    if (std::find(groups.begin(), groups.end(), n.group) == groups.end()) continue;
    const auto* bytes = reinterpret_cast<const unsigned char*>(n.tensor->values.data());
    for (std::size_t i = 0; i < n.tensor->values.size() * sizeof(float); ++i) {
      h ^= bytes[i];
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace soar::netcore
