#include "soar/trainer.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <random>
#include <sstream>

#include "soar/synthgen.hpp"

namespace soar::trainer {

using netcore::ModelParams;

std::string to_string(Arm a) {
  switch (a) {
    case Arm::softmax: return "softmax";
    case Arm::edl: return "edl";
    case Arm::edl_adrecon: return "edl+adrecon";
    case Arm::edl_adascls: return "edl+adascls";
    case Arm::full: return "full";
  }
  return "?";
}

Arm arm_from_string(const std::string& s) {
  for (Arm a : kAllArms) {
    if (to_string(a) == s) return a;
  }
  throw ConfigError("trainer", "unknown arm '" + s + "' (softmax, edl, edl+adrecon, edl+adascls, full)");
}

ArmModules modules(Arm a) {
  switch (a) {
    case Arm::softmax: return {false, false, false};
    case Arm::edl: return {true, false, false};
    case Arm::edl_adrecon: return {true, true, false};
    case Arm::edl_adascls: return {true, false, true};
    case Arm::full: return {true, true, true};
  }
  return {};
}

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("trainer", "lr must be positive");
  if (epochs < 0) throw ConfigError("trainer", "epochs must be non-negative");
  if (lr_step <= 0) throw ConfigError("trainer", "lr_step must be positive");
  if (batch_size <= 0) throw ConfigError("trainer", "batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("trainer", "momentum must be in [0, 1)");
  if (!(lambda_d >= 0.0f) || !(lambda_s >= 0.0f)) throw ConfigError("trainer", "reversal factors must be >= 0");
  weights.validate();
}

double TrainConfig::lr_at(int epoch) const {
  return lr * std::pow(lr_decay, epoch / lr_step);
}

double TrainConfig::grl_scale(double progress) const {
  if (grl_gamma <= 0.0) return 1.0;
  return 2.0 / (1.0 + std::exp(-grl_gamma * progress)) - 1.0;
}

std::vector<Sample> load_samples(const dataio::DatasetManifest& m, const std::filesystem::path& base_dir,
                                 dataio::Split split, background::TmfConfig tmf) {
  const auto recs = m.split(split);
  std::vector<Sample> out(recs.size());
  std::vector<std::string> errors(recs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < recs.size(); ++i) {
    try {
      Sample& s = out[i];
      s.clip_id = recs[i]->clip_id;
      s.clip = dataio::read_clip(dataio::resolve(base_dir, recs[i]->path));
      s.background = background::tmf_background(s.clip, tmf);
      s.action = recs[i]->action_label;
      s.scene = recs[i]->scene_label;
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) throw ValidationError("trainer", {recs[i]->clip_id + ": " + errors[i]});
  }
  return out;
}

namespace {

void add_scaled(std::span<float> dst, std::span<const float> src, float scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

void add_into(ModelParams& dst, ModelParams& src) {
  auto a = dst.named();
  auto b = src.named();
  for (std::size_t k = 0; k < a.size(); ++k) {
    auto& x = a[k].tensor->values;
    const auto& y = b[k].tensor->values;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  }
}

// Loss terms for one sample, with gradients scaled by `scale` added into
// `grads` when it is non-null.
losses::LossParts sample_pass(const ModelParams& p, const Sample& s, const TrainConfig& cfg, double scale,
                              ModelParams* grads) {
  const ArmModules mods = modules(cfg.arm);
  const auto& mc = p.config;
  if (s.action < 0 || static_cast<std::size_t>(s.action) >= mc.num_classes) {
    throw RangeError("trainer", s.clip_id + ": action label " + std::to_string(s.action) + " is not a known class");
  }
  netcore::BackboneCache cache;
  const auto fm = netcore::backbone_forward(s.clip, p, grads ? &cache : nullptr);
  const std::size_t D = fm.dims.c, sites = fm.dims.sites();
  std::vector<float> gF(grads ? fm.F.size() : 0, 0.0f);
  std::vector<float> gf(D, 0.0f), tmp(D, 0.0f);
  losses::LossParts parts;

  if (!mods.evidential) {
    const auto z = netcore::softmax_logits(fm.f, p);
    parts.edl = losses::softmax_ce_loss<float>(z, s.action);
    if (grads) {
      auto g = losses::softmax_ce_grad<float>(z, s.action);
      for (auto& v : g) v *= static_cast<float>(scale);
      netcore::softmax_logits_backward(fm.f, g, p, *grads, tmp);
      add_scaled(gf, tmp, 1.0f);
    }
  } else {
    const auto out = netcore::edl_head(fm.f, p);
    std::vector<float> y(mc.num_classes, 0.0f);
    y[static_cast<std::size_t>(s.action)] = 1.0f;
    parts.edl = losses::edl_loss<float>(out.e, y);
    if (grads) {
      auto g = losses::edl_loss_grad<float>(out.e, y);
      for (auto& v : g) v *= static_cast<float>(scale);
      netcore::edl_head_backward(fm.f, out, g, p, *grads, tmp);
      add_scaled(gf, tmp, 1.0f);
    }
  }

  if (mods.recon || mods.scene) {
    const auto em = netcore::edl_head_map(fm, p);
    if (mods.recon) {
      netcore::DecoderCache dc;
      const auto xhat = netcore::decoder_forward(fm, p, grads ? &dc : nullptr);
      const auto uprime = netcore::normalize_upsample(em.U, em.map_dims, mc.input);
      parts.recon = losses::recon_loss<float>(s.background.values(), xhat.values(), uprime, mc.input);
      if (grads) {
        auto g = losses::recon_loss_grad<float>(s.background.values(), xhat.values(), uprime, mc.input);
        const auto k = static_cast<float>(cfg.weights.w_recon * scale);
        for (auto& v : g) v *= k;
        std::vector<float> gFd(fm.F.size());
        netcore::decoder_backward(fm, dc, ClipTensor(mc.input, std::move(g)), p, *grads, gFd);
        if (cfg.lambda_d != 0.0f) {
          std::vector<float> rev(gFd.size());
          netcore::GradientReversal{cfg.lambda_d}.backward<float>(gFd, rev);
          add_scaled(gF, rev, 1.0f);
        }
      }
    }
    if (mods.scene) {
      const auto so = netcore::scene_head(fm.f, p);
      std::vector<float> ys(mc.num_scenes, 0.0f);
      if (s.scene < 0 || static_cast<std::size_t>(s.scene) >= mc.num_scenes) {
        throw RangeError("trainer", s.clip_id + ": scene label out of range");
      }
      ys[static_cast<std::size_t>(s.scene)] = 1.0f;
      parts.s_cls = losses::scene_cls_loss<float>(so.logits, ys);
      const auto sm = netcore::scene_head_map(fm, s.scene, p);
      parts.s_guide = losses::guide_loss<float>(em.U, sm.M);
      if (grads) {
        auto gl = losses::scene_cls_grad<float>(so.logits, ys);
        for (auto& v : gl) v *= static_cast<float>(cfg.weights.w_s_cls * scale);
        netcore::scene_head_backward(fm.f, so, gl, p, *grads, tmp);
        netcore::GradientReversal grl{cfg.lambda_s};
        if (cfg.lambda_s != 0.0f) {
          std::vector<float> rev(D);
          grl.backward<float>(tmp, rev);
          add_scaled(gf, rev, 1.0f);
        }
        auto gM = losses::guide_loss_grad<float>(em.U, sm.M);
        for (auto& v : gM) v *= static_cast<float>(cfg.weights.w_s_guide * scale);
        std::vector<float> gFs(fm.F.size());
        netcore::scene_head_map_backward(fm, s.scene, sm, gM, p, *grads, gFs);
        if (cfg.lambda_s != 0.0f) {
          std::vector<float> rev(gFs.size());
          grl.backward<float>(gFs, rev);
          add_scaled(gF, rev, 1.0f);
        }
      }
    }
  }

  if (grads) {
    const float inv = 1.0f / static_cast<float>(sites);
    for (std::size_t l = 0; l < sites; ++l) {
      for (std::size_t c = 0; c < D; ++c) gF[l * D + c] += gf[c] * inv;
    }
    netcore::backbone_backward(p, cache, gF, *grads);
  }
  return parts;
}

std::string fmt(double v) { return dataio::format_float(v); }

std::string parts_str(const losses::LossParts& p, double total) {
  return "total=" + fmt(total) + " edl=" + fmt(p.edl) + " recon=" + fmt(p.recon) + " s_cls=" + fmt(p.s_cls) +
         " s_guide=" + fmt(p.s_guide);
}

}  // namespace

losses::LossParts evaluate(const ModelParams& p, const Sample& s, const TrainConfig& cfg) {
  return sample_pass(p, s, cfg, 1.0, nullptr);
}

BatchResult batch_gradients(const ModelParams& p, std::span<const Sample* const> batch, const TrainConfig& cfg,
                            ModelParams& grads) {
  const std::size_t B = batch.size();
  const double scale = 1.0 / static_cast<double>(B);
  std::vector<ModelParams> per(B);
  std::vector<losses::LossParts> parts(B);
  std::vector<std::string> errors(B);
  // Each sample gets its own gradient buffer; the reduction below runs in
  // batch order so results do not depend on the thread count.
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < B; ++i) {
    try {
      per[i] = ModelParams::zeros(p.config);
      parts[i] = sample_pass(p, *batch[i], cfg, scale, &per[i]);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw TrainingError("trainer", e);
  }
  BatchResult r;
  for (std::size_t i = 0; i < B; ++i) {
    add_into(grads, per[i]);
    r.parts.edl += parts[i].edl;
    r.parts.recon += parts[i].recon;
    r.parts.s_cls += parts[i].s_cls;
    r.parts.s_guide += parts[i].s_guide;
  }
  r.parts.edl *= scale;
  r.parts.recon *= scale;
  r.parts.s_cls *= scale;
  r.parts.s_guide *= scale;
  r.total = losses::total_loss(r.parts, cfg.weights);
  return r;
}

Optimizer::Optimizer(const netcore::ModelConfig& cfg) : velocity_(ModelParams::zeros(cfg)) {}

void Optimizer::step(ModelParams& p, ModelParams& g, double lr, double momentum, double weight_decay,
                     double grad_clip) {
  auto pn = p.named();
  auto gn = g.named();
  auto vn = velocity_.named();
  const auto mu = static_cast<float>(momentum);
  const auto eta = static_cast<float>(lr);
  const auto wd = static_cast<float>(weight_decay);
  for (std::size_t k = 0; k < pn.size() && wd != 0.0f; ++k) {
    auto& gv = gn[k].tensor->values;
    const auto& pv = pn[k].tensor->values;
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += wd * pv[i];
  }
  if (grad_clip > 0.0) {
    double sq = 0.0;
    for (auto& n : gn) {
      for (float v : n.tensor->values) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    if (norm > grad_clip) {
      const auto f = static_cast<float>(grad_clip / norm);
      for (auto& n : gn) {
        for (auto& v : n.tensor->values) v *= f;
      }
    }
  }
  for (std::size_t k = 0; k < pn.size(); ++k) {
    auto& pv = pn[k].tensor->values;
    const auto& gv = gn[k].tensor->values;
    auto& vv = vn[k].tensor->values;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      vv[i] = mu * vv[i] + gv[i];
      pv[i] -= eta * vv[i];
    }
  }
}

TrainResult train(const std::vector<Sample>& samples, const netcore::ModelConfig& mcfg, const TrainConfig& cfg) {
  cfg.validate();
  if (samples.empty()) throw ValidationError("trainer", {"train split is empty"});
  TrainResult res;
  res.params = ModelParams::he_init(mcfg, cfg.seed);
  res.params.lambda_d = cfg.lambda_d;
  res.params.lambda_s = cfg.lambda_s;
  Optimizer opt(mcfg);
  ModelParams grads = ModelParams::zeros(mcfg);

  std::vector<std::size_t> order(samples.size());
  losses::LossParts last_finite;
  double last_total = 0.0;
  std::size_t step = 0;
  const std::size_t steps_per_epoch = (samples.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                      static_cast<std::size_t>(cfg.batch_size);
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(cfg.epochs, 1);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at(epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 rng(synthgen::mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_sum = 0.0;
    losses::LossParts epoch_parts;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Sample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[order[i]]);
      grads.set_zero();
      TrainConfig step_cfg = cfg;
      const double ramp = cfg.grl_scale(static_cast<double>(step) / total_steps);
      step_cfg.lambda_d = static_cast<float>(cfg.lambda_d * ramp);
      step_cfg.lambda_s = static_cast<float>(cfg.lambda_s * ramp);
      auto abort = [&](const std::string& why) {
        return TrainingError("trainer", why + " at step " + std::to_string(step) + " (epoch " +
                                            std::to_string(epoch + 1) + "); last finite losses: " +
                                            parts_str(last_finite, last_total));
      };
      BatchResult r;
      try {
        r = batch_gradients(res.params, batch, step_cfg, grads);
      } catch (const Error& e) {
        // Diverged weights usually surface as NaN evidence before the loss is formed.
        throw abort(std::string("step failed: ") + e.what());
      }
      if (!std::isfinite(r.total)) throw abort("non-finite loss");
      last_finite = r.parts;
      last_total = r.total;
      opt.step(res.params, grads, lr, cfg.momentum, cfg.weight_decay, cfg.grad_clip);
      res.log.push_back("step epoch=" + std::to_string(epoch + 1) + " batch=" + std::to_string(batches) +
                        " lr=" + fmt(lr) + " " + parts_str(r.parts, r.total));
      epoch_sum += r.total;
      epoch_parts.edl += r.parts.edl;
      epoch_parts.recon += r.parts.recon;
      epoch_parts.s_cls += r.parts.s_cls;
      epoch_parts.s_guide += r.parts.s_guide;
      ++batches;
      ++step;
    }
    const double n = static_cast<double>(batches);
    epoch_parts.edl /= n;
    epoch_parts.recon /= n;
    epoch_parts.s_cls /= n;
    epoch_parts.s_guide /= n;
    res.epoch_totals.push_back(epoch_sum / n);
    res.log.push_back("epoch " + std::to_string(epoch + 1) + " lr=" + fmt(lr) + " " +
                      parts_str(epoch_parts, epoch_sum / n));
  }
  return res;
}

TrainResult train(const dataio::DatasetManifest& m, const std::filesystem::path& base_dir,
                  const netcore::ModelConfig& mcfg, const TrainConfig& cfg) {
  const auto samples = load_samples(m, base_dir, dataio::Split::train, {cfg.tmf_window});
  return train(samples, mcfg, cfg);
}

dataio::PredictionDump infer(const ModelParams& p, Arm arm, const dataio::DatasetManifest& m,
                             const std::filesystem::path& base_dir, dataio::Split split) {
  const auto recs = m.split(split);
  dataio::PredictionDump dump;
  dump.rows.resize(recs.size());
  std::vector<std::string> errors(recs.size());
  const bool evidential = modules(arm).evidential;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < recs.size(); ++i) {
    try {
      const auto& rec = *recs[i];
      const auto clip = dataio::read_clip(dataio::resolve(base_dir, rec.path));
      if (clip.dims() != p.config.input) throw ShapeError("trainer", "clip dims differ from the checkpoint input");
      const auto fm = netcore::backbone_forward(clip, p);
      auto& row = dump.rows[i];
      row.clip_id = rec.clip_id;
      row.true_action = rec.action_label;
      row.feature = fm.f;
      if (evidential) {
        const auto out = netcore::edl_head(fm.f, p);
        row.probs = out.p;
        row.u = static_cast<float>(out.u);
      } else {
        const auto z = netcore::softmax_logits(fm.f, p);
        const double zmax = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (auto v : z) sum += std::exp(v - zmax);
        row.probs.resize(z.size());
        float pmax = 0.0f;
        for (std::size_t c = 0; c < z.size(); ++c) {
          row.probs[c] = static_cast<float>(std::exp(z[c] - zmax) / sum);
          pmax = std::max(pmax, row.probs[c]);
        }
        row.u = std::max(1.0f - pmax, FLT_MIN);
      }
      if (rec.scene_feature_path) {
        row.scene_feature = dataio::read_vtensor(dataio::resolve(base_dir, *rec.scene_feature_path)).values;
      }
    } catch (const std::exception& e) {
      errors[i] = recs[i]->clip_id + ": " + e.what();
    }
  }
  std::vector<std::string> issues;
  for (auto& e : errors) {
    if (!e.empty()) issues.push_back(e);
  }
  if (!issues.empty()) throw ValidationError("trainer", issues);
  dump.meta["split"] = dataio::to_string(split);
  dump.meta["arm"] = to_string(arm);
  return dump;
}

}  // namespace soar::trainer
