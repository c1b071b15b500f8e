#include "soar/experiment.hpp"

#include <cstdio>
#include <functional>
#include <map>

#include <json.hpp>

#include "soar/plot.hpp"

namespace soar::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

void ExperimentConfig::set_seed(std::uint64_t seed) {
  synth.master_seed = seed;
  train.seed = seed;
}

void ExperimentConfig::finalize() {
  synth.validate();
  model.input = {synth.h, synth.w, synth.t, synth.d};
  model.num_classes = static_cast<std::size_t>(synth.c_known);
  model.num_scenes = static_cast<std::size_t>(synth.n_scenes);
  model.validate();
  train.validate();
  if (eval.kld_bins < 1) throw ConfigError("cli", "eval.kld_bins must be positive");
  if (bias.subsets < 2) throw ConfigError("cli", "bias.subsets must be at least 2");
}

namespace {

using Setter = std::function<void(const json&)>;
using Getter = std::function<json()>;

struct Field {
  Setter set;
  Getter get;
};

template <typename T>
Field field(T& ref) {
  return {[&ref](const json& j) { ref = j.get<T>(); }, [&ref]() { return json(ref); }};
}

std::map<std::string, std::map<std::string, Field>> schema(ExperimentConfig& c) {
  std::map<std::string, std::map<std::string, Field>> s;
  auto& sy = s["synth"];
  sy["h"] = field(c.synth.h);
  sy["w"] = field(c.synth.w);
  sy["t"] = field(c.synth.t);
  sy["c_known"] = field(c.synth.c_known);
  sy["c_open"] = field(c.synth.c_open);
  sy["n_scenes"] = field(c.synth.n_scenes);
  sy["correlation"] = field(c.synth.correlation);
  sy["clips_per_class"] = field(c.synth.clips_per_class);
  sy["closed_test_fraction"] = field(c.synth.closed_test_fraction);
  sy["open_clips_per_class"] = field(c.synth.open_clips_per_class);
  sy["open_scene_policy"] = {
      [&c](const json& j) {
        const auto v = j.get<std::string>();
        if (v == "familiar") c.synth.open_scene_policy = synthgen::OpenScenePolicy::familiar;
        else if (v == "unfamiliar") c.synth.open_scene_policy = synthgen::OpenScenePolicy::unfamiliar;
        else throw ConfigError("cli", "synth.open_scene_policy must be familiar or unfamiliar");
      },
      [&c]() {
        return json(c.synth.open_scene_policy == synthgen::OpenScenePolicy::familiar ? "familiar" : "unfamiliar");
      }};
  sy["noise_std"] = field(c.synth.noise_std);
  sy["sprite_size"] = field(c.synth.sprite_size);
  sy["train_scene_shift"] = field(c.synth.train_scene_shift);
  sy["test_scene_shift"] = field(c.synth.test_scene_shift);
  sy["master_seed"] = field(c.synth.master_seed);

  auto& mo = s["model"];
  mo["widths"] = field(c.model.widths);
  mo["scene_hidden"] = field(c.model.scene_hidden);
  mo["edl_bias_init"] = field(c.model.edl_bias_init);

  auto& tr = s["train"];
  tr["epochs"] = field(c.train.epochs);
  tr["lr"] = field(c.train.lr);
  tr["lr_decay"] = field(c.train.lr_decay);
  tr["lr_step"] = field(c.train.lr_step);
  tr["momentum"] = field(c.train.momentum);
  tr["batch_size"] = field(c.train.batch_size);
  tr["lambda_d"] = field(c.train.lambda_d);
  tr["lambda_s"] = field(c.train.lambda_s);
  tr["w_recon"] = field(c.train.weights.w_recon);
  tr["w_s_cls"] = field(c.train.weights.w_s_cls);
  tr["w_s_guide"] = field(c.train.weights.w_s_guide);
  tr["seed"] = field(c.train.seed);
  tr["arm"] = {[&c](const json& j) { c.train.arm = trainer::arm_from_string(j.get<std::string>()); },
               [&c]() { return json(trainer::to_string(c.train.arm)); }};
  tr["tmf_window"] = field(c.train.tmf_window);
  tr["grl_gamma"] = field(c.train.grl_gamma);
  tr["weight_decay"] = field(c.train.weight_decay);
  tr["grad_clip"] = field(c.train.grad_clip);

  auto& ev = s["eval"];
  ev["tpr_target"] = field(c.eval.tpr_target);
  ev["far_target"] = field(c.eval.far_target);
  ev["openness_ratios"] = field(c.eval.openness.ratios);
  ev["openness_resamples"] = field(c.eval.openness.resamples);
  ev["openness_seed"] = field(c.eval.openness.seed);
  ev["kld_bins"] = field(c.eval.kld_bins);
  ev["kld_eps"] = field(c.eval.kld_eps);

  s["bias"]["subsets"] = field(c.bias.subsets);
  return s;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("cli", std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("cli", "config must be a JSON object");
  ExperimentConfig cfg;
  auto s = schema(cfg);
  std::vector<std::string> unknown;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto sec = s.find(it.key());
    if (sec == s.end()) {
      unknown.push_back(it.key());
      continue;
    }
    if (!it.value().is_object()) throw ConfigError("cli", "section " + it.key() + " must be an object");
    for (auto kv = it.value().begin(); kv != it.value().end(); ++kv) {
      auto f = sec->second.find(kv.key());
      if (f == sec->second.end()) {
        unknown.push_back(it.key() + "." + kv.key());
        continue;
      }
      try {
        f->second.set(kv.value());
      } catch (const json::exception& e) {
        throw ConfigError("cli", it.key() + "." + kv.key() + ": " + e.what());
      }
    }
  }
  if (!unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& u : unknown) msg += " " + u;
    throw ConfigError("cli", msg);
  }
  cfg.finalize();
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(dataio::read_text(path));
}

std::string serialize_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  json j = json::object();
  for (auto& [sec, fields] : schema(copy)) {
    for (auto& [key, f] : fields) j[sec][key] = f.get();
  }
  return j.dump(2) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = serialize_config(cfg);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return hex64(h);
}

// ---------------------------------------------------------------------------

MetricsReport evaluate_dumps(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                             const dataio::PredictionDump& open, int c_known, const EvalConfig& cfg) {
  MetricsReport r;
  const auto s = osarmetrics::scored(closed, open);
  r.auc = osarmetrics::auc(s);
  r.far_at_tpr = osarmetrics::far_at_tpr(s, cfg.tpr_target);
  r.tpr_at_far = osarmetrics::tpr_at_far(s, cfg.far_target);
  r.tau_u = osarmetrics::max_uncertainty(train);
  r.open_maf1 = osarmetrics::open_maf1(closed, open, r.tau_u, c_known, cfg.openness);
  std::vector<double> uc, uo;
  for (const auto& row : closed.rows) uc.push_back(row.u);
  for (const auto& row : open.rows) uo.push_back(row.u);
  r.sym_kld = osarmetrics::sym_kld(uc, uo, cfg.kld_bins, cfg.kld_eps);

  osarmetrics::Matrix X, Y;
  X.rows = Y.rows = closed.rows.size();
  for (const auto& row : closed.rows) {
    if (!row.scene_feature) throw ProtocolError("osarmetrics", "closed-set row " + row.clip_id + " has no scene feature");
    X.cols = row.feature.size();
    Y.cols = row.scene_feature->size();
    X.data.insert(X.data.end(), row.feature.begin(), row.feature.end());
    Y.data.insert(Y.data.end(), row.scene_feature->begin(), row.scene_feature->end());
  }
  r.cka_scene = osarmetrics::cka(X, Y);

  std::vector<int> unknown;
  for (const auto& row : open.rows) unknown.push_back(row.true_action);
  std::sort(unknown.begin(), unknown.end());
  unknown.erase(std::unique(unknown.begin(), unknown.end()), unknown.end());
  r.openness = osarmetrics::openness(c_known, static_cast<int>(unknown.size()));

  std::size_t correct = 0;
  for (const auto& x : s) {
    if (x.is_known && x.predicted_class == x.true_class) ++correct;
  }
  r.closed_accuracy = closed.rows.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(closed.rows.size());
  return r;
}

BiasReport bias_dumps(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                      const dataio::PredictionDump& open, int K) {
  BiasReport b;
  b.closed_subsets = biasprobe::bias_curve(train, closed, open, biasprobe::Scenario::closed_subsets, K);
  b.open_subsets = biasprobe::bias_curve(train, closed, open, biasprobe::Scenario::open_subsets, K);
  return b;
}

// ---------------------------------------------------------------------------

namespace {

ordered_json curve_json(const biasprobe::BiasCurve& c) {
  ordered_json pts = ordered_json::array();
  for (const auto& p : c.points) pts.push_back({{"d", p.d}, {"metric", p.metric}});
  return {{"points", pts},
          {"slope", c.slope},
          {"abs_slope", std::abs(c.slope)},
          {"intercept", c.intercept},
          {"variance", c.variance},
          {"pearson_r", c.pearson_r}};
}

}  // namespace

Pipeline::Pipeline(ExperimentConfig cfg, fs::path out) : cfg_(std::move(cfg)), layout_{std::move(out)} {
  cfg_.finalize();
  hash_ = config_hash(cfg_);
}

std::map<std::string, std::string> Pipeline::meta() const {
  return {{"config_hash", hash_}, {"seed", std::to_string(cfg_.seed())}};
}

void Pipeline::write_config() const {
  dataio::write_text(layout_.root / "config.json", serialize_config(cfg_));
}

dataio::DatasetManifest Pipeline::synth() {
  write_config();
  auto m = synthgen::generate_dataset(cfg_.synth, layout_.data());
  for (const auto& [k, v] : meta()) m.meta[k] = v;
  dataio::save_manifest(m, layout_.manifest());
  return m;
}

dataio::DatasetManifest Pipeline::load_manifest() const {
  if (!fs::exists(layout_.manifest())) {
    throw ProtocolError("cli", "no dataset at " + layout_.manifest().string() + "; run synth first");
  }
  return dataio::load_manifest(layout_.manifest());
}

netcore::ModelParams Pipeline::train(trainer::Arm arm) {
  write_config();
  const auto m = load_manifest();
  auto tc = cfg_.train;
  tc.arm = arm;
  const auto res = trainer::train(m, layout_.data(), cfg_.model, tc);
  auto md = meta();
  md["arm"] = trainer::to_string(arm);
  netcore::save_checkpoint(res.params, layout_.checkpoint(arm), tc.seed, md);
  std::string log = "# config_hash=" + hash_ + " seed=" + std::to_string(tc.seed) + " arm=" + trainer::to_string(arm) + "\n";
  for (const auto& line : res.log) log += line + "\n";
  dataio::write_text(layout_.arm_dir(arm) / "train.log", log);
  return res.params;
}

void Pipeline::infer(trainer::Arm arm) {
  const auto m = load_manifest();
  if (!fs::exists(layout_.checkpoint(arm) / "params.json")) {
    throw ProtocolError("cli", "no checkpoint for arm " + trainer::to_string(arm) + "; run train first");
  }
  const auto ck = netcore::load_checkpoint(layout_.checkpoint(arm));
  if (ck.params.config.input != cfg_.model.input || ck.params.config.num_classes != cfg_.model.num_classes) {
    throw ShapeError("trainer", "checkpoint dims do not match the configured dataset");
  }
  for (auto split : {dataio::Split::train, dataio::Split::closed_test, dataio::Split::open_test}) {
    auto dump = trainer::infer(ck.params, arm, m, layout_.data(), split);
    for (const auto& [k, v] : meta()) dump.meta[k] = v;
    dataio::save_dump(dump, layout_.dump(arm, split));
  }
}

dataio::PredictionDump Pipeline::load_dump(trainer::Arm arm, dataio::Split s) const {
  const auto path = layout_.dump(arm, s);
  if (!fs::exists(path)) {
    throw ProtocolError("cli", "missing " + path.string() + "; run infer first");
  }
  return dataio::load_dump(path);
}

MetricsReport Pipeline::eval(trainer::Arm arm) {
  const auto tr = load_dump(arm, dataio::Split::train);
  const auto cl = load_dump(arm, dataio::Split::closed_test);
  const auto op = load_dump(arm, dataio::Split::open_test);
  const auto r = evaluate_dumps(tr, cl, op, cfg_.synth.c_known, cfg_.eval);
  ordered_json pts = ordered_json::array();
  for (const auto& p : r.open_maf1.points) {
    pts.push_back({{"ratio", p.ratio}, {"unknown_classes", p.unknown_classes}, {"openness", p.openness}, {"f1", p.f1}});
  }
  ordered_json j = {{"config_hash", hash_},
                    {"seed", cfg_.seed()},
                    {"arm", trainer::to_string(arm)},
                    {"auc", r.auc},
                    {"far_at_95", r.far_at_tpr},
                    {"tpr_at_10", r.tpr_at_far},
                    {"open_maf1", {{"mean", r.open_maf1.mean}, {"variance", r.open_maf1.variance}, {"tau_u", r.tau_u},
                                   {"points", pts}}},
                    {"sym_kld", r.sym_kld},
                    {"cka_scene", r.cka_scene},
                    {"openness", r.openness},
                    {"closed_accuracy", r.closed_accuracy}};
  dataio::write_text(layout_.arm_dir(arm) / "metrics.json", j.dump(2) + "\n");
  return r;
}

BiasReport Pipeline::bias(trainer::Arm arm) {
  const auto tr = load_dump(arm, dataio::Split::train);
  const auto cl = load_dump(arm, dataio::Split::closed_test);
  const auto op = load_dump(arm, dataio::Split::open_test);
  const auto b = bias_dumps(tr, cl, op, cfg_.bias.subsets);
  for (const auto& [name, curve] : {std::pair{std::string("closed_subsets"), &b.closed_subsets},
                                    std::pair{std::string("open_subsets"), &b.open_subsets}}) {
    ordered_json j = {{"config_hash", hash_},
                      {"seed", cfg_.seed()},
                      {"arm", trainer::to_string(arm)},
                      {"scenario", name},
                      {"subsets", cfg_.bias.subsets},
                      {"curve", curve_json(*curve)}};
    dataio::write_text(layout_.arm_dir(arm) / ("bias_" + name + ".json"), j.dump(2) + "\n");
  }
  return b;
}

void Pipeline::plot(trainer::Arm arm) {
  const auto dir = layout_.arm_dir(arm) / "plots";
  auto md = meta();
  md["arm"] = trainer::to_string(arm);
  for (const std::string name : {"closed_subsets", "open_subsets"}) {
    const auto path = layout_.arm_dir(arm) / ("bias_" + name + ".json");
    if (!fs::exists(path)) throw ProtocolError("cli", "missing " + path.string() + "; run bias first");
    const auto j = json::parse(dataio::read_text(path));
    biasprobe::BiasCurve c;
    for (const auto& p : j.at("curve").at("points")) c.points.push_back({p.at("d").get<double>(), p.at("metric").get<double>()});
    c.slope = j.at("curve").at("slope").get<double>();
    c.intercept = j.at("curve").at("intercept").get<double>();
    c.variance = j.at("curve").at("variance").get<double>();
    c.pearson_r = j.at("curve").at("pearson_r").get<double>();
    dataio::write_text(dir / ("bias_" + name + ".svg"),
                       plot::bias_curve_svg(c, trainer::to_string(arm) + ": AUC vs scene distance (" + name + ")", md));
    dataio::write_text(dir / ("bias_" + name + ".csv"), plot::bias_curve_csv(c));
  }
  const auto cl = load_dump(arm, dataio::Split::closed_test);
  const auto op = load_dump(arm, dataio::Split::open_test);
  std::vector<double> uc, uo;
  for (const auto& r : cl.rows) uc.push_back(r.u);
  for (const auto& r : op.rows) uo.push_back(r.u);
  const int bins = 20;
  dataio::write_text(dir / "uncertainty_hist.svg",
                     plot::uncertainty_hist_svg(uc, uo, bins, trainer::to_string(arm) + ": uncertainty", md));
  dataio::write_text(dir / "uncertainty_hist.csv", plot::uncertainty_hist_csv(uc, uo, bins));
}

void Pipeline::all() {
  synth();
  std::string table = "# config_hash=" + hash_ + " seed=" + std::to_string(cfg_.seed()) + "\n";
  table += "arm,auc,far_at_95,tpr_at_10,open_maf1,sym_kld,cka_scene,closed_accuracy,abs_slope_closed,abs_slope_open\n";
  for (auto arm : trainer::kAllArms) {
    train(arm);
    infer(arm);
    const auto r = eval(arm);
    const auto b = bias(arm);
    plot(arm);
    auto f = [](double v) { return dataio::format_float(v); };
    table += trainer::to_string(arm) + "," + f(r.auc) + "," + f(r.far_at_tpr) + "," + f(r.tpr_at_far) + "," +
             f(r.open_maf1.mean) + "," + f(r.sym_kld) + "," + f(r.cka_scene) + "," + f(r.closed_accuracy) + "," +
             f(std::abs(b.closed_subsets.slope)) + "," + f(std::abs(b.open_subsets.slope)) + "\n";
  }
  dataio::write_text(layout_.root / "summary.csv", table);
}

}  // namespace soar::experiment
