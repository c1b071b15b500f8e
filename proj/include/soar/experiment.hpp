#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "soar/biasprobe.hpp"
#include "soar/netcore.hpp"
#include "soar/osarmetrics.hpp"
#include "soar/synthgen.hpp"
#include "soar/trainer.hpp"

namespace soar::experiment {

struct EvalConfig {
  double tpr_target = 0.95;
  double far_target = 0.10;
  osarmetrics::OpennessProtocol openness;
  int kld_bins = 50;
  double kld_eps = 1e-8;
};

struct BiasConfig {
  int subsets = 4;
};

/// The whole experiment document: sections synth, model, train, eval, bias.
/// The model's class and scene counts and input dims follow the synth section.
struct ExperimentConfig {
  synthgen::SynthConfig synth;
  netcore::ModelConfig model;
  trainer::TrainConfig train;
  EvalConfig eval;
  BiasConfig bias;

  /// Sets synth.master_seed and train.seed.
  void set_seed(std::uint64_t seed);
  std::uint64_t seed() const { return train.seed; }
  /// Copies synth dims and label counts into the model section and validates.
  void finalize();
};

/// Parses JSON text. Missing keys keep their defaults; unknown sections or
/// keys throw ConfigError naming every offender.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string serialize_config(const ExperimentConfig& cfg);

/// 16 hex digits of FNV-1a over the canonical serialisation.
std::string config_hash(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Pipeline stages. All artifacts live under one output directory:
//   config.json, data/, <arm>/{checkpoint/, train.log, pred_*.csv, metrics.json,
//   bias_*.json, plots/}, summary.csv
// ---------------------------------------------------------------------------

struct Layout {
  std::filesystem::path root;
  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path manifest() const { return data() / "manifest.json"; }
  std::filesystem::path arm_dir(trainer::Arm a) const { return root / trainer::to_string(a); }
  std::filesystem::path checkpoint(trainer::Arm a) const { return arm_dir(a) / "checkpoint"; }
  std::filesystem::path dump(trainer::Arm a, dataio::Split s) const {
    return arm_dir(a) / ("pred_" + dataio::to_string(s) + ".csv");
  }
};

struct MetricsReport {
  double auc = 0.0;
  double far_at_tpr = 0.0;
  double tpr_at_far = 0.0;
  double tau_u = 0.0;
  osarmetrics::OpenMaF1 open_maf1;
  double sym_kld = 0.0;
  double cka_scene = 0.0;  // CKA(f, scene feature) on the closed test set
  double openness = 0.0;
  double closed_accuracy = 0.0;
};

MetricsReport evaluate_dumps(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                             const dataio::PredictionDump& open, int c_known, const EvalConfig& cfg);

struct BiasReport {
  biasprobe::BiasCurve closed_subsets;
  biasprobe::BiasCurve open_subsets;
};

BiasReport bias_dumps(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                      const dataio::PredictionDump& open, int K);

class Pipeline {
 public:
  Pipeline(ExperimentConfig cfg, std::filesystem::path out);

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& hash() const { return hash_; }
  const Layout& layout() const { return layout_; }

  dataio::DatasetManifest synth();
  netcore::ModelParams train(trainer::Arm arm);
  void infer(trainer::Arm arm);
  MetricsReport eval(trainer::Arm arm);
  BiasReport bias(trainer::Arm arm);
  void plot(trainer::Arm arm);
  /// synth once, then train/infer/eval/bias/plot for every arm and a summary table.
  void all();

 private:
  std::map<std::string, std::string> meta() const;
  dataio::DatasetManifest load_manifest() const;
  dataio::PredictionDump load_dump(trainer::Arm arm, dataio::Split s) const;
  void write_config() const;

  ExperimentConfig cfg_;
  std::string hash_;
  Layout layout_;
};

}  // namespace soar::experiment
