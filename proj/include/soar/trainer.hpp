#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "soar/background.hpp"
#include "soar/dataio.hpp"
#include "soar/losses.hpp"
#include "soar/netcore.hpp"

namespace soar::trainer {

enum class Arm { softmax, edl, edl_adrecon, edl_adascls, full };

std::string to_string(Arm a);  // "softmax", "edl", "edl+adrecon", "edl+adascls", "full"
Arm arm_from_string(const std::string& s);
inline constexpr Arm kAllArms[] = {Arm::softmax, Arm::edl, Arm::edl_adrecon, Arm::edl_adascls, Arm::full};

struct ArmModules {
  bool evidential = true;
  bool recon = false;
  bool scene = false;
};
ArmModules modules(Arm a);

struct TrainConfig {
  int epochs = 30;
  double lr = 0.001;
  double lr_decay = 0.1;
  int lr_step = 20;  // epochs between decays
  double momentum = 0.9;
  int batch_size = 4;
  float lambda_d = 1.0f;
  float lambda_s = 10.0f;
  losses::LossWeights weights;
  std::uint64_t seed = 0;
  Arm arm = Arm::full;
  std::size_t tmf_window = 0;  // 0 = whole clip
  /// Reversal warm-up: lambda_eff = lambda * (2 / (1 + exp(-gamma * progress)) - 1),
  /// progress in [0, 1] over all steps. 0 keeps lambda constant.
  double grl_gamma = 10.0;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
  double grad_clip = 1.0;     // max global gradient norm; 0 disables

  void validate() const;
  /// Learning rate for 0-based epoch index: lr * lr_decay^(epoch / lr_step).
  double lr_at(int epoch) const;
  /// Reversal scale in [0, 1] at a given training progress.
  double grl_scale(double progress) const;
};

/// One training example with its cached background estimate.
struct Sample {
  std::string clip_id;
  ClipTensor clip;
  ClipTensor background;
  int action = 0;
  int scene = 0;
};

std::vector<Sample> load_samples(const dataio::DatasetManifest& m, const std::filesystem::path& base_dir,
                                 dataio::Split split, background::TmfConfig tmf = {});

struct BatchResult {
  losses::LossParts parts;  // batch means
  double total = 0.0;
};

/// Forward + backward for one batch. Gradients of the batch-mean loss are
/// added into `grads`.
BatchResult batch_gradients(const netcore::ModelParams& p, std::span<const Sample* const> batch,
                            const TrainConfig& cfg, netcore::ModelParams& grads);

/// Loss terms of one sample under the arm, no gradients.
losses::LossParts evaluate(const netcore::ModelParams& p, const Sample& s, const TrainConfig& cfg);

/// SGD with momentum: v = mu * v + g; p -= lr * v.
class Optimizer {
 public:
  explicit Optimizer(const netcore::ModelConfig& cfg);
  void step(netcore::ModelParams& p, netcore::ModelParams& g, double lr, double momentum,
            double weight_decay = 0.0, double grad_clip = 0.0);

 private:
  netcore::ModelParams velocity_;
};

struct TrainResult {
  netcore::ModelParams params;
  std::vector<std::string> log;
  std::vector<double> epoch_totals;
};

TrainResult train(const std::vector<Sample>& samples, const netcore::ModelConfig& mcfg, const TrainConfig& cfg);

/// Loads the train split (TMF cached per clip) and trains.
TrainResult train(const dataio::DatasetManifest& m, const std::filesystem::path& base_dir,
                  const netcore::ModelConfig& mcfg, const TrainConfig& cfg);

/// One row per clip of `split`. The softmax arm writes u = 1 - max p.
dataio::PredictionDump infer(const netcore::ModelParams& p, Arm arm, const dataio::DatasetManifest& m,
                             const std::filesystem::path& base_dir, dataio::Split split);

}  // namespace soar::trainer
