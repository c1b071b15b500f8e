// Command-line driver: synth, train, infer, eval, bias, plot, all.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include <CLI11.hpp>

#include "soar/experiment.hpp"

namespace {

void apply_worker_limit() {
  if (const char* env = std::getenv("SOAR_NUM_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      std::fprintf(stderr, "warning: ignoring SOAR_NUM_WORKERS=%s (expected a positive integer)\n", env);
      return;
    }
    omp_set_num_threads(static_cast<int>(n));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Scene-debiased open-set action recognition experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
  std::string arm_name = "full";
  std::optional<int> subsets;
  app.add_option("--config", config_path, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "overrides the synth and train seeds");
  app.add_option("--out", out, "output directory")->capture_default_str();
  app.add_option("--arm", arm_name, "softmax, edl, edl+adrecon, edl+adascls or full")->capture_default_str();
  app.add_option("--subsets", subsets, "number of bias-curve subsets K");

  const char* commands[][2] = {
      {"synth", "generate the synthetic dataset"},
      {"train", "train one arm and save its checkpoint and log"},
      {"infer", "write prediction dumps for every split"},
      {"eval", "compute the metrics report"},
      {"bias", "compute bias curves for both scenarios"},
      {"plot", "render bias curves and uncertainty histograms"},
      {"all", "run the whole pipeline for every arm"},
  };
  for (auto& c : commands) app.add_subcommand(c[0], c[1])->fallthrough();

  CLI11_PARSE(app, argc, argv);
  apply_worker_limit();
  const std::string command = app.get_subcommands().front()->get_name();

  std::string hash;
  std::uint64_t used_seed = 0;
  try {
    auto cfg = config_path.empty() ? soar::experiment::ExperimentConfig{}
                                   : soar::experiment::load_config(config_path);
    if (seed) cfg.set_seed(*seed);
    if (subsets) cfg.bias.subsets = *subsets;
    const auto arm = soar::trainer::arm_from_string(arm_name);
    cfg.train.arm = arm;
    soar::experiment::Pipeline pipe(cfg, out);
    hash = pipe.hash();
    used_seed = pipe.config().seed();

    if (command == "synth") {
      const auto m = pipe.synth();
      std::printf("wrote %zu clips to %s\n", m.clips.size(), pipe.layout().data().string().c_str());
    } else if (command == "train") {
      pipe.train(arm);
      std::printf("checkpoint: %s\n", pipe.layout().checkpoint(arm).string().c_str());
    } else if (command == "infer") {
      pipe.infer(arm);
      std::printf("dumps written under %s\n", pipe.layout().arm_dir(arm).string().c_str());
    } else if (command == "eval") {
      const auto r = pipe.eval(arm);
      std::printf("AUC=%.4f FAR@95=%.4f TPR@10=%.4f openMaF1=%.4f symKLD=%.4f CKA=%.4f\n", r.auc, r.far_at_tpr,
                  r.tpr_at_far, r.open_maf1.mean, r.sym_kld, r.cka_scene);
    } else if (command == "bias") {
      const auto b = pipe.bias(arm);
      std::printf("closed subsets: |slope|=%.4f variance=%.6f r=%.3f\n", std::abs(b.closed_subsets.slope),
                  b.closed_subsets.variance, b.closed_subsets.pearson_r);
      std::printf("open subsets:   |slope|=%.4f variance=%.6f r=%.3f\n", std::abs(b.open_subsets.slope),
                  b.open_subsets.variance, b.open_subsets.pearson_r);
    } else if (command == "plot") {
      pipe.plot(arm);
      std::printf("plots written under %s\n", (pipe.layout().arm_dir(arm) / "plots").string().c_str());
    } else if (command == "all") {
      pipe.all();
      std::printf("summary: %s\n", (pipe.layout().root / "summary.csv").string().c_str());
    }
  } catch (const soar::Error& e) {
    if (hash.empty()) {
      std::fprintf(stderr, "error: %s\n", e.what());
    } else {
      std::fprintf(stderr, "error: %s (config_hash=%s seed=%llu)\n", e.what(), hash.c_str(),
                   static_cast<unsigned long long>(used_seed));
    }
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s%s%s\n", e.what(), hash.empty() ? "" : " config_hash=", hash.c_str());
    return 1;
  }
  return 0;
}
