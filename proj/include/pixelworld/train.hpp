#pragma once

#include <string>
#include <vector>

#include "pixelworld/config.hpp"
#include "pixelworld/model.hpp"
#include "pixelworld/world.hpp"

namespace pw {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  int64_t t = 0;
  std::vector<std::vector<double>> m, v;
};

AdamState init_adam(const DenoiserParams& params, double lr);

// Bias-corrected adaptive-moment update; frozen arrays are skipped entirely.
void optimizer_step(DenoiserParams& params, const Gradients& grads, AdamState& state);

// Sidecar format PWOP v1 (f64 moments + step counter) for exact resume.
void save_opt_state(const AdamState& state, const std::string& path);
AdamState load_opt_state(const std::string& path, const DenoiserParams& params);

// Train/eval split: the first train_count(cfg, n) episodes train, the rest
// are held out.
int train_count(const TrainConfig& cfg, int n_episodes);

struct PretrainResult {
  DenoiserParams params;
  std::string log_csv;  // "step,loss\n..."
};

// Teacher-forced denoising over random windows of the train split. Writes
// pretrained.pwck (+.pwop) and pretrain_log.csv under out_dir when non-empty.
PretrainResult pretrain(const TrainConfig& cfg, const std::vector<Episode>& dataset,
                        const std::string& out_dir,
                        const DenoiserParams* resume_from = nullptr,
                        const AdamState* resume_opt = nullptr, int64_t start_step = 0);

}  // namespace pw
