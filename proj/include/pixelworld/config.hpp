#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pw {

// One flat key=value namespace shared by every subcommand. Unknown keys are
// rejected; precedence is file < overrides.
struct TrainConfig {
  // run
  uint64_t seed = 1;
  int threads = 1;
  std::string dataset;  // PWDS path consumed by pretrain/posttrain/eval

  // world / data generation
  int episodes = 100;
  int horizon = 24;  // actions per episode (T)
  int objects = 2;
  int image = 32;
  int channels = 3;
  int views = 3;

  // model
  int H = 4;
  int L = 3;
  int action_dim = 7;
  int hidden = 16;

  // diffusion
  double sigma_loc = -1.2;
  double sigma_scale = 1.2;
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  int sampler_steps = 50;

  // optimization
  double lr = 1e-4;
  int steps = 2000;
  int batch = 4;
  std::string loss_reduction = "mean";  // or "sum"
  int checkpoint_every = 500;

  // contrastive objective / rollout protocol
  double beta = 0.1;
  double kl_lambda = 0.01;
  double group_eps = 1e-8;
  int K = 8;
  int F = 1;
  int keep_top = 3;
  int keep_bottom = 3;
  std::string prefix_kind = "random";  // fixed | random | curriculum
  int prefix_fixed = 3;
  int prefix_lo = 0;
  int prefix_hi = 9;
  int ema_warm = 500;
  bool freeze = true;       // posttrain freeze policy on/off
  bool policy_ema = false;  // deploy an averaged policy instead of the raw endpoint
  double policy_ema_coeff = 0.99;

  // rewards
  double w_lpips = 1.0;
  double w_ssim = 1.0;
  double w_psnr = 1.0 / 32.0;
  double psnr_cap = 100.0;
  double view_w0 = 1.0;
  double view_w1 = 1.0;
  double view_w2 = 1.0;
  bool masked_metrics = false;

  // evaluation
  int eval_chunks = 10;
  int train_episodes = -1;  // -1: 80% of the dataset
};

// key=value lines, '#' comments, blank lines ignored.
std::map<std::string, std::string> parse_config_text(const std::string& text);

// Applies entries onto cfg; throws ValidationError on unknown keys or
// malformed values.
void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv);
void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value);

TrainConfig load_config(const std::string& path_or_empty,
                        const std::vector<std::string>& overrides);

// Consistency checks shared by all subcommands (positive sizes, prefix bounds,
// window lengths fit the episode horizon, ...).
void validate_config(const TrainConfig& cfg);

// Sorted key=value dump; written to <out>/effective.cfg for provenance.
std::string effective_config(const TrainConfig& cfg);

}  // namespace pw
