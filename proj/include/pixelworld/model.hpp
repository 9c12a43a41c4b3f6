#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pixelworld/config.hpp"
#include "pixelworld/diffusion.hpp"
#include "pixelworld/rng.hpp"

namespace pw {

struct ModelConfig {
  int H = 4, L = 3, V = 3, C = 3, img = 32;
  int action_dim = 7;
  int hidden = 16;

  static ModelConfig from(const TrainConfig& c) {
    return ModelConfig{c.H, c.L, c.views, c.channels, c.image, c.action_dim, c.hidden};
  }
  ClipShape clip_shape() const { return ClipShape{V, L, C, img, img}; }
  int chunk_channels() const { return V * L * C; }
  int in_channels() const { return (H + 1) * chunk_channels(); }  // x_sigma + H history slots
  int cond_dim() const { return 1 + L * action_dim + H * action_dim; }
  bool operator==(const ModelConfig&) const = default;
};

struct ParamArray {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<double> w;
  bool frozen = false;
  int64_t numel() const {
    int64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
};

// Array order is fixed: enc.weight/.bias, mid.weight/.bias, film.weight/.bias,
// head.weight/.bias. The head is zero-initialized so the raw network output is
// exactly zero at init and the denoiser starts at the preconditioning skip path.
struct DenoiserParams {
  uint32_t version = 1;
  ModelConfig cfg;
  std::vector<ParamArray> arrays;

  int64_t total_params() const {
    int64_t n = 0;
    for (auto& a : arrays) n += a.numel();
    return n;
  }
};

enum ArrayIx { kEncW = 0, kEncB, kMidW, kMidB, kFilmW, kFilmB, kHeadW, kHeadB, kNumArrays };

DenoiserParams init_params(const ModelConfig& cfg, uint64_t seed);

// Marks the encoder frozen; the two remaining conv layers and the conditioning
// projection stay trainable.
void apply_freeze_policy(DenoiserParams& params);

using Gradients = std::vector<std::vector<double>>;
Gradients alloc_gradients(const DenoiserParams& params);

// Intermediate activations retained for the backward pass.
struct ForwardCache {
  std::vector<double> xin, h1, a2, film_s, h2, cond_vec;
  double c_skip = 0, c_out = 0;
};

// out = c_skip(sigma) * x_sigma + c_out(sigma) * m_theta(x_sigma, sigma, cond)
Clip denoise_x0(const DenoiserParams& params, const NoisyClip& x_sigma,
                const Conditioning& cond, ForwardCache* cache = nullptr);

// Accumulates scale * dLoss/dArray into grads given dLoss/dOutput. Frozen
// arrays are left untouched (zero gradient).
void denoiser_param_gradients(const DenoiserParams& params, const NoisyClip& x_sigma,
                              const Conditioning& cond, const Clip& upstream,
                              const ForwardCache& cache, Gradients& grads,
                              double scale = 1.0);

struct SamplerConfig {
  double sigma_max = 80.0;
  double sigma_min = 0.002;
  int n_steps = 50;
};

// Euler sampler over the geometric schedule; returns the clip at sigma_min.
Clip euler_sample(const DenoiserParams& params, const Conditioning& cond,
                  const SamplerConfig& sc, Rng& rng);

// Checkpoint format PWCK v1. Saving quantizes the in-memory weights to f32
// (the on-disk precision) so resumed and uninterrupted runs follow identical
// trajectories.
void save_checkpoint(DenoiserParams& params, const std::string& path);
DenoiserParams load_checkpoint(const std::string& path);

// Validates loaded array names/shapes against cfg and stamps it on params.
void bind_config(DenoiserParams& params, const ModelConfig& cfg);

}  // namespace pw
