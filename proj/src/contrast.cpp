#include "pixelworld/contrast.hpp"

#include <algorithm>

#include "pixelworld/util.hpp"

namespace pw {

Branches make_branches(const Clip& x_theta, const Clip& x_old, double beta) {
  if (!(x_theta.shape == x_old.shape)) throw ValidationError("make_branches: shape mismatch");
  if (!(beta >= 0.0 && beta <= 1.0))
    throw ValidationError("make_branches: beta must be in [0, 1]");
  Branches br;
  br.beta = beta;
  br.x_plus = Clip::zeros(x_theta.shape);
  br.x_minus = Clip::zeros(x_theta.shape);
  for (size_t i = 0; i < x_theta.data.size(); ++i) {
    const double o = x_old.data[i], t = x_theta.data[i];
    br.x_plus.data[i] = (1.0 - beta) * o + beta * t;
    br.x_minus.data[i] = (1.0 + beta) * o - beta * t;
  }
  return br;
}

double contrastive_loss(const Branches& br, const Clip& x0, double r, bool mean_reduction) {
  if (!(br.x_plus.shape == x0.shape)) throw ValidationError("contrastive_loss: shape mismatch");
  if (!(r >= 0.0 && r <= 1.0)) throw ValidationError("contrastive_loss: r must be in [0, 1]");
  double lp = 0.0, lm = 0.0;
  for (size_t i = 0; i < x0.data.size(); ++i) {
    const double dp = br.x_plus.data[i] - x0.data[i];
    const double dm = br.x_minus.data[i] - x0.data[i];
    lp += dp * dp;
    lm += dm * dm;
  }
  const double norm = mean_reduction ? 1.0 / static_cast<double>(x0.data.size()) : 1.0;
  return norm * (r * lp + (1.0 - r) * lm);
}

double kl_regularizer(const Clip& x_theta, const Clip& x_old, double lambda,
                      bool mean_reduction) {
  if (lambda < 0.0) throw ValidationError("kl_regularizer: lambda must be >= 0");
  if (lambda == 0.0) return 0.0;
  double d2 = 0.0;
  for (size_t i = 0; i < x_theta.data.size(); ++i) {
    const double d = x_theta.data[i] - x_old.data[i];
    d2 += d * d;
  }
  const double norm = mean_reduction ? 1.0 / static_cast<double>(x_theta.data.size()) : 1.0;
  return lambda * norm * d2;
}

void ema_update(ReferencePolicy& ref, const DenoiserParams& current, int64_t step) {
  if (ref.params.arrays.size() != current.arrays.size())
    throw ValidationError("ema_update: parameter layout mismatch");
  const double coeff =
      0.5 * std::min(static_cast<double>(step) / static_cast<double>(ref.warm_steps), 1.0);
  for (size_t a = 0; a < current.arrays.size(); ++a) {
    auto& rw = ref.params.arrays[a].w;
    const auto& cw = current.arrays[a].w;
    if (rw.size() != cw.size()) throw ValidationError("ema_update: array size mismatch");
    for (size_t i = 0; i < rw.size(); ++i) rw[i] = coeff * rw[i] + (1.0 - coeff) * cw[i];
  }
}

double contrastive_gradients(const DenoiserParams& params, const DenoiserParams& ref,
                             const NoisyClip& x_sigma, const Conditioning& cond,
                             const Clip& x0, double r, double beta, double kl_lambda,
                             bool mean_reduction, Gradients& grads, double scale) {
  const Clip x_old = denoise_x0(ref, x_sigma, cond);
  ForwardCache cache;
  const Clip x_theta = denoise_x0(params, x_sigma, cond, &cache);

  const Branches br = make_branches(x_theta, x_old, beta);
  const double loss = contrastive_loss(br, x0, r, mean_reduction) +
                      kl_regularizer(x_theta, x_old, kl_lambda, mean_reduction);

  // dL/dx_theta = 2 beta [ r (x_plus - x0) - (1-r)(x_minus - x0) ] + 2 lambda (x_theta - x_old)
  const double norm = mean_reduction ? 1.0 / static_cast<double>(x0.data.size()) : 1.0;
  Clip up = Clip::zeros(x0.shape);
  for (size_t i = 0; i < x0.data.size(); ++i) {
    const double dp = br.x_plus.data[i] - x0.data[i];
    const double dm = br.x_minus.data[i] - x0.data[i];
    up.data[i] = norm * (2.0 * beta * (r * dp - (1.0 - r) * dm) +
                         2.0 * kl_lambda * (x_theta.data[i] - x_old.data[i]));
  }
  denoiser_param_gradients(params, x_sigma, cond, up, cache, grads, scale);
  return loss;
}

}  // namespace pw
