#pragma once

#include "pixelworld/model.hpp"

namespace pw {

// Implicit positive/negative predictions bracketing the reference:
//   x_plus  = (1 - beta) * x_old + beta * x_theta
//   x_minus = (1 + beta) * x_old - beta * x_theta
// so x_plus + x_minus = 2 x_old and x_plus - x_minus = 2 beta (x_theta - x_old).
struct Branches {
  Clip x_plus, x_minus;
  double beta = 0.1;
};

Branches make_branches(const Clip& x_theta, const Clip& x_old, double beta);

// r * ||x_plus - x0||^2 + (1 - r) * ||x_minus - x0||^2, summed or per-entry mean.
double contrastive_loss(const Branches& br, const Clip& x0, double r, bool mean_reduction);

double kl_regularizer(const Clip& x_theta, const Clip& x_old, double lambda,
                      bool mean_reduction);

// Frozen EMA copy of the learner used to anchor branch construction.
struct ReferencePolicy {
  DenoiserParams params;
  int warm_steps = 500;
};

// coeff(step) = 0.5 * min(step / warm_steps, 1); ref <- coeff*ref + (1-coeff)*current.
void ema_update(ReferencePolicy& ref, const DenoiserParams& current, int64_t step);

// Loss of the reward-weighted branch pair plus the KL term, with gradients
// w.r.t. the learner parameters only (the reference contributes constants).
// Gradients are scaled by `scale` and accumulated into `grads`.
double contrastive_gradients(const DenoiserParams& params, const DenoiserParams& ref,
                             const NoisyClip& x_sigma, const Conditioning& cond,
                             const Clip& x0, double r, double beta, double kl_lambda,
                             bool mean_reduction, Gradients& grads, double scale = 1.0);

}  // namespace pw
