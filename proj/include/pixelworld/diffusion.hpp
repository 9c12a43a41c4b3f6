#pragma once

#include <cstdint>
#include <vector>

#include "pixelworld/rng.hpp"

namespace pw {

struct ClipShape {
  int V = 3, L = 1, C = 3, H = 32, W = 32;
  int64_t frame_numel() const { return int64_t{C} * H * W; }
  int64_t view_numel() const { return int64_t{L} * frame_numel(); }
  int64_t numel() const { return int64_t{V} * view_numel(); }
  bool operator==(const ClipShape&) const = default;
};

// Multi-view frame chunk in pixel space, [V][L][C][H][W] row-major.
struct Clip {
  ClipShape shape;
  std::vector<double> data;

  static Clip zeros(const ClipShape& s) { return Clip{s, std::vector<double>(s.numel(), 0.0)}; }
  double* frame(int v, int l) {
    return data.data() + (int64_t{v} * shape.L + l) * shape.frame_numel();
  }
  const double* frame(int v, int l) const {
    return data.data() + (int64_t{v} * shape.L + l) * shape.frame_numel();
  }
};

struct NoisyClip {
  Clip data;
  double sigma = 1.0;
};

// Flattened conditioning consumed by the denoiser: the history window as
// extra input channels, plus a dense vector of [history poses, chunk actions].
struct Conditioning {
  std::vector<double> history_frames;  // H chunk slots, each [V][L][C][H][W], oldest first
  std::vector<double> history_poses;   // H x 7, oldest first
  std::vector<double> actions;         // L x 7 rows for the chunk being generated
};

// c_skip = 1/(sigma^2+1), c_out = -sigma/sqrt(sigma^2+1)
struct Precondition {
  double c_skip, c_out;
};
Precondition precondition_coeffs(double sigma);

// Input scaling used inside the network; not part of the output map.
inline double precondition_c_in(double sigma) { return 1.0 / std::sqrt(sigma * sigma + 1.0); }

// x_sigma = x0 + sigma * eps, eps ~ N(0, I)
NoisyClip forward_noise(const Clip& x0, double sigma, Rng& rng);

struct SigmaDistribution {
  enum Kind { LogNormal, Fixed } kind = LogNormal;
  double loc = -1.2;    // mean of log sigma
  double scale = 1.2;   // std of log sigma
  double fixed = 1.0;
};
double sample_sigma(Rng& rng, const SigmaDistribution& dist);

// Geometric interpolation sigma_max -> sigma_min; n_steps Euler steps need
// n_steps + 1 knots.
std::vector<double> sigma_schedule(double sigma_max, double sigma_min, int n_steps);

}  // namespace pw
