#include "pixelworld/diffusion.hpp"

#include <cmath>

#include "pixelworld/util.hpp"

namespace pw {

Precondition precondition_coeffs(double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("precondition_coeffs: sigma must be > 0");
  double s2 = sigma * sigma;
  return Precondition{1.0 / (s2 + 1.0), -sigma / std::sqrt(s2 + 1.0)};
}

NoisyClip forward_noise(const Clip& x0, double sigma, Rng& rng) {
  if (sigma < 0.0) throw ValidationError("forward_noise: sigma must be >= 0");
  NoisyClip out{Clip{x0.shape, std::vector<double>(x0.data.size())}, sigma};
  std::vector<double> eps(x0.data.size());
  rng.fill_normal(eps.data(), eps.size());
  for (size_t i = 0; i < eps.size(); ++i) out.data.data[i] = x0.data[i] + sigma * eps[i];
  return out;
}

double sample_sigma(Rng& rng, const SigmaDistribution& dist) {
  switch (dist.kind) {
    case SigmaDistribution::Fixed:
      if (!(dist.fixed > 0.0)) throw ValidationError("sample_sigma: fixed sigma must be > 0");
      return dist.fixed;
    case SigmaDistribution::LogNormal: {
      if (!(dist.scale > 0.0)) throw ValidationError("sample_sigma: scale must be > 0");
      return std::exp(dist.loc + dist.scale * rng.normal());
    }
  }
  throw ValidationError("sample_sigma: bad distribution kind");
}

std::vector<double> sigma_schedule(double sigma_max, double sigma_min, int n_steps) {
  if (n_steps < 1) throw ValidationError("sigma_schedule: n_steps must be >= 1");
  if (!(sigma_max > sigma_min && sigma_min > 0.0))
    throw ValidationError("sigma_schedule: need sigma_max > sigma_min > 0");
  std::vector<double> s(n_steps + 1);
  double ratio = sigma_min / sigma_max;
  for (int i = 0; i <= n_steps; ++i)
    s[i] = sigma_max * std::pow(ratio, static_cast<double>(i) / n_steps);
  s.front() = sigma_max;
  s.back() = sigma_min;
  return s;
}

}  // namespace pw
