#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pixelworld/model.hpp"
#include "pixelworld/rng.hpp"

namespace pw {

// Scalar world with finitely many clean values, a prior over them, and a
// bounded reward. Everything downstream is exact finite summation, which is
// what makes these independent verifiers rather than re-implementations.
struct DiscreteWorld {
  std::vector<double> points;
  std::vector<double> prior;   // sums to 1
  std::vector<double> reward;  // per-point, in [0, 1]
};

void validate_world(const DiscreteWorld& w);

// Z = E_prior[reward]; must lie strictly inside (0, 1).
double partition_function(const DiscreteWorld& w);

DiscreteWorld random_world(int n, Rng& rng, double reward_lo = 0.05, double reward_hi = 0.95);

// Fixed worlds used by the verification sweeps. Rewards stay in [0.45, 0.55]
// so the 2/beta displacement remains inside the prediction grid down to
// beta = 0.05.
DiscreteWorld two_point_world();
DiscreteWorld five_point_world();

struct PosteriorDecomposition {
  double alpha = 0.0;
  double mu_old = 0.0, mu_plus = 0.0, mu_minus = 0.0;
  double delta = 0.0;  // alpha * (mu_plus - mu_old)
  std::vector<double> post_old, post_plus, post_minus;  // per-point posteriors at x_sigma
};

// Gaussian-kernel posteriors of the reference, positive, and negative priors
// at (x_sigma, sigma), the mixing weight alpha = Z * m_plus / m_old, their
// means, and the improvement direction.
PosteriorDecomposition decompose(const DiscreteWorld& w, double x_sigma, double sigma);

// mu_old(x_sigma) + (2 / beta) * delta(x_sigma)
double optimal_prediction(const DiscreteWorld& w, double beta, double x_sigma, double sigma);

std::vector<double> linspace(double lo, double hi, int n);

// For each x_sigma bin: brute-force the posterior-expected contrastive loss
// with the reference pinned at mu_old over every candidate prediction, and
// return the per-bin argmin.
std::vector<double> grid_minimize_loss(const DiscreteWorld& w, double beta, double sigma,
                                       const std::vector<double>& x_sigma_grid,
                                       const std::vector<double>& prediction_grid);

// Central differences on n_probes random non-frozen coordinates against the
// supplied analytic gradients; returns the max relative error with the
// denominator floored at 1e-2.
double finite_diff_check(const std::function<double(const DenoiserParams&)>& loss_fn,
                         const DenoiserParams& params, const Gradients& analytic, double h,
                         int n_probes, uint64_t seed);

struct OracleRow {
  std::string check;
  uint64_t world_seed = 0;
  double max_error = 0.0;
  bool pass = false;
};

struct OracleReport {
  std::vector<OracleRow> rows;

  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return true;
  }
  std::string to_csv() const;
};

// Every analytic check in one deterministic pass: mixture identities over 100
// random worlds, the optimal-prediction grid sweep with its beta-halving
// scaling law, the posterior-mean regression premise, and the
// finite-difference gradient suite.
OracleReport run_oracle_suite(uint64_t seed, int threads);

}  // namespace pw
