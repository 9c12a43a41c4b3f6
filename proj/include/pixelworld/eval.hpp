#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "pixelworld/rewards.hpp"
#include "pixelworld/rollout.hpp"

namespace pw {

struct MetricRow {
  int rollout_id = 0;  // dataset episode index
  int step = 0;        // chunk index within the rollout
  std::string view;    // "0".."V-1", or "all" for view-aggregated rows
  std::string metric;  // lpips | ssim | psnr | combined | combined_objects | combined_robot
  double value = 0.0;
};

struct EvalTable {
  std::vector<MetricRow> rows;
  std::string to_csv() const;
};

EvalTable read_metric_csv(const std::string& text);

// Mean over all rows matching (metric, step); per-view rows average across
// views and episodes.
double mean_metric(const EvalTable& table, const std::string& metric, int step);

// Mean combined score per rollout_id (averaged over steps), sorted by id.
std::map<int, double> per_episode_combined(const EvalTable& table);

// Pluggable chunk source so tests can evaluate synthetic models (perfect,
// degrading) through the identical protocol.
using ChunkGenerator =
    std::function<Clip(const HistoryBuffer&, const std::vector<Action>&, int, Rng&)>;

// Closed-loop evaluation: per episode, cfg.eval_chunks generate/push cycles
// from the first observation under ground-truth actions, each chunk scored
// against the ground-truth frames. Episodes shorter than the rollout are
// skipped with a warning on stderr. rollout_id = id_offset + episode index.
EvalTable rollout_eval_with(const ChunkGenerator& gen, const ModelConfig& mc,
                            const std::vector<Episode>& episodes, int id_offset,
                            const TrainConfig& cfg);

EvalTable rollout_eval(const DenoiserParams& params, const std::vector<Episode>& episodes,
                       int id_offset, const TrainConfig& cfg);

struct PairedResult {
  std::vector<int> ids;
  std::vector<double> deltas;  // per-episode combined(a) - combined(b)
  int wins = 0, losses = 0, ties = 0;
  double p_two_sided = 1.0;
  double p_one_sided = 1.0;  // H1: a beats b
};

// Exact sign test over per-episode combined-score deltas; ties are excluded
// from the test.
PairedResult paired_compare(const EvalTable& a, const EvalTable& b);

// P(X <= k) and P(X >= k) for X ~ Binomial(n, 1/2), exact summation.
double binom_cdf_le(int n, int k);
double binom_cdf_ge(int n, int k);

double elo_expected(double r_i, double r_j);

struct EloState {
  std::map<std::string, double> ratings;
  double k_factor = 32.0;
  double init_rating = 800.0;
};

// Symmetric update from pre-update ratings: winner += K*(1-E_w), loser -= the
// same amount, so the rating sum is conserved.
void elo_update(EloState& state, const std::string& winner, const std::string& loser);

struct Vote {
  std::string model_a, model_b, winner;
};

// Sequential elo_update over the votes; ids are registered at init_rating on
// first appearance.
EloState elo_tournament(const std::vector<Vote>& votes, double k_factor = 32.0,
                        double init_rating = 800.0);

std::vector<Vote> parse_votes_csv(const std::string& text);
std::string ratings_csv(const EloState& state);

}  // namespace pw
