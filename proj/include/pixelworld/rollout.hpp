#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pixelworld/contrast.hpp"
#include "pixelworld/rewards.hpp"
#include "pixelworld/train.hpp"
#include "pixelworld/worldmodel.hpp"

namespace pw {

struct PrefixStrategy {
  enum Kind { Fixed, Random, Curriculum } kind = Random;
  int fixed = 3;
  int lo = 0, hi = 9;
  int64_t ramp_steps = 1;  // curriculum: steps until the max prefix reaches hi

  static PrefixStrategy from(const TrainConfig& c);
};

// Fixed -> always `fixed`; Random -> Unif{lo..hi}; Curriculum -> Unif{lo..cur}
// where cur grows linearly from lo to hi over the first ramp_steps steps.
int sample_prefix_length(const PrefixStrategy& strategy, Rng& rng, int64_t outer_step);

// Stage S1: history from the episode's first observation, then P closed-loop
// generate/push cycles driven by ground-truth actions. Generated chunk p
// covers episode frames [1 + p*L, 1 + (p+1)*L).
HistoryBuffer roll_prefix(const DenoiserParams& params, const Episode& ep, int P,
                          const SamplerConfig& sc, uint64_t seed);

// K continuations of F chunks each, all branched from copies of one buffer.
// conds[k][f] is the exact conditioning chunk f was sampled under, kept for
// the contrastive update.
struct CandidateGroup {
  HistoryBuffer prefix_buffer;
  std::vector<std::vector<Clip>> chunks;         // K x F
  std::vector<std::vector<Conditioning>> conds;  // K x F
  std::vector<uint64_t> seeds;                   // K
  GroupRewards scores;
};

// Stage S2. action_rows holds F*L rows; chunk_poses the end-of-chunk EEF pose
// pushed after each of the F chunks.
CandidateGroup branch_candidates(const DenoiserParams& params, const HistoryBuffer& buffer,
                                 const std::vector<Action>& action_rows,
                                 const std::vector<std::array<double, 7>>& chunk_poses,
                                 int K, int F, const SamplerConfig& sc, uint64_t seed,
                                 int threads);

// Stage S3: R^(k) = combined clip_score averaged over the F chunks, then
// group-normalized. Stores the result on the group and returns it.
GroupRewards score_candidates(CandidateGroup& group, const std::vector<Clip>& gt_chunks,
                              const MetricWeights& weights, double eps);

struct SelectionPolicy {
  int keep_top = 3;
  int keep_bottom = 3;
};

// Top keep_top by raw reward, then bottom keep_bottom of the remainder; ties
// break toward the lower candidate index in both blocks.
std::vector<int> select_informative(const GroupRewards& scores, const SelectionPolicy& policy);

struct StepReport {
  int64_t step = 0;
  int P = 0;
  double mean_R = 0.0, std_R = 0.0;
  double loss = 0.0;
  double lr = 0.0;
  int retained = 0;
};

// One full S1-S4 pass: exactly one optimizer update and one reference EMA
// update regardless of K. Prefix and branch sampling are on-policy from
// params.
StepReport training_step(DenoiserParams& params, ReferencePolicy& ref, AdamState& opt,
                         const std::vector<Episode>& dataset, int n_train,
                         const TrainConfig& cfg, int64_t step);

struct PosttrainResult {
  DenoiserParams params;  // deployable weights (the bias-corrected average
                          // under policy_ema, the raw learner otherwise)
  std::string log_csv;    // "step,P,mean_R,std_R,loss,lr,retained\n..."
};

// Runs training_step for cfg.steps steps from a pretrained checkpoint. Writes
// posttrained.pwck (+.pwop) and steps.csv under out_dir when non-empty. With
// policy_ema, the saved and returned weights are a bias-corrected exponential
// average of the learner; the learner itself keeps training on-policy, so the
// step log is unaffected by the averaging.
PosttrainResult posttrain(const TrainConfig& cfg, const std::vector<Episode>& dataset,
                          const DenoiserParams& init, const std::string& out_dir);

}  // namespace pw
