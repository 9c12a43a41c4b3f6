#include "pixelworld/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "pixelworld/util.hpp"

namespace pw {

PrefixStrategy PrefixStrategy::from(const TrainConfig& c) {
  PrefixStrategy st;
  if (c.prefix_kind == "fixed")
    st.kind = Fixed;
  else if (c.prefix_kind == "random")
    st.kind = Random;
  else if (c.prefix_kind == "curriculum")
    st.kind = Curriculum;
  else
    throw ValidationError("unknown prefix_kind '" + c.prefix_kind + "'");
  st.fixed = c.prefix_fixed;
  st.lo = c.prefix_lo;
  st.hi = c.prefix_hi;
  st.ramp_steps = std::max(1, c.steps / 2);
  return st;
}

int sample_prefix_length(const PrefixStrategy& strategy, Rng& rng, int64_t outer_step) {
  switch (strategy.kind) {
    case PrefixStrategy::Fixed:
      return strategy.fixed;
    case PrefixStrategy::Random:
      return rng.range(strategy.lo, strategy.hi);
    case PrefixStrategy::Curriculum: {
      const double ratio = std::min(
          1.0, static_cast<double>(outer_step) / static_cast<double>(strategy.ramp_steps));
      const int cur = strategy.lo +
                      static_cast<int>(std::floor((strategy.hi - strategy.lo) * ratio));
      return rng.range(strategy.lo, cur);
    }
  }
  throw ValidationError("invalid prefix strategy");
}

HistoryBuffer roll_prefix(const DenoiserParams& params, const Episode& ep, int P,
                          const SamplerConfig& sc, uint64_t seed) {
  const ModelConfig& mc = params.cfg;
  if (P < 0) throw ValidationError("roll_prefix: P must be >= 0");
  if (P * mc.L > ep.T())
    throw ValidationError("roll_prefix: episode has " + fmt(int64_t{ep.T()}) +
                          " actions, prefix needs " + fmt(int64_t{P} * mc.L));
  HistoryBuffer buf = init_history(mc, ep.views[0], eef_pose(ep.states[0]));
  std::vector<Action> rows(mc.L);
  for (int p = 0; p < P; ++p) {
    for (int l = 0; l < mc.L; ++l) rows[l] = ep.actions[p * mc.L + l];
    Rng rng(derive_seed(seed, 0x50F1, p));
    const Clip chunk = generate_chunk(params, buf, rows, sc, rng);
    push_chunk(buf, chunk, eef_pose(ep.states[(p + 1) * mc.L]));
  }
  return buf;
}

CandidateGroup branch_candidates(const DenoiserParams& params, const HistoryBuffer& buffer,
                                 const std::vector<Action>& action_rows,
                                 const std::vector<std::array<double, 7>>& chunk_poses,
                                 int K, int F, const SamplerConfig& sc, uint64_t seed,
                                 int threads) {
  const ModelConfig& mc = params.cfg;
  if (K < 2) throw ValidationError("branch_candidates: K must be >= 2");
  if (F < 1) throw ValidationError("branch_candidates: F must be >= 1");
  if (static_cast<int>(action_rows.size()) != F * mc.L)
    throw ValidationError("branch_candidates: need F*L action rows");
  if (static_cast<int>(chunk_poses.size()) != F)
    throw ValidationError("branch_candidates: need one pose per chunk");

  CandidateGroup group;
  group.prefix_buffer = buffer;
  group.chunks.resize(K);
  group.conds.resize(K);
  group.seeds.resize(K);
  for (int k = 0; k < K; ++k) group.seeds[k] = derive_seed(seed, 0xB7A, k);

  parallel_for(K, threads, [&](int64_t k) {
    HistoryBuffer own = buffer;
    group.chunks[k].reserve(F);
    group.conds[k].reserve(F);
    std::vector<Action> rows(mc.L);
    for (int f = 0; f < F; ++f) {
      for (int l = 0; l < mc.L; ++l) rows[l] = action_rows[f * mc.L + l];
      Conditioning cond = to_conditioning(own, rows);
      Rng rng(derive_seed(group.seeds[k], f));
      Clip chunk = euler_sample(params, cond, sc, rng);
      if (f + 1 < F) push_chunk(own, chunk, chunk_poses[f]);
      group.conds[k].push_back(std::move(cond));
      group.chunks[k].push_back(std::move(chunk));
    }
  });
  return group;
}

GroupRewards score_candidates(CandidateGroup& group, const std::vector<Clip>& gt_chunks,
                              const MetricWeights& weights, double eps) {
  const int K = static_cast<int>(group.chunks.size());
  if (K == 0) throw ValidationError("score_candidates: empty group");
  const int F = static_cast<int>(group.chunks[0].size());
  if (static_cast<int>(gt_chunks.size()) != F)
    throw ValidationError("score_candidates: ground-truth chunks misaligned with F");
  std::vector<double> raw(K, 0.0);
  for (int k = 0; k < K; ++k) {
    for (int f = 0; f < F; ++f)
      raw[k] += clip_score(group.chunks[k][f], gt_chunks[f], weights).combined;
    raw[k] /= F;
  }
  group.scores = group_normalize(raw, eps);
  return group.scores;
}

std::vector<int> select_informative(const GroupRewards& scores, const SelectionPolicy& policy) {
  const int K = static_cast<int>(scores.raw.size());
  if (policy.keep_top < 0 || policy.keep_bottom < 0 ||
      policy.keep_top + policy.keep_bottom > K)
    throw ValidationError("select_informative: keep_top + keep_bottom must be <= K");
  std::vector<int> order(K);
  for (int i = 0; i < K; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores.raw[a] != scores.raw[b]) return scores.raw[a] > scores.raw[b];
    return a < b;
  });
  std::vector<int> retained(order.begin(), order.begin() + policy.keep_top);
  std::vector<int> rest(order.begin() + policy.keep_top, order.end());
  std::sort(rest.begin(), rest.end(), [&](int a, int b) {
    if (scores.raw[a] != scores.raw[b]) return scores.raw[a] < scores.raw[b];
    return a < b;
  });
  retained.insert(retained.end(), rest.begin(), rest.begin() + policy.keep_bottom);
  return retained;
}

StepReport training_step(DenoiserParams& params, ReferencePolicy& ref, AdamState& opt,
                         const std::vector<Episode>& dataset, int n_train,
                         const TrainConfig& cfg, int64_t step) {
  const ModelConfig& mc = params.cfg;
  const int L = mc.L;

  Rng srng(derive_seed(cfg.seed, 0x57E9, step));
  const Episode& ep = dataset[srng.below(n_train)];
  const PrefixStrategy strategy = PrefixStrategy::from(cfg);
  const int P = sample_prefix_length(strategy, srng, step);
  if ((P + cfg.F) * L > ep.T())
    throw ValidationError("training_step: episode too short for prefix " +
                          fmt(int64_t{P}) + " plus " + fmt(int64_t{cfg.F}) + " chunks");

  const SamplerConfig sc{cfg.sigma_max, cfg.sigma_min, cfg.sampler_steps};
  const HistoryBuffer buf =
      roll_prefix(params, ep, P, sc, derive_seed(cfg.seed, 0x51E1, step));

  std::vector<Action> rows(ep.actions.begin() + int64_t{P} * L,
                           ep.actions.begin() + int64_t{P + cfg.F} * L);
  std::vector<std::array<double, 7>> poses(cfg.F);
  for (int f = 0; f < cfg.F; ++f) poses[f] = eef_pose(ep.states[(P + f + 1) * L]);
  CandidateGroup group =
      branch_candidates(params, buf, rows, poses, cfg.K, cfg.F, sc,
                        derive_seed(cfg.seed, 0xB7A9, step), cfg.threads);

  std::vector<Clip> gt(cfg.F);
  for (int f = 0; f < cfg.F; ++f) gt[f] = episode_chunk(mc, ep, 1 + (P + f) * L);
  const MetricWeights weights = MetricWeights::from(cfg);
  score_candidates(group, gt, weights, cfg.group_eps);
  const std::vector<int> retained =
      select_informative(group.scores, SelectionPolicy{cfg.keep_top, cfg.keep_bottom});
  if (retained.empty())
    throw ValidationError("training_step: keep_top + keep_bottom must be >= 1");

  const int n_items = static_cast<int>(retained.size()) * cfg.F;
  const double scale = 1.0 / n_items;
  const bool mean_red = cfg.loss_reduction == "mean";
  const SigmaDistribution sdist{SigmaDistribution::LogNormal, cfg.sigma_loc, cfg.sigma_scale};

  std::vector<Gradients> partial(retained.size());
  std::vector<double> losses(retained.size(), 0.0);
  parallel_for(static_cast<int64_t>(retained.size()), cfg.threads, [&](int64_t i) {
    const int k = retained[i];
    partial[i] = alloc_gradients(params);
    for (int f = 0; f < cfg.F; ++f) {
      Rng nrng(derive_seed(cfg.seed, 0x54D0, step,
                           static_cast<uint64_t>(k) * cfg.F + f));
      const double sigma = sample_sigma(nrng, sdist);
      const NoisyClip x_sigma = forward_noise(group.chunks[k][f], sigma, nrng);
      losses[i] += contrastive_gradients(params, ref.params, x_sigma, group.conds[k][f],
                                         group.chunks[k][f], group.scores.weights[k],
                                         cfg.beta, cfg.kl_lambda, mean_red, partial[i],
                                         scale);
    }
  });
  Gradients grads = std::move(partial[0]);
  for (size_t i = 1; i < partial.size(); ++i)
    for (size_t a = 0; a < grads.size(); ++a)
      for (size_t j = 0; j < grads[a].size(); ++j) grads[a][j] += partial[i][a][j];
  double loss = 0.0;
  for (double l : losses) loss += l;
  loss /= n_items;

  optimizer_step(params, grads, opt);
  ema_update(ref, params, step);

  StepReport rep;
  rep.step = step;
  rep.P = P;
  const int K = cfg.K;
  double mean = 0.0;
  for (double r : group.scores.raw) mean += r;
  mean /= K;
  double var = 0.0;
  for (double r : group.scores.raw) var += (r - mean) * (r - mean);
  rep.mean_R = mean;
  rep.std_R = std::sqrt(var / K);
  rep.loss = loss;
  rep.lr = opt.lr;
  rep.retained = static_cast<int>(retained.size());
  return rep;
}

PosttrainResult posttrain(const TrainConfig& cfg, const std::vector<Episode>& dataset,
                          const DenoiserParams& init, const std::string& out_dir) {
  const ModelConfig mc = ModelConfig::from(cfg);
  if (!(init.cfg == mc))
    throw ValidationError("posttrain: checkpoint model config does not match run config");
  const int ntrain = train_count(cfg, static_cast<int>(dataset.size()));
  const PrefixStrategy strategy = PrefixStrategy::from(cfg);
  const int max_prefix = strategy.kind == PrefixStrategy::Fixed ? strategy.fixed : strategy.hi;
  for (int e = 0; e < ntrain; ++e)
    if ((max_prefix + cfg.F) * mc.L > dataset[e].T())
      throw ValidationError("posttrain: episode " + fmt(int64_t{e}) +
                            " is too short for the prefix range plus " +
                            fmt(int64_t{cfg.F}) + " branch chunks");
  if (!out_dir.empty()) ensure_dir(out_dir);

  PosttrainResult res;
  res.params = init;
  if (cfg.freeze) apply_freeze_policy(res.params);
  ReferencePolicy ref{res.params, cfg.ema_warm};
  AdamState opt = init_adam(res.params, cfg.lr);
  res.log_csv = "step,P,mean_R,std_R,loss,lr,retained\n";

  DenoiserParams avg = res.params;
  if (cfg.policy_ema)
    for (auto& a : avg.arrays) std::fill(a.w.begin(), a.w.end(), 0.0);
  // Zero-initialized accumulator, so the average needs the Adam-style 1-c^t
  // correction before it can stand in for the learner.
  const auto deploy = [&](int64_t t) {
    DenoiserParams d = avg;
    const double norm = 1.0 - std::pow(cfg.policy_ema_coeff, static_cast<double>(t));
    for (auto& a : d.arrays)
      for (auto& v : a.w) v /= norm;
    return d;
  };

  for (int64_t step = 0; step < cfg.steps; ++step) {
    const StepReport rep = training_step(res.params, ref, opt, dataset, ntrain, cfg, step);
    if (cfg.policy_ema) {
      const double c = cfg.policy_ema_coeff;
      for (size_t a = 0; a < avg.arrays.size(); ++a)
        for (size_t i = 0; i < avg.arrays[a].w.size(); ++i)
          avg.arrays[a].w[i] =
              c * avg.arrays[a].w[i] + (1.0 - c) * res.params.arrays[a].w[i];
    }
    res.log_csv += fmt(rep.step) + "," + fmt(int64_t{rep.P}) + "," + fmt(rep.mean_R) + "," +
                   fmt(rep.std_R) + "," + fmt(rep.loss) + "," + fmt(rep.lr) + "," +
                   fmt(int64_t{rep.retained}) + "\n";
    const bool last = step + 1 == cfg.steps;
    if (!out_dir.empty() && ((step + 1) % cfg.checkpoint_every == 0 || last)) {
      if (cfg.policy_ema && !last) {
        DenoiserParams d = deploy(step + 1);
        save_checkpoint(d, out_dir + "/posttrained.pwck");
      } else {
        if (cfg.policy_ema) res.params = deploy(cfg.steps);
        save_checkpoint(res.params, out_dir + "/posttrained.pwck");
      }
      save_opt_state(opt, out_dir + "/posttrained.pwop");
    }
  }
  if (cfg.policy_ema && cfg.steps > 0 && out_dir.empty()) res.params = deploy(cfg.steps);

  if (!out_dir.empty()) {
    if (cfg.steps == 0) {
      save_checkpoint(res.params, out_dir + "/posttrained.pwck");
      save_opt_state(opt, out_dir + "/posttrained.pwop");
    }
    write_text_file(out_dir + "/steps.csv", res.log_csv);
  }
  return res;
}

}  // namespace pw
