#include "pixelworld/train.hpp"

#include <cmath>
#include <cstring>

#include "pixelworld/util.hpp"
#include "pixelworld/worldmodel.hpp"

namespace pw {

AdamState init_adam(const DenoiserParams& params, double lr) {
  AdamState s;
  s.lr = lr;
  s.m.resize(params.arrays.size());
  s.v.resize(params.arrays.size());
  for (size_t a = 0; a < params.arrays.size(); ++a) {
    s.m[a].assign(params.arrays[a].w.size(), 0.0);
    s.v[a].assign(params.arrays[a].w.size(), 0.0);
  }
  return s;
}

void optimizer_step(DenoiserParams& params, const Gradients& grads, AdamState& st) {
  if (grads.size() != params.arrays.size() || st.m.size() != params.arrays.size())
    throw ValidationError("optimizer_step: state/gradient layout mismatch");
  st.t += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
  for (size_t a = 0; a < params.arrays.size(); ++a) {
    auto& arr = params.arrays[a];
    if (arr.frozen) continue;
    const auto& g = grads[a];
    if (g.size() != arr.w.size()) throw ValidationError("optimizer_step: gradient size mismatch");
    auto& m = st.m[a];
    auto& v = st.v[a];
    for (size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw NumericError("optimizer_step: non-finite gradient in array '" + arr.name + "'");
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g[i];
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      arr.w[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
    }
  }
}

void save_opt_state(const AdamState& st, const std::string& path) {
  BinWriter out(path);
  out.bytes("PWOP", 4);
  out.u32(1);
  out.u64(static_cast<uint64_t>(st.t));
  out.f64(st.lr);
  out.u32(static_cast<uint32_t>(st.m.size()));
  for (size_t a = 0; a < st.m.size(); ++a) {
    out.u64(st.m[a].size());
    out.f64v(st.m[a]);
    out.f64v(st.v[a]);
  }
  out.close();
}

AdamState load_opt_state(const std::string& path, const DenoiserParams& params) {
  BinReader in(path);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, "PWOP", 4) != 0)
    throw ValidationError("not an optimizer state file (bad magic): " + path);
  if (in.u32() != 1) throw ValidationError("unsupported optimizer state version in " + path);
  AdamState st;
  st.t = static_cast<int64_t>(in.u64());
  st.lr = in.f64();
  const uint32_t n = in.u32();
  if (n != params.arrays.size())
    throw ValidationError("optimizer state does not match parameter layout: " + path);
  st.m.resize(n);
  st.v.resize(n);
  for (uint32_t a = 0; a < n; ++a) {
    const uint64_t sz = in.u64();
    if (sz != params.arrays[a].w.size())
      throw ValidationError("optimizer state array size mismatch in " + path);
    in.f64v(st.m[a], sz);
    in.f64v(st.v[a], sz);
  }
  return st;
}

int train_count(const TrainConfig& cfg, int n_episodes) {
  int n = cfg.train_episodes >= 1 ? cfg.train_episodes : (n_episodes * 4) / 5;
  if (n < 1 || n > n_episodes)
    throw ValidationError("train_episodes out of range for this dataset");
  return n;
}

PretrainResult pretrain(const TrainConfig& cfg, const std::vector<Episode>& dataset,
                        const std::string& out_dir, const DenoiserParams* resume_from,
                        const AdamState* resume_opt, int64_t start_step) {
  const ModelConfig mc = ModelConfig::from(cfg);
  const int ntrain = train_count(cfg, static_cast<int>(dataset.size()));
  for (int e = 0; e < ntrain; ++e)
    if (max_window_start(mc, dataset[e]) < 0)
      throw ValidationError("pretrain: episode " + fmt(int64_t{e}) +
                            " is too short for an (H+1)-chunk window");

  if (!out_dir.empty()) ensure_dir(out_dir);

  PretrainResult res;
  res.params = resume_from ? *resume_from : init_params(mc, derive_seed(cfg.seed, 0x1217));
  AdamState opt = resume_opt ? *resume_opt : init_adam(res.params, cfg.lr);
  const bool mean_red = cfg.loss_reduction == "mean";
  const SigmaDistribution sdist{SigmaDistribution::LogNormal, cfg.sigma_loc, cfg.sigma_scale};
  res.log_csv = "step,loss\n";

  struct Item {
    Window win;
    double sigma;
    uint64_t noise_seed;
  };
  std::vector<Item> batch(cfg.batch);
  std::vector<Gradients> partial(cfg.batch);

  for (int64_t step = start_step; step < cfg.steps; ++step) {
    for (int b = 0; b < cfg.batch; ++b) {
      Rng rng(derive_seed(cfg.seed, 0x90E7 + static_cast<uint64_t>(b), step));
      const auto& ep = dataset[rng.below(ntrain)];
      const int start = static_cast<int>(rng.below(max_window_start(mc, ep) + 1));
      batch[b].win = make_window(mc, ep, start);
      batch[b].sigma = sample_sigma(rng, sdist);
      batch[b].noise_seed = rng.next();
    }
    std::vector<double> losses(cfg.batch, 0.0);
    parallel_for(cfg.batch, cfg.threads, [&](int64_t b) {
      partial[b] = alloc_gradients(res.params);
      Rng nrng(batch[b].noise_seed);
      losses[b] = teacher_forced_loss(res.params, batch[b].win, batch[b].sigma, nrng,
                                      mean_red, &partial[b], 1.0 / cfg.batch);
    });
    Gradients grads = std::move(partial[0]);
    for (int b = 1; b < cfg.batch; ++b)
      for (size_t a = 0; a < grads.size(); ++a)
        for (size_t i = 0; i < grads[a].size(); ++i) grads[a][i] += partial[b][a][i];
    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= cfg.batch;

    optimizer_step(res.params, grads, opt);
    res.log_csv += fmt(step) + "," + fmt(loss) + "\n";

    if (!out_dir.empty() &&
        ((step + 1) % cfg.checkpoint_every == 0 || step + 1 == cfg.steps)) {
      save_checkpoint(res.params, out_dir + "/pretrained.pwck");
      save_opt_state(opt, out_dir + "/pretrained.pwop");
    }
  }

  if (!out_dir.empty()) {
    if (cfg.steps == start_step) {  // zero remaining steps still produces artifacts
      save_checkpoint(res.params, out_dir + "/pretrained.pwck");
      save_opt_state(opt, out_dir + "/pretrained.pwop");
    }
    write_text_file(out_dir + "/pretrain_log.csv", res.log_csv);
  }
  return res;
}

}  // namespace pw
