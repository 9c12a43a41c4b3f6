#include "pixelworld/worldmodel.hpp"

#include <cstring>

#include "pixelworld/util.hpp"

namespace pw {

HistoryBuffer init_history(const ModelConfig& cfg, const ViewSet& obs,
                           const std::array<double, 7>& pose) {
  if (obs.V != cfg.V || obs.C != cfg.C || obs.H != cfg.img || obs.W != cfg.img)
    throw ValidationError("init_history: observation does not match model config");
  HistoryBuffer buf;
  buf.cfg = cfg;
  buf.frames.resize(int64_t{cfg.H} * buf.slot_numel());
  buf.poses.resize(int64_t{cfg.H} * cfg.action_dim);
  const int64_t fn = obs.frame_numel();
  for (int h = 0; h < cfg.H; ++h) {
    double* slot = buf.frames.data() + h * buf.slot_numel();
    for (int v = 0; v < cfg.V; ++v)
      for (int l = 0; l < cfg.L; ++l)
        std::memcpy(slot + (int64_t{v} * cfg.L + l) * fn, obs.view(v), fn * sizeof(double));
    for (int d = 0; d < cfg.action_dim; ++d) buf.poses[h * cfg.action_dim + d] = pose[d];
  }
  return buf;
}

void push_chunk(HistoryBuffer& buf, const Clip& chunk, const std::array<double, 7>& pose) {
  const ModelConfig& cfg = buf.cfg;
  if (!(chunk.shape == cfg.clip_shape()))
    throw ValidationError("push_chunk: chunk shape mismatch");
  const int64_t sn = buf.slot_numel();
  std::memmove(buf.frames.data(), buf.frames.data() + sn,
               (int64_t{cfg.H} - 1) * sn * sizeof(double));
  std::memcpy(buf.frames.data() + (int64_t{cfg.H} - 1) * sn, chunk.data.data(),
              sn * sizeof(double));
  std::memmove(buf.poses.data(), buf.poses.data() + cfg.action_dim,
               (int64_t{cfg.H} - 1) * cfg.action_dim * sizeof(double));
  for (int d = 0; d < cfg.action_dim; ++d)
    buf.poses[(int64_t{cfg.H} - 1) * cfg.action_dim + d] = pose[d];
}

Conditioning to_conditioning(const HistoryBuffer& buf,
                             const std::vector<std::array<double, 7>>& action_rows) {
  const ModelConfig& cfg = buf.cfg;
  if (static_cast<int>(action_rows.size()) != cfg.L)
    throw ValidationError("to_conditioning: need exactly L action rows");
  Conditioning c;
  c.history_frames = buf.frames;
  c.history_poses = buf.poses;
  c.actions.reserve(int64_t{cfg.L} * cfg.action_dim);
  for (const auto& row : action_rows)
    c.actions.insert(c.actions.end(), row.begin(), row.begin() + cfg.action_dim);
  return c;
}

Clip generate_chunk(const DenoiserParams& params, const HistoryBuffer& buf,
                    const std::vector<std::array<double, 7>>& action_rows,
                    const SamplerConfig& sc, Rng& rng) {
  return euler_sample(params, to_conditioning(buf, action_rows), sc, rng);
}

Clip episode_chunk(const ModelConfig& cfg, const Episode& ep, int first_frame) {
  if (first_frame < 0 ||
      first_frame + cfg.L > static_cast<int>(ep.views.size()))
    throw ValidationError("episode_chunk: frame range out of bounds");
  Clip c = Clip::zeros(cfg.clip_shape());
  const int64_t fn = cfg.clip_shape().frame_numel();
  for (int l = 0; l < cfg.L; ++l) {
    const ViewSet& vs = ep.views[first_frame + l];
    for (int v = 0; v < cfg.V; ++v)
      std::memcpy(c.frame(v, l), vs.view(v), fn * sizeof(double));
  }
  return c;
}

int max_window_start(const ModelConfig& cfg, const Episode& ep) {
  return static_cast<int>(ep.views.size()) - (cfg.H + 1) * cfg.L;
}

Window make_window(const ModelConfig& cfg, const Episode& ep, int start_frame) {
  if (start_frame < 0 || start_frame > max_window_start(cfg, ep))
    throw ValidationError("make_window: episode too short for window");
  Window w;
  HistoryBuffer buf;
  buf.cfg = cfg;
  buf.frames.resize(int64_t{cfg.H} * buf.slot_numel());
  buf.poses.resize(int64_t{cfg.H} * cfg.action_dim);
  for (int h = 0; h < cfg.H; ++h) {
    const Clip slot = episode_chunk(cfg, ep, start_frame + h * cfg.L);
    std::memcpy(buf.frames.data() + h * buf.slot_numel(), slot.data.data(),
                buf.slot_numel() * sizeof(double));
    const auto pose = eef_pose(ep.states[start_frame + h * cfg.L + cfg.L - 1]);
    for (int d = 0; d < cfg.action_dim; ++d) buf.poses[h * cfg.action_dim + d] = pose[d];
  }
  const int target_first = start_frame + cfg.H * cfg.L;
  std::vector<std::array<double, 7>> rows;
  for (int l = 0; l < cfg.L; ++l) rows.push_back(ep.actions[target_first - 1 + l]);
  w.cond = to_conditioning(buf, rows);
  w.target = episode_chunk(cfg, ep, target_first);
  return w;
}

double teacher_forced_loss(const DenoiserParams& params, const Window& win, double sigma,
                           Rng& rng, bool mean_reduction, Gradients* grads, double scale) {
  const NoisyClip x_sigma = forward_noise(win.target, sigma, rng);
  ForwardCache cache;
  const Clip pred = denoise_x0(params, x_sigma, win.cond, grads ? &cache : nullptr);
  const int64_t n = static_cast<int64_t>(pred.data.size());
  const double norm = mean_reduction ? 1.0 / static_cast<double>(n) : 1.0;
  double loss = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = pred.data[i] - win.target.data[i];
    loss += d * d;
  }
  loss *= norm;
  if (grads) {
    Clip up = Clip::zeros(pred.shape);
    for (int64_t i = 0; i < n; ++i)
      up.data[i] = 2.0 * norm * (pred.data[i] - win.target.data[i]);
    denoiser_param_gradients(params, x_sigma, win.cond, up, cache, *grads, scale);
  }
  return loss;
}

}  // namespace pw
