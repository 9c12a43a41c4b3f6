#pragma once

#include <array>
#include <vector>

#include "pixelworld/model.hpp"
#include "pixelworld/world.hpp"

namespace pw {

// Rolling window of the last H frame-chunks plus one end-effector pose per
// slot, oldest first. Value-semantic: branching copies the buffer.
struct HistoryBuffer {
  ModelConfig cfg;
  std::vector<double> frames;  // H slots x [V][L][C][img][img]
  std::vector<double> poses;   // H x action_dim

  int64_t slot_numel() const { return cfg.clip_shape().numel(); }
};

// All H slots replicate the single observed frame (per view, L copies) and
// its pose.
HistoryBuffer init_history(const ModelConfig& cfg, const ViewSet& obs,
                           const std::array<double, 7>& pose);

// FIFO: evicts the oldest slot, appends the chunk and its pose.
void push_chunk(HistoryBuffer& buf, const Clip& chunk, const std::array<double, 7>& pose);

Conditioning to_conditioning(const HistoryBuffer& buf,
                             const std::vector<std::array<double, 7>>& action_rows);

// Samples the next L-frame chunk with the Euler sampler under the buffer's
// conditioning.
Clip generate_chunk(const DenoiserParams& params, const HistoryBuffer& buf,
                    const std::vector<std::array<double, 7>>& action_rows,
                    const SamplerConfig& sc, Rng& rng);

// A teacher-forced window: H ground-truth history chunks, the target chunk,
// the action rows that generated it, and the per-slot poses.
struct Window {
  Conditioning cond;
  Clip target;
};

// Cuts the window whose target chunk covers frames [start+H*L, start+(H+1)*L).
Window make_window(const ModelConfig& cfg, const Episode& ep, int start_frame);

// Frames available in an episode must cover H+1 chunks for one window.
int max_window_start(const ModelConfig& cfg, const Episode& ep);

// Ground-truth chunk of frames [first, first+L) as a Clip.
Clip episode_chunk(const ModelConfig& cfg, const Episode& ep, int first_frame);

struct LossGrad {
  double loss = 0.0;
};

// Denoising MSE between denoise_x0(forward_noise(target)) and the target;
// accumulates scale * gradients into grads.
double teacher_forced_loss(const DenoiserParams& params, const Window& win, double sigma,
                           Rng& rng, bool mean_reduction, Gradients* grads,
                           double scale = 1.0);

}  // namespace pw
