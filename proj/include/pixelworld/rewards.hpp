#pragma once

#include <optional>
#include <vector>

#include "pixelworld/config.hpp"
#include "pixelworld/diffusion.hpp"
#include "pixelworld/world.hpp"

namespace pw {

struct MetricWeights {
  double w_lpips = 1.0, w_ssim = 1.0, w_psnr = 1.0 / 32.0;
  double view_weights[3] = {1.0, 1.0, 1.0};
  double psnr_cap = 100.0;

  static MetricWeights from(const TrainConfig& c) {
    MetricWeights w;
    w.w_lpips = c.w_lpips;
    w.w_ssim = c.w_ssim;
    w.w_psnr = c.w_psnr;
    w.view_weights[0] = c.view_w0;
    w.view_weights[1] = c.view_w1;
    w.view_weights[2] = c.view_w2;
    w.psnr_cap = c.psnr_cap;
    return w;
  }
};

// frames are [C][H][W] buffers with values in [0, 1]

double psnr(const double* a, const double* b, int c, int h, int w, double cap = 100.0);

double ssim(const double* a, const double* b, int c, int h, int w, int window = 7,
            double k1 = 0.01, double k2 = 0.03);

// LPIPS stand-in: mean squared distance between channel-unit-normalized
// responses of a fixed random 3-layer strided conv stack.
double feature_perceptual(const double* a, const double* b, int c, int h, int w,
                          uint64_t extractor_seed = 0);

enum Metric { kLpips = 0, kSsim = 1, kPsnr = 2 };

struct ClipScore {
  double per_view_per_metric[3][3] = {};  // [view][metric]
  double combined = 0.0;
};

// Per metric: temporal mean over L frames per view, then view-weighted mean;
// combined = -w_lpips*LPIPS + w_ssim*SSIM + w_psnr*PSNR.
ClipScore clip_score(const Clip& gen, const Clip& gt, const MetricWeights& weights);

enum class MaskKind { Objects, Robot };

// Metrics restricted to the ground-truth mask: computed on the mask's bounding
// box (expanded to at least the SSIM window) with out-of-mask pixels replaced
// by ground truth in both inputs. Frames with empty masks are skipped; a view
// with no valid frame is absent and the view weights renormalize; returns
// nullopt when every view is absent.
std::optional<ClipScore> masked_clip_score(const Clip& gen, const Clip& gt,
                                           const std::vector<const ViewSet*>& gt_views,
                                           const MetricWeights& weights,
                                           MaskKind kind = MaskKind::Objects);

struct GroupRewards {
  std::vector<double> raw;         // R
  std::vector<double> advantages;  // A = (R - mean) / (std_pop + eps)
  std::vector<double> weights;     // r = (clip(A, -1, 1) + 1) / 2
};

GroupRewards group_normalize(const std::vector<double>& raw, double eps);

}  // namespace pw
