#include "pixelworld/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "pixelworld/rng.hpp"
#include "pixelworld/util.hpp"

namespace pw {
namespace {

std::vector<double> gaussian_window(int n, double sigma) {
  std::vector<double> w(size_t{1} * n * n);
  const int half = n / 2;
  double sum = 0.0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const double dy = y - half, dx = x - half;
      w[y * n + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      sum += w[y * n + x];
    }
  for (auto& v : w) v /= sum;
  return w;
}

// fixed random conv stack for feature_perceptual
struct Extractor {
  struct Layer {
    int cin, cout;
    std::vector<double> w;  // [cout][cin][3][3]
  };
  std::vector<Layer> layers;
};

const Extractor& extractor(uint64_t seed, int c_in) {
  static std::mutex mu;
  static std::vector<std::pair<std::pair<uint64_t, int>, Extractor>> cache;
  std::lock_guard<std::mutex> lock(mu);
  const auto key = std::make_pair(seed, c_in);
  for (auto& e : cache)
    if (e.first == key) return e.second;
  Extractor built;
  const int widths[] = {c_in, 8, 12, 16};
  for (int l = 0; l < 3; ++l) {
    Extractor::Layer layer;
    layer.cin = widths[l];
    layer.cout = widths[l + 1];
    layer.w.resize(size_t{1} * layer.cout * layer.cin * 9);
    Rng rng(derive_seed(seed, 0xFEA7, static_cast<uint64_t>(l)));
    const double std = 1.0 / std::sqrt(9.0 * layer.cin);
    for (auto& v : layer.w) v = std * rng.normal();
    built.layers.push_back(std::move(layer));
  }
  cache.emplace_back(key, std::move(built));
  return cache.back().second;
}

// stride-2 3x3 conv with zero padding 1, then tanh
std::vector<double> conv_s2_tanh(const std::vector<double>& in, int cin, int h, int w,
                                 const std::vector<double>& k, int cout, int& oh, int& ow) {
  oh = (h + 1) / 2;
  ow = (w + 1) / 2;
  std::vector<double> out(size_t{1} * cout * oh * ow, 0.0);
  for (int co = 0; co < cout; ++co)
    for (int ci = 0; ci < cin; ++ci) {
      const double* kk = k.data() + (static_cast<size_t>(co) * cin + ci) * 9;
      const double* x = in.data() + static_cast<size_t>(ci) * h * w;
      double* o = out.data() + static_cast<size_t>(co) * oh * ow;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          double s = 0.0;
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * oy + ky - 1;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * ox + kx - 1;
              if (ix < 0 || ix >= w) continue;
              s += kk[ky * 3 + kx] * x[iy * w + ix];
            }
          }
          o[oy * ow + ox] += s;
        }
    }
  for (auto& v : out) v = std::tanh(v);
  return out;
}

// channel-unit normalization per spatial position
void unit_normalize(std::vector<double>& f, int c, int hw) {
  for (int i = 0; i < hw; ++i) {
    double n2 = 0.0;
    for (int ch = 0; ch < c; ++ch) {
      const double v = f[static_cast<size_t>(ch) * hw + i];
      n2 += v * v;
    }
    const double inv = 1.0 / (std::sqrt(n2) + 1e-8);
    for (int ch = 0; ch < c; ++ch) f[static_cast<size_t>(ch) * hw + i] *= inv;
  }
}

}  // namespace

double psnr(const double* a, const double* b, int c, int h, int w, double cap) {
  const int64_t n = int64_t{c} * h * w;
  if (n <= 0) throw ValidationError("psnr: empty frame");
  double mse = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(n);
  if (mse == 0.0) return cap;
  return std::min(cap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const double* a, const double* b, int c, int h, int w, int window, double k1,
            double k2) {
  if (window > h || window > w)
    throw ValidationError("ssim: window larger than the frame");
  static const std::vector<double> win7 = gaussian_window(7, 1.5);
  const std::vector<double> win = (window == 7) ? win7 : gaussian_window(window, 1.5);
  const double c1 = (k1 * k1), c2 = (k2 * k2);  // data range 1
  const int oh = h - window + 1, ow = w - window + 1;
  double total = 0.0;
  for (int ch = 0; ch < c; ++ch) {
    const double* x = a + static_cast<size_t>(ch) * h * w;
    const double* y = b + static_cast<size_t>(ch) * h * w;
    double acc = 0.0;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
        for (int wy = 0; wy < window; ++wy)
          for (int wx = 0; wx < window; ++wx) {
            const double g = win[wy * window + wx];
            const double xv = x[(oy + wy) * w + ox + wx];
            const double yv = y[(oy + wy) * w + ox + wx];
            mx += g * xv;
            my += g * yv;
            mxx += g * xv * xv;
            myy += g * yv * yv;
            mxy += g * xv * yv;
          }
        const double vx = mxx - mx * mx, vy = myy - my * my, cxy = mxy - mx * my;
        acc += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
    total += acc / (static_cast<double>(oh) * ow);
  }
  return total / c;
}

double feature_perceptual(const double* a, const double* b, int c, int h, int w,
                          uint64_t extractor_seed) {
  const Extractor& ex = extractor(extractor_seed, c);
  std::vector<double> fa(a, a + static_cast<size_t>(c) * h * w), fb(b, b + static_cast<size_t>(c) * h * w);
  int ha = h, wa = w;
  double total = 0.0;
  for (const auto& layer : ex.layers) {
    int oh = 0, ow = 0;
    fa = conv_s2_tanh(fa, layer.cin, ha, wa, layer.w, layer.cout, oh, ow);
    fb = conv_s2_tanh(fb, layer.cin, ha, wa, layer.w, layer.cout, oh, ow);
    ha = oh;
    wa = ow;
    std::vector<double> na = fa, nb = fb;
    unit_normalize(na, layer.cout, oh * ow);
    unit_normalize(nb, layer.cout, oh * ow);
    double d = 0.0;
    for (size_t i = 0; i < na.size(); ++i) {
      const double e = na[i] - nb[i];
      d += e * e;
    }
    total += d / static_cast<double>(na.size());
  }
  return total / static_cast<double>(ex.layers.size());
}

ClipScore clip_score(const Clip& gen, const Clip& gt, const MetricWeights& weights) {
  if (!(gen.shape == gt.shape)) throw ValidationError("clip_score: shape mismatch");
  const auto& s = gen.shape;
  ClipScore out;
  double vw_sum = 0.0;
  double mbar[3] = {0, 0, 0};
  for (int v = 0; v < s.V; ++v) vw_sum += weights.view_weights[v];
  if (!(vw_sum > 0)) throw ValidationError("clip_score: view weights sum to zero");
  for (int v = 0; v < s.V; ++v) {
    double acc[3] = {0, 0, 0};
    for (int l = 0; l < s.L; ++l) {
      const double* a = gen.frame(v, l);
      const double* b = gt.frame(v, l);
      acc[kLpips] += feature_perceptual(a, b, s.C, s.H, s.W);
      acc[kSsim] += ssim(a, b, s.C, s.H, s.W);
      acc[kPsnr] += psnr(a, b, s.C, s.H, s.W, weights.psnr_cap);
    }
    for (int m = 0; m < 3; ++m) {
      out.per_view_per_metric[v][m] = acc[m] / s.L;
      mbar[m] += weights.view_weights[v] * out.per_view_per_metric[v][m];
    }
  }
  for (int m = 0; m < 3; ++m) mbar[m] /= vw_sum;
  out.combined =
      -weights.w_lpips * mbar[kLpips] + weights.w_ssim * mbar[kSsim] + weights.w_psnr * mbar[kPsnr];
  return out;
}

std::optional<ClipScore> masked_clip_score(const Clip& gen, const Clip& gt,
                                           const std::vector<const ViewSet*>& gt_views,
                                           const MetricWeights& weights, MaskKind kind) {
  if (!(gen.shape == gt.shape)) throw ValidationError("masked_clip_score: shape mismatch");
  const auto& s = gen.shape;
  if (static_cast<int>(gt_views.size()) != s.L)
    throw ValidationError("masked_clip_score: need one ViewSet per frame");
  constexpr int kMinBox = 7;  // SSIM window

  ClipScore out;
  bool view_present[3] = {false, false, false};
  for (int v = 0; v < s.V; ++v) {
    double acc[3] = {0, 0, 0};
    int valid_frames = 0;
    for (int l = 0; l < s.L; ++l) {
      const ViewSet& vs = *gt_views[l];
      const uint8_t* mask =
          (kind == MaskKind::Objects ? vs.object_mask.data() : vs.robot_mask.data()) +
          static_cast<size_t>(v) * s.H * s.W;
      int r0 = s.H, r1 = -1, c0 = s.W, c1 = -1;
      for (int r = 0; r < s.H; ++r)
        for (int c = 0; c < s.W; ++c)
          if (mask[r * s.W + c]) {
            r0 = std::min(r0, r);
            r1 = std::max(r1, r);
            c0 = std::min(c0, c);
            c1 = std::max(c1, c);
          }
      if (r1 < 0) continue;  // empty mask, skip frame

      auto widen = [](int& lo, int& hi, int limit) {
        while (hi - lo + 1 < kMinBox) {
          if (lo > 0) --lo;
          if (hi - lo + 1 >= kMinBox) break;
          if (hi < limit - 1) ++hi;
          if (lo == 0 && hi == limit - 1) break;
        }
      };
      widen(r0, r1, s.H);
      widen(c0, c1, s.W);
      const int bh = r1 - r0 + 1, bw = c1 - c0 + 1;
      if (bh < kMinBox || bw < kMinBox) continue;  // image smaller than the window

      std::vector<double> ga(static_cast<size_t>(s.C) * bh * bw), gb(static_cast<size_t>(s.C) * bh * bw);
      const double* fa = gen.frame(v, l);
      const double* fb = gt.frame(v, l);
      for (int ch = 0; ch < s.C; ++ch)
        for (int r = 0; r < bh; ++r)
          for (int c = 0; c < bw; ++c) {
            const size_t src = static_cast<size_t>(ch) * s.H * s.W + (r0 + r) * s.W + (c0 + c);
            const size_t dst = static_cast<size_t>(ch) * bh * bw + static_cast<size_t>(r) * bw + c;
            const bool inside = mask[(r0 + r) * s.W + (c0 + c)] != 0;
            gb[dst] = fb[src];
            ga[dst] = inside ? fa[src] : fb[src];
          }
      acc[kLpips] += feature_perceptual(ga.data(), gb.data(), s.C, bh, bw);
      acc[kSsim] += ssim(ga.data(), gb.data(), s.C, bh, bw);
      acc[kPsnr] += psnr(ga.data(), gb.data(), s.C, bh, bw, weights.psnr_cap);
      ++valid_frames;
    }
    if (valid_frames > 0) {
      view_present[v] = true;
      for (int m = 0; m < 3; ++m) out.per_view_per_metric[v][m] = acc[m] / valid_frames;
    }
  }

  double vw_sum = 0.0;
  double mbar[3] = {0, 0, 0};
  for (int v = 0; v < s.V; ++v)
    if (view_present[v]) {
      vw_sum += weights.view_weights[v];
      for (int m = 0; m < 3; ++m)
        mbar[m] += weights.view_weights[v] * out.per_view_per_metric[v][m];
    }
  if (!(vw_sum > 0)) return std::nullopt;
  for (int m = 0; m < 3; ++m) mbar[m] /= vw_sum;
  out.combined =
      -weights.w_lpips * mbar[kLpips] + weights.w_ssim * mbar[kSsim] + weights.w_psnr * mbar[kPsnr];
  return out;
}

GroupRewards group_normalize(const std::vector<double>& raw, double eps) {
  const size_t k = raw.size();
  if (k < 2) throw ValidationError("group_normalize: need K >= 2 rewards");
  GroupRewards g;
  g.raw = raw;
  double mean = 0.0;
  for (double r : raw) mean += r;
  mean /= static_cast<double>(k);
  double var = 0.0;
  for (double r : raw) var += (r - mean) * (r - mean);
  var /= static_cast<double>(k);  // population variance
  const double sd = std::sqrt(var);
  g.advantages.resize(k);
  g.weights.resize(k);
  for (size_t i = 0; i < k; ++i) {
    const double dev = raw[i] - mean;
    const double a = (sd == 0.0 && dev == 0.0) ? 0.0 : dev / (sd + eps);
    g.advantages[i] = a;
    g.weights[i] = (std::clamp(a, -1.0, 1.0) + 1.0) / 2.0;
  }
  return g;
}

}  // namespace pw
