#include "pixelworld/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pixelworld/util.hpp"

namespace pw {
namespace {

// ---------------------------------------------------------------- conv 3x3
// stride 1, zero padding 1, NCHW planes

void conv3x3_fwd(const double* in, int cin, int h, int w, const double* k,
                 const double* bias, double* out, int cout) {
  const int64_t plane = int64_t{h} * w;
  for (int co = 0; co < cout; ++co) {
    double* o = out + co * plane;
    const double b = bias ? bias[co] : 0.0;
    std::fill(o, o + plane, b);
    for (int ci = 0; ci < cin; ++ci) {
      const double* x = in + ci * plane;
      const double* kk = k + (int64_t{co} * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int r0 = std::max(0, -dy), r1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const double kv = kk[ky * 3 + kx];
          if (kv == 0.0) continue;
          const int dx = kx - 1;
          const int c0 = std::max(0, -dx), c1 = std::min(w, w - dx);
          for (int r = r0; r < r1; ++r) {
            double* orow = o + int64_t{r} * w;
            const double* xrow = x + int64_t{r + dy} * w + dx;
            for (int c = c0; c < c1; ++c) orow[c] += kv * xrow[c];
          }
        }
      }
    }
  }
}

void conv3x3_bwd_input(const double* dout, int cout, int h, int w, const double* k,
                       int cin, double* din) {
  const int64_t plane = int64_t{h} * w;
  std::fill(din, din + int64_t{cin} * plane, 0.0);
  for (int co = 0; co < cout; ++co) {
    const double* g = dout + co * plane;
    for (int ci = 0; ci < cin; ++ci) {
      double* d = din + ci * plane;
      const double* kk = k + (int64_t{co} * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        // din(r,c) += k[ky][kx] * dout(r - dy, c - dx)
        const int r0 = std::max(0, dy), r1 = std::min(h, h + dy);
        for (int kx = 0; kx < 3; ++kx) {
          const double kv = kk[ky * 3 + kx];
          if (kv == 0.0) continue;
          const int dx = kx - 1;
          const int c0 = std::max(0, dx), c1 = std::min(w, w + dx);
          for (int r = r0; r < r1; ++r) {
            double* drow = d + int64_t{r} * w;
            const double* grow = g + int64_t{r - dy} * w - dx;
            for (int c = c0; c < c1; ++c) drow[c] += kv * grow[c];
          }
        }
      }
    }
  }
}

void conv3x3_bwd_params(const double* dout, int cout, int h, int w, const double* in,
                        int cin, double* dk, double* dbias, double scale) {
  const int64_t plane = int64_t{h} * w;
  for (int co = 0; co < cout; ++co) {
    const double* g = dout + co * plane;
    if (dbias) {
      double s = 0.0;
      for (int64_t i = 0; i < plane; ++i) s += g[i];
      dbias[co] += scale * s;
    }
    for (int ci = 0; ci < cin; ++ci) {
      const double* x = in + ci * plane;
      double* dkk = dk + (int64_t{co} * cin + ci) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int r0 = std::max(0, -dy), r1 = std::min(h, h - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int c0 = std::max(0, -dx), c1 = std::min(w, w - dx);
          double s = 0.0;
          for (int r = r0; r < r1; ++r) {
            const double* grow = g + int64_t{r} * w;
            const double* xrow = x + int64_t{r + dy} * w + dx;
            for (int c = c0; c < c1; ++c) s += grow[c] * xrow[c];
          }
          dkk[ky * 3 + kx] += scale * s;
        }
      }
    }
  }
}

void check_finite(const std::vector<double>& v, const char* where) {
  for (double x : v)
    if (!std::isfinite(x))
      throw NumericError(std::string("denoiser: non-finite activation in ") + where);
}

std::vector<double> build_cond_vec(const ModelConfig& cfg, double sigma,
                                   const Conditioning& cond) {
  std::vector<double> c;
  c.reserve(cfg.cond_dim());
  c.push_back(std::log(sigma));
  c.insert(c.end(), cond.actions.begin(), cond.actions.end());
  c.insert(c.end(), cond.history_poses.begin(), cond.history_poses.end());
  return c;
}

void validate_inputs(const DenoiserParams& p, const NoisyClip& x, const Conditioning& cond) {
  const ModelConfig& m = p.cfg;
  if (!(x.sigma > 0.0)) throw ValidationError("denoise_x0: sigma must be > 0");
  if (!(x.data.shape == m.clip_shape())) throw ValidationError("denoise_x0: clip shape mismatch");
  const size_t hist = static_cast<size_t>(m.H) * m.clip_shape().numel();
  if (cond.history_frames.size() != hist)
    throw ValidationError("denoise_x0: history size mismatch");
  if (cond.history_poses.size() != static_cast<size_t>(m.H) * m.action_dim)
    throw ValidationError("denoise_x0: pose window size mismatch");
  if (cond.actions.size() != static_cast<size_t>(m.L) * m.action_dim)
    throw ValidationError("denoise_x0: action rows mismatch");
  if (p.arrays.size() != kNumArrays) throw ValidationError("denoise_x0: unbound parameters");
}

}  // namespace

DenoiserParams init_params(const ModelConfig& cfg, uint64_t seed) {
  DenoiserParams p;
  p.cfg = cfg;
  const int cin = cfg.in_channels(), hid = cfg.hidden, cout = cfg.chunk_channels();
  const int cd = cfg.cond_dim();
  auto add = [&p](const std::string& name, std::vector<int64_t> shape) -> ParamArray& {
    ParamArray a;
    a.name = name;
    a.shape = std::move(shape);
    a.w.assign(a.numel(), 0.0);
    p.arrays.push_back(std::move(a));
    return p.arrays.back();
  };
  auto& encw = add("enc.weight", {hid, cin, 3, 3});
  add("enc.bias", {hid});
  auto& midw = add("mid.weight", {hid, hid, 3, 3});
  add("mid.bias", {hid});
  add("film.weight", {2 * hid, cd});
  add("film.bias", {2 * hid});
  add("head.weight", {cout, hid, 3, 3});
  add("head.bias", {cout});

  Rng rng(derive_seed(seed, 0xD0DEC));
  const double enc_std = 1.0 / std::sqrt(9.0 * cin);
  for (auto& v : encw.w) v = enc_std * rng.normal();
  const double mid_std = 1.0 / std::sqrt(9.0 * hid);
  for (auto& v : midw.w) v = mid_std * rng.normal();
  return p;
}

void apply_freeze_policy(DenoiserParams& params) {
  for (auto& a : params.arrays) a.frozen = a.name.rfind("enc.", 0) == 0;
}

Gradients alloc_gradients(const DenoiserParams& params) {
  Gradients g(params.arrays.size());
  for (size_t i = 0; i < params.arrays.size(); ++i)
    g[i].assign(params.arrays[i].w.size(), 0.0);
  return g;
}

Clip denoise_x0(const DenoiserParams& params, const NoisyClip& x_sigma,
                const Conditioning& cond, ForwardCache* cache) {
  validate_inputs(params, x_sigma, cond);
  const ModelConfig& m = params.cfg;
  const int h = m.img, w = m.img;
  const int64_t plane = int64_t{h} * w;
  const int ch_chunk = m.chunk_channels();
  const int cin = m.in_channels(), hid = m.hidden;

  ForwardCache local;
  ForwardCache& cc = cache ? *cache : local;
  const auto pre = precondition_coeffs(x_sigma.sigma);
  const double c_in = precondition_c_in(x_sigma.sigma);
  cc.c_skip = pre.c_skip;
  cc.c_out = pre.c_out;

  cc.xin.resize(int64_t{cin} * plane);
  for (int64_t i = 0; i < ch_chunk * plane; ++i) cc.xin[i] = c_in * x_sigma.data.data[i];
  std::memcpy(cc.xin.data() + ch_chunk * plane, cond.history_frames.data(),
              cond.history_frames.size() * sizeof(double));

  cc.h1.resize(int64_t{hid} * plane);
  conv3x3_fwd(cc.xin.data(), cin, h, w, params.arrays[kEncW].w.data(),
              params.arrays[kEncB].w.data(), cc.h1.data(), hid);
  for (auto& v : cc.h1) v = std::tanh(v);
  check_finite(cc.h1, "enc");

  cc.a2.resize(int64_t{hid} * plane);
  conv3x3_fwd(cc.h1.data(), hid, h, w, params.arrays[kMidW].w.data(),
              params.arrays[kMidB].w.data(), cc.a2.data(), hid);

  cc.cond_vec = build_cond_vec(m, x_sigma.sigma, cond);
  const int cd = m.cond_dim();
  std::vector<double> film(2 * hid);
  const auto& fw = params.arrays[kFilmW].w;
  const auto& fb = params.arrays[kFilmB].w;
  for (int r = 0; r < 2 * hid; ++r) {
    double s = fb[r];
    const double* row = fw.data() + int64_t{r} * cd;
    for (int j = 0; j < cd; ++j) s += row[j] * cc.cond_vec[j];
    film[r] = s;
  }
  cc.film_s.assign(film.begin(), film.begin() + hid);

  cc.h2.resize(int64_t{hid} * plane);
  for (int c = 0; c < hid; ++c) {
    const double gain = 1.0 + film[c], shift = film[hid + c];
    const double* a = cc.a2.data() + c * plane;
    double* o = cc.h2.data() + c * plane;
    for (int64_t i = 0; i < plane; ++i) o[i] = std::tanh(a[i] * gain + shift);
  }
  check_finite(cc.h2, "mid");

  Clip out = Clip::zeros(m.clip_shape());
  std::vector<double> mtheta(int64_t{ch_chunk} * plane);
  conv3x3_fwd(cc.h2.data(), hid, h, w, params.arrays[kHeadW].w.data(),
              params.arrays[kHeadB].w.data(), mtheta.data(), ch_chunk);
  check_finite(mtheta, "head");
  for (int64_t i = 0; i < static_cast<int64_t>(out.data.size()); ++i)
    out.data[i] = pre.c_skip * x_sigma.data.data[i] + pre.c_out * mtheta[i];
  return out;
}

void denoiser_param_gradients(const DenoiserParams& params, const NoisyClip& x_sigma,
                              const Conditioning& cond, const Clip& upstream,
                              const ForwardCache& cc, Gradients& grads, double scale) {
  const ModelConfig& m = params.cfg;
  const int h = m.img, w = m.img;
  const int64_t plane = int64_t{h} * w;
  const int ch_chunk = m.chunk_channels();
  const int cin = m.in_channels(), hid = m.hidden, cd = m.cond_dim();
  if (upstream.data.size() != static_cast<size_t>(ch_chunk) * plane)
    throw ValidationError("denoiser_param_gradients: upstream shape mismatch");

  const bool frozen[] = {params.arrays[kEncW].frozen, params.arrays[kMidW].frozen,
                         params.arrays[kFilmW].frozen, params.arrays[kHeadW].frozen};

  // dm = c_out * upstream
  std::vector<double> dm(int64_t{ch_chunk} * plane);
  for (size_t i = 0; i < dm.size(); ++i) dm[i] = cc.c_out * upstream.data[i];

  if (!params.arrays[kHeadW].frozen)
    conv3x3_bwd_params(dm.data(), ch_chunk, h, w, cc.h2.data(), hid,
                       grads[kHeadW].data(), grads[kHeadB].data(), scale);

  const bool need_below_head = !(frozen[0] && frozen[1] && frozen[2]);
  if (!need_below_head) return;

  std::vector<double> dh2(int64_t{hid} * plane);
  conv3x3_bwd_input(dm.data(), ch_chunk, h, w, params.arrays[kHeadW].w.data(), hid,
                    dh2.data());

  // through tanh and FiLM
  std::vector<double> da2(int64_t{hid} * plane);
  std::vector<double> ds(hid, 0.0), dt(hid, 0.0);
  for (int c = 0; c < hid; ++c) {
    const double gain = 1.0 + cc.film_s[c];
    const double* h2c = cc.h2.data() + c * plane;
    const double* a2c = cc.a2.data() + c * plane;
    const double* dh2c = dh2.data() + c * plane;
    double* da2c = da2.data() + c * plane;
    double ssum = 0.0, tsum = 0.0;
    for (int64_t i = 0; i < plane; ++i) {
      const double dpre = dh2c[i] * (1.0 - h2c[i] * h2c[i]);
      da2c[i] = dpre * gain;
      ssum += dpre * a2c[i];
      tsum += dpre;
    }
    ds[c] = ssum;
    dt[c] = tsum;
  }

  if (!params.arrays[kFilmW].frozen) {
    auto& gw = grads[kFilmW];
    auto& gb = grads[kFilmB];
    for (int r = 0; r < 2 * hid; ++r) {
      const double g = (r < hid ? ds[r] : dt[r - hid]) * scale;
      gb[r] += g;
      double* row = gw.data() + int64_t{r} * cd;
      for (int j = 0; j < cd; ++j) row[j] += g * cc.cond_vec[j];
    }
  }

  if (!params.arrays[kMidW].frozen)
    conv3x3_bwd_params(da2.data(), hid, h, w, cc.h1.data(), hid, grads[kMidW].data(),
                       grads[kMidB].data(), scale);

  if (!params.arrays[kEncW].frozen) {
    std::vector<double> dh1(int64_t{hid} * plane);
    conv3x3_bwd_input(da2.data(), hid, h, w, params.arrays[kMidW].w.data(), hid,
                      dh1.data());
    for (int64_t i = 0; i < static_cast<int64_t>(dh1.size()); ++i)
      dh1[i] *= 1.0 - cc.h1[i] * cc.h1[i];
    conv3x3_bwd_params(dh1.data(), hid, h, w, cc.xin.data(), cin, grads[kEncW].data(),
                       grads[kEncB].data(), scale);
  }
  (void)x_sigma;
}

Clip euler_sample(const DenoiserParams& params, const Conditioning& cond,
                  const SamplerConfig& sc, Rng& rng) {
  const auto sched = sigma_schedule(sc.sigma_max, sc.sigma_min, sc.n_steps);
  Clip x = Clip::zeros(params.cfg.clip_shape());
  rng.fill_normal(x.data.data(), x.data.size());
  for (auto& v : x.data) v *= sc.sigma_max;
  for (int i = 0; i < sc.n_steps; ++i) {
    const double s = sched[i], snext = sched[i + 1];
    const Clip d = denoise_x0(params, NoisyClip{x, s}, cond);
    const double step = (snext - s) / s;
    for (size_t j = 0; j < x.data.size(); ++j) x.data[j] += step * (x.data[j] - d.data[j]);
  }
  check_finite(x.data, "euler_sample");
  return x;
}

void save_checkpoint(DenoiserParams& params, const std::string& path) {
  for (auto& a : params.arrays)
    for (auto& v : a.w) v = f32_round(v);
  BinWriter out(path);
  out.bytes("PWCK", 4);
  out.u32(params.version);
  out.u32(static_cast<uint32_t>(params.arrays.size()));
  for (const auto& a : params.arrays) {
    out.str(a.name);
    out.u32(static_cast<uint32_t>(a.shape.size()));
    for (auto d : a.shape) out.u64(static_cast<uint64_t>(d));
    out.f32v(a.w);
    out.u8(a.frozen ? 1 : 0);
  }
  out.close();
}

DenoiserParams load_checkpoint(const std::string& path) {
  BinReader in(path);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, "PWCK", 4) != 0)
    throw ValidationError("not a checkpoint file (bad magic): " + path);
  DenoiserParams p;
  p.version = in.u32();
  if (p.version != 1) throw ValidationError("unsupported checkpoint version in " + path);
  const uint32_t n = in.u32();
  if (n > 1024) throw IoError("implausible layer count in " + path);
  p.arrays.resize(n);
  for (auto& a : p.arrays) {
    a.name = in.str();
    const uint32_t rank = in.u32();
    if (rank > 8) throw IoError("implausible rank in " + path);
    a.shape.resize(rank);
    for (auto& d : a.shape) d = static_cast<int64_t>(in.u64());
    in.f32v(a.w, static_cast<size_t>(a.numel()));
    a.frozen = in.u8() != 0;
  }
  return p;
}

void bind_config(DenoiserParams& params, const ModelConfig& cfg) {
  DenoiserParams ref = init_params(cfg, 0);
  if (params.arrays.size() != ref.arrays.size())
    throw ValidationError("checkpoint does not match model config: layer count");
  for (size_t i = 0; i < ref.arrays.size(); ++i) {
    if (params.arrays[i].name != ref.arrays[i].name ||
        params.arrays[i].shape != ref.arrays[i].shape)
      throw ValidationError("checkpoint does not match model config at array '" +
                            ref.arrays[i].name + "'");
  }
  params.cfg = cfg;
}

}  // namespace pw
