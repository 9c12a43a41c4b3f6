#include "pixelworld/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pixelworld/util.hpp"

namespace pw {

namespace {

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    const size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

const char* kMetricHeader = "rollout_id,step,view,metric,value";

}  // namespace

std::string EvalTable::to_csv() const {
  std::string csv = std::string(kMetricHeader) + "\n";
  for (const auto& r : rows)
    csv += fmt(int64_t{r.rollout_id}) + "," + fmt(int64_t{r.step}) + "," + r.view + "," +
           r.metric + "," + fmt(r.value) + "\n";
  return csv;
}

EvalTable read_metric_csv(const std::string& text) {
  EvalTable table;
  const auto lines = csv_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i] == kMetricHeader) continue;
    const auto f = split_line(lines[i], ',');
    if (f.size() != 5)
      throw ValidationError("metric CSV: expected 5 columns, got line '" + lines[i] + "'");
    MetricRow r;
    r.rollout_id = std::stoi(f[0]);
    r.step = std::stoi(f[1]);
    r.view = f[2];
    r.metric = f[3];
    r.value = std::stod(f[4]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

double mean_metric(const EvalTable& table, const std::string& metric, int step) {
  double sum = 0.0;
  int64_t n = 0;
  for (const auto& r : table.rows)
    if (r.metric == metric && r.step == step) {
      sum += r.value;
      ++n;
    }
  if (n == 0) throw ValidationError("mean_metric: no rows for " + metric);
  return sum / static_cast<double>(n);
}

std::map<int, double> per_episode_combined(const EvalTable& table) {
  std::map<int, std::pair<double, int64_t>> acc;
  for (const auto& r : table.rows)
    if (r.metric == "combined" && r.view == "all") {
      auto& [sum, n] = acc[r.rollout_id];
      sum += r.value;
      ++n;
    }
  std::map<int, double> out;
  for (const auto& [id, sn] : acc) out[id] = sn.first / static_cast<double>(sn.second);
  return out;
}

EvalTable rollout_eval_with(const ChunkGenerator& gen, const ModelConfig& mc,
                            const std::vector<Episode>& episodes, int id_offset,
                            const TrainConfig& cfg) {
  const int n_chunks = cfg.eval_chunks;
  const MetricWeights weights = MetricWeights::from(cfg);
  const char* metric_names[3] = {"lpips", "ssim", "psnr"};

  std::vector<int> eligible;
  for (size_t e = 0; e < episodes.size(); ++e) {
    if (n_chunks * mc.L > episodes[e].T()) {
      std::fprintf(stderr, "warning: episode %d too short for %d chunks, skipped\n",
                   id_offset + static_cast<int>(e), n_chunks);
      continue;
    }
    eligible.push_back(static_cast<int>(e));
  }

  std::vector<std::vector<MetricRow>> per_ep(eligible.size());
  parallel_for(static_cast<int64_t>(eligible.size()), cfg.threads, [&](int64_t j) {
    const int e = eligible[j];
    const Episode& ep = episodes[e];
    const int id = id_offset + e;
    HistoryBuffer buf = init_history(mc, ep.views[0], eef_pose(ep.states[0]));
    std::vector<Action> rows(mc.L);
    auto& out = per_ep[j];
    for (int c = 0; c < n_chunks; ++c) {
      for (int l = 0; l < mc.L; ++l) rows[l] = ep.actions[c * mc.L + l];
      Rng rng(derive_seed(cfg.seed, 0xE7A1, id, c));
      const Clip chunk = gen(buf, rows, c, rng);
      const Clip gt = episode_chunk(mc, ep, 1 + c * mc.L);
      const ClipScore score = clip_score(chunk, gt, weights);
      for (int v = 0; v < mc.V; ++v)
        for (int m = 0; m < 3; ++m)
          out.push_back({id, c, fmt(int64_t{v}), metric_names[m],
                         score.per_view_per_metric[v][m]});
      out.push_back({id, c, "all", "combined", score.combined});
      if (cfg.masked_metrics) {
        std::vector<const ViewSet*> gt_views(mc.L);
        for (int l = 0; l < mc.L; ++l) gt_views[l] = &ep.views[1 + c * mc.L + l];
        const auto obj = masked_clip_score(chunk, gt, gt_views, weights, MaskKind::Objects);
        if (obj) out.push_back({id, c, "all", "combined_objects", obj->combined});
        const auto rob = masked_clip_score(chunk, gt, gt_views, weights, MaskKind::Robot);
        if (rob) out.push_back({id, c, "all", "combined_robot", rob->combined});
      }
      push_chunk(buf, chunk, eef_pose(ep.states[(c + 1) * mc.L]));
    }
  });

  EvalTable table;
  for (auto& v : per_ep)
    table.rows.insert(table.rows.end(), std::make_move_iterator(v.begin()),
                      std::make_move_iterator(v.end()));
  return table;
}

EvalTable rollout_eval(const DenoiserParams& params, const std::vector<Episode>& episodes,
                       int id_offset, const TrainConfig& cfg) {
  if (!(params.cfg == ModelConfig::from(cfg)))
    throw ValidationError("rollout_eval: checkpoint model config does not match run config");
  const SamplerConfig sc{cfg.sigma_max, cfg.sigma_min, cfg.sampler_steps};
  const ChunkGenerator gen = [&params, sc](const HistoryBuffer& buf,
                                           const std::vector<Action>& rows, int, Rng& rng) {
    return generate_chunk(params, buf, rows, sc, rng);
  };
  return rollout_eval_with(gen, params.cfg, episodes, id_offset, cfg);
}

double binom_cdf_le(int n, int k) {
  if (n < 0 || n > 1000) throw ValidationError("binom_cdf_le: n must be in [0, 1000]");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  double t = std::ldexp(1.0, -n);  // C(n,0) * 2^-n
  double sum = t;
  for (int j = 0; j < k; ++j) {
    t *= static_cast<double>(n - j) / static_cast<double>(j + 1);
    sum += t;
  }
  return std::min(sum, 1.0);
}

double binom_cdf_ge(int n, int k) {
  if (n < 0 || n > 1000) throw ValidationError("binom_cdf_ge: n must be in [0, 1000]");
  if (k <= 0) return 1.0;
  if (k > n) return 0.0;
  double t = std::ldexp(1.0, -n);  // C(n,n) * 2^-n
  double sum = t;
  for (int j = n; j > k; --j) {
    t *= static_cast<double>(j) / static_cast<double>(n - j + 1);
    sum += t;
  }
  return std::min(sum, 1.0);
}

PairedResult paired_compare(const EvalTable& a, const EvalTable& b) {
  const auto ma = per_episode_combined(a);
  const auto mb = per_episode_combined(b);
  if (ma.size() != mb.size())
    throw ValidationError("paired_compare: episode id sets differ in size");
  PairedResult res;
  for (const auto& [id, va] : ma) {
    const auto it = mb.find(id);
    if (it == mb.end())
      throw ValidationError("paired_compare: id " + fmt(int64_t{id}) + " missing from b");
    const double d = va - it->second;
    res.ids.push_back(id);
    res.deltas.push_back(d);
    if (d > 0.0)
      ++res.wins;
    else if (d < 0.0)
      ++res.losses;
    else
      ++res.ties;
  }
  const int n = res.wins + res.losses;
  if (n > 0) {
    res.p_two_sided = std::min(1.0, 2.0 * binom_cdf_le(n, std::min(res.wins, res.losses)));
    res.p_one_sided = binom_cdf_ge(n, res.wins);
  }
  return res;
}

double elo_expected(double r_i, double r_j) {
  return 1.0 / (1.0 + std::pow(10.0, (r_j - r_i) / 400.0));
}

void elo_update(EloState& state, const std::string& winner, const std::string& loser) {
  const auto wi = state.ratings.find(winner);
  const auto li = state.ratings.find(loser);
  if (wi == state.ratings.end() || li == state.ratings.end())
    throw ValidationError("elo_update: unknown model id");
  const double d = state.k_factor * (1.0 - elo_expected(wi->second, li->second));
  wi->second += d;
  li->second -= d;
}

EloState elo_tournament(const std::vector<Vote>& votes, double k_factor, double init_rating) {
  if (!(k_factor > 0.0)) throw ValidationError("elo_tournament: k_factor must be > 0");
  EloState state;
  state.k_factor = k_factor;
  state.init_rating = init_rating;
  for (const auto& v : votes) {
    if (v.winner != v.model_a && v.winner != v.model_b)
      throw ValidationError("elo_tournament: winner '" + v.winner +
                            "' is neither contestant");
    state.ratings.try_emplace(v.model_a, init_rating);
    state.ratings.try_emplace(v.model_b, init_rating);
    elo_update(state, v.winner, v.winner == v.model_a ? v.model_b : v.model_a);
  }
  return state;
}

std::vector<Vote> parse_votes_csv(const std::string& text) {
  std::vector<Vote> votes;
  const auto lines = csv_lines(text);
  for (size_t i = 0; i < lines.size(); ++i) {
    if (i == 0 && lines[i] == "model_a,model_b,winner") continue;
    const auto f = split_line(lines[i], ',');
    if (f.size() != 3 || f[0].empty() || f[1].empty() || f[2].empty())
      throw ValidationError("votes CSV: malformed line '" + lines[i] + "'");
    votes.push_back({f[0], f[1], f[2]});
  }
  return votes;
}

std::string ratings_csv(const EloState& state) {
  std::string csv = "model,rating\n";
  for (const auto& [id, r] : state.ratings) csv += id + "," + fmt(r) + "\n";
  return csv;
}

}  // namespace pw
