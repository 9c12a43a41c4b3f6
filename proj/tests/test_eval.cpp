// Closed-loop evaluation via injected chunk generators, metric CSV plumbing,
// the exact sign test, and the ELO aggregator.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "pixelworld/eval.hpp"
#include "pixelworld/util.hpp"

using namespace pw;

namespace {

TrainConfig tiny_cfg() {
  TrainConfig cfg;
  cfg.image = 8;
  cfg.H = 1;
  cfg.L = 1;
  cfg.hidden = 4;
  cfg.episodes = 3;
  cfg.horizon = 6;
  cfg.eval_chunks = 4;
  cfg.sampler_steps = 2;
  return cfg;
}

std::vector<Episode> tiny_dataset(const TrainConfig& cfg, uint64_t seed) {
  return generate_episodes(WorldConfig::from(cfg), cfg.episodes, cfg.horizon, seed, 1);
}

// Returns the ground-truth chunk: a perfect world model.
ChunkGenerator perfect_generator(const ModelConfig& mc, const std::vector<Episode>& eps) {
  return [mc, &eps](const HistoryBuffer&, const std::vector<Action>&, int chunk_ix,
                    Rng&) -> Clip {
    // chunk chunk_ix covers frames [1 + chunk_ix*L, 1 + (chunk_ix+1)*L)
    return episode_chunk(mc, eps.back(), 1 + chunk_ix * mc.L);
  };
}

}  // namespace

TEST_CASE("metric CSV round-trips") {
  EvalTable t;
  t.rows.push_back({0, 0, "0", "ssim", 0.75});
  t.rows.push_back({0, 1, "all", "combined", 1.25});
  t.rows.push_back({3, 0, "2", "psnr", 31.5});

  std::string csv = t.to_csv();
  CHECK(csv.rfind("rollout_id,step,view,metric,value\n", 0) == 0);
  EvalTable back = read_metric_csv(csv);
  REQUIRE(back.rows.size() == t.rows.size());
  for (size_t i = 0; i < t.rows.size(); ++i) {
    CHECK(back.rows[i].rollout_id == t.rows[i].rollout_id);
    CHECK(back.rows[i].step == t.rows[i].step);
    CHECK(back.rows[i].view == t.rows[i].view);
    CHECK(back.rows[i].metric == t.rows[i].metric);
    CHECK(back.rows[i].value == t.rows[i].value);
  }
  CHECK_THROWS_AS(read_metric_csv("rollout_id,step\n1,2\n"), ValidationError);
}

TEST_CASE("mean_metric and per_episode_combined aggregate as documented") {
  EvalTable t;
  t.rows.push_back({0, 0, "all", "combined", 1.0});
  t.rows.push_back({0, 1, "all", "combined", 3.0});
  t.rows.push_back({1, 0, "all", "combined", 5.0});
  t.rows.push_back({1, 1, "all", "combined", 7.0});
  t.rows.push_back({0, 0, "0", "ssim", 0.5});
  t.rows.push_back({0, 0, "1", "ssim", 0.7});

  CHECK(mean_metric(t, "combined", 0) == doctest::Approx(3.0));
  CHECK(mean_metric(t, "combined", 1) == doctest::Approx(5.0));
  CHECK(mean_metric(t, "ssim", 0) == doctest::Approx(0.6));

  auto per = per_episode_combined(t);
  REQUIRE(per.size() == 2);
  CHECK(per.at(0) == doctest::Approx(2.0));
  CHECK(per.at(1) == doctest::Approx(6.0));
}

TEST_CASE("a perfect generator scores the metric optimum at every step") {
  TrainConfig cfg = tiny_cfg();
  cfg.episodes = 1;
  auto eps = tiny_dataset(cfg, 7);
  ModelConfig mc = ModelConfig::from(cfg);

  EvalTable t = rollout_eval_with(perfect_generator(mc, eps), mc, eps, 0, cfg);
  REQUIRE(!t.rows.empty());

  const double optimum = 1.0 + (1.0 / 32.0) * 100.0;
  for (int step = 0; step < cfg.eval_chunks; ++step) {
    CHECK(mean_metric(t, "ssim", step) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mean_metric(t, "lpips", step) == doctest::Approx(0.0));
    CHECK(mean_metric(t, "psnr", step) == doctest::Approx(100.0));
    CHECK(mean_metric(t, "combined", step) == doctest::Approx(optimum).epsilon(1e-9));
  }

  auto per = per_episode_combined(t);
  REQUIRE(per.size() == 1);
  CHECK(per.at(0) == doctest::Approx(optimum).epsilon(1e-9));
}

TEST_CASE("a degrading generator produces falling per-step curves") {
  TrainConfig cfg = tiny_cfg();
  cfg.episodes = 1;
  auto eps = tiny_dataset(cfg, 8);
  ModelConfig mc = ModelConfig::from(cfg);

  ChunkGenerator degrading = [mc, &eps](const HistoryBuffer&, const std::vector<Action>&,
                                        int chunk_ix, Rng& rng) -> Clip {
    Clip c = episode_chunk(mc, eps[0], 1 + chunk_ix * mc.L);
    double sigma = 0.08 * (chunk_ix + 1);
    for (auto& x : c.data) x = std::min(1.0, std::max(0.0, x + sigma * rng.normal()));
    return c;
  };

  EvalTable t = rollout_eval_with(degrading, mc, eps, 0, cfg);
  double first = mean_metric(t, "combined", 0);
  double last = mean_metric(t, "combined", cfg.eval_chunks - 1);
  CHECK(first > last);
}

TEST_CASE("episodes shorter than the rollout are skipped; ids keep the offset") {
  TrainConfig cfg = tiny_cfg();
  cfg.eval_chunks = 4;  // needs 4 frames after the first
  auto eps = tiny_dataset(cfg, 9);
  TrainConfig short_cfg = cfg;
  short_cfg.horizon = 2;
  auto short_eps = generate_episodes(WorldConfig::from(cfg), 1, 2, 10, 1);
  eps.insert(eps.begin() + 1, short_eps[0]);

  ModelConfig mc = ModelConfig::from(cfg);
  EvalTable t = rollout_eval_with(perfect_generator(mc, eps), mc, eps, 100, cfg);

  std::map<int, int> rows_per_id;
  for (const auto& r : t.rows) rows_per_id[r.rollout_id]++;
  CHECK(rows_per_id.count(100) == 1);
  CHECK(rows_per_id.count(101) == 0);  // the short one
  CHECK(rows_per_id.count(102) == 1);
  CHECK(rows_per_id.count(103) == 1);
}

TEST_CASE("rollout_eval on a real checkpoint is deterministic") {
  TrainConfig cfg = tiny_cfg();
  cfg.episodes = 2;
  auto eps = tiny_dataset(cfg, 11);
  ModelConfig mc = ModelConfig::from(cfg);
  DenoiserParams p = init_params(mc, 12);

  EvalTable a = rollout_eval(p, eps, 0, cfg);
  EvalTable b = rollout_eval(p, eps, 0, cfg);
  CHECK(a.to_csv() == b.to_csv());

  TrainConfig threaded = cfg;
  threaded.threads = 3;
  EvalTable c = rollout_eval(p, eps, 0, threaded);
  CHECK(a.to_csv() == c.to_csv());
}

TEST_CASE("binomial CDFs are exact for small n") {
  CHECK(binom_cdf_le(5, 2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(binom_cdf_ge(5, 3) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(binom_cdf_le(20, 0) == doctest::Approx(std::ldexp(1.0, -20)).epsilon(1e-12));
  CHECK(binom_cdf_ge(20, 20) == doctest::Approx(std::ldexp(1.0, -20)).epsilon(1e-12));
  CHECK(binom_cdf_le(10, 10) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(binom_cdf_ge(10, 0) == doctest::Approx(1.0).epsilon(1e-15));

  for (int n = 1; n <= 30; ++n)
    for (int k = 0; k < n; ++k)
      CHECK(binom_cdf_le(n, k) + binom_cdf_ge(n, k + 1) == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(binom_cdf_le(1001, 3), ValidationError);
}

TEST_CASE("paired_compare counts signs and computes exact p-values") {
  EvalTable a, b;
  for (int id = 0; id < 6; ++id) {
    double va = (id < 4) ? 2.0 : 1.0;  // a wins 4, loses 1, ties 1
    double vb = (id == 5) ? va : ((id == 4) ? 2.0 : 1.0);
    a.rows.push_back({id, 0, "all", "combined", va});
    b.rows.push_back({id, 0, "all", "combined", vb});
  }
  PairedResult r = paired_compare(a, b);
  CHECK(r.wins == 4);
  CHECK(r.losses == 1);
  CHECK(r.ties == 1);
  REQUIRE(r.ids.size() == 6);
  CHECK(r.deltas[0] == doctest::Approx(1.0));
  // n = 5 effective, min(w, l) = 1: p_two = 2 * P(X <= 1) = 2 * 6/32
  CHECK(r.p_two_sided == doctest::Approx(2.0 * 6.0 / 32.0).epsilon(1e-12));
  CHECK(r.p_one_sided == doctest::Approx(binom_cdf_ge(5, 4)).epsilon(1e-12));

  PairedResult sw = paired_compare(b, a);
  CHECK(sw.wins == r.losses);
  CHECK(sw.losses == r.wins);
  CHECK(sw.ties == r.ties);
  CHECK(sw.p_two_sided == doctest::Approx(r.p_two_sided).epsilon(1e-12));

  PairedResult self = paired_compare(a, a);
  CHECK(self.wins == 0);
  CHECK(self.losses == 0);
  CHECK(self.ties == 6);
  CHECK(self.p_two_sided == doctest::Approx(1.0));
  CHECK(self.p_one_sided == doctest::Approx(1.0));
}

TEST_CASE("a clean 20-0 sweep gives p_two = 2 * 2^-20") {
  EvalTable a, b;
  for (int id = 0; id < 20; ++id) {
    a.rows.push_back({id, 0, "all", "combined", 1.0 + id});
    b.rows.push_back({id, 0, "all", "combined", 0.5 + id});
  }
  PairedResult r = paired_compare(a, b);
  CHECK(r.wins == 20);
  CHECK(std::abs(r.p_two_sided - 2.0 * std::ldexp(1.0, -20)) < 1e-9);
  CHECK(std::abs(r.p_one_sided - std::ldexp(1.0, -20)) < 1e-9);
}

TEST_CASE("paired_compare requires identical id sets") {
  EvalTable a, b;
  a.rows.push_back({0, 0, "all", "combined", 1.0});
  b.rows.push_back({1, 0, "all", "combined", 1.0});
  CHECK_THROWS_AS(paired_compare(a, b), ValidationError);
}

TEST_CASE("elo_expected hand values") {
  CHECK(elo_expected(1200.0, 800.0) == doctest::Approx(0.9091).epsilon(1e-3));
  CHECK(elo_expected(800.0, 800.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(elo_expected(800.0, 1200.0) + elo_expected(1200.0, 800.0) ==
        doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("elo_update hand values and conservation") {
  EloState s;
  s.ratings["a"] = 800.0;
  s.ratings["b"] = 800.0;
  elo_update(s, "a", "b");
  CHECK(s.ratings["a"] == doctest::Approx(816.0).epsilon(1e-12));
  CHECK(s.ratings["b"] == doctest::Approx(784.0).epsilon(1e-12));

  EloState g;
  g.ratings["w"] = 1200.0;
  g.ratings["l"] = 800.0;
  elo_update(g, "w", "l");
  CHECK(g.ratings["w"] - 1200.0 == doctest::Approx(32.0 * (1.0 - 0.9091)).epsilon(1e-3));

  Rng rng(13);
  EloState t;
  t.ratings["a"] = 800.0;
  t.ratings["b"] = 800.0;
  t.ratings["c"] = 800.0;
  const char* ids[] = {"a", "b", "c"};
  for (int i = 0; i < 1000; ++i) {
    int x = static_cast<int>(rng.below(3));
    int y = static_cast<int>(rng.below(2));
    const char* w = ids[x];
    const char* l = ids[(x + 1 + y) % 3];
    elo_update(t, w, l);
  }
  double sum = t.ratings["a"] + t.ratings["b"] + t.ratings["c"];
  CHECK(sum == doctest::Approx(2400.0).epsilon(1e-9));

  CHECK_THROWS_AS(elo_update(t, "a", "zz"), ValidationError);
}

TEST_CASE("elo_tournament plays votes in order from the CSV") {
  std::string csv = "model_a,model_b,winner\npre,post,post\npre,post,post\npre,post,pre\n";
  auto votes = parse_votes_csv(csv);
  REQUIRE(votes.size() == 3);
  EloState s = elo_tournament(votes, 32.0, 800.0);
  CHECK(s.ratings.at("post") > s.ratings.at("pre"));
  CHECK(s.ratings.at("post") + s.ratings.at("pre") == doctest::Approx(1600.0).epsilon(1e-9));

  std::string out = ratings_csv(s);
  CHECK(out.rfind("model,rating\n", 0) == 0);

  auto bad = parse_votes_csv("model_a,model_b,winner\nx,y,z\n");
  CHECK_THROWS_AS(elo_tournament(bad, 32.0, 800.0), ValidationError);
  CHECK_THROWS_AS(parse_votes_csv("a,b\n"), ValidationError);
}
