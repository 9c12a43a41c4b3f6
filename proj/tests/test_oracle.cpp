// Cross-checks for the analytic verifiers themselves: world validation,
// posterior decompositions, the grid minimizer, and the suite report format.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "pixelworld/oracle.hpp"
#include "pixelworld/util.hpp"

using namespace pw;

TEST_CASE("validate_world enforces the prior simplex and reward range") {
  CHECK_NOTHROW(validate_world(two_point_world()));
  CHECK_NOTHROW(validate_world(five_point_world()));

  DiscreteWorld bad_prior{{0.0, 1.0}, {0.6, 0.6}, {0.5, 0.5}};
  CHECK_THROWS_AS(validate_world(bad_prior), ValidationError);
  DiscreteWorld neg_prior{{0.0, 1.0}, {1.5, -0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(validate_world(neg_prior), ValidationError);
  DiscreteWorld bad_reward{{0.0, 1.0}, {0.5, 0.5}, {0.5, 1.5}};
  CHECK_THROWS_AS(validate_world(bad_reward), ValidationError);
  DiscreteWorld mismatched{{0.0, 1.0, 2.0}, {0.5, 0.5}, {0.5, 0.5}};
  CHECK_THROWS_AS(validate_world(mismatched), ValidationError);
}

TEST_CASE("partition_function hand values") {
  CHECK(partition_function(two_point_world()) == doctest::Approx(0.5).epsilon(1e-12));
  // 0.15*0.46 + 0.3*0.54 + 0.2*0.49 + 0.25*0.52 + 0.1*0.45
  CHECK(partition_function(five_point_world()) == doctest::Approx(0.504).epsilon(1e-12));
}

TEST_CASE("random_world draws valid worlds of the requested size") {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    int n = 2 + static_cast<int>(rng.below(7));
    DiscreteWorld w = random_world(n, rng);
    CHECK_NOTHROW(validate_world(w));
    REQUIRE(static_cast<int>(w.points.size()) == n);
    for (double r : w.reward) {
      CHECK(r >= 0.05);
      CHECK(r <= 0.95);
    }
    double z = partition_function(w);
    CHECK(z > 0.0);
    CHECK(z < 1.0);
  }
}

TEST_CASE("decompose yields normalized posteriors and consistent means") {
  DiscreteWorld w = five_point_world();
  for (double sigma : {0.3, 1.0, 2.5}) {
    for (double x : {-1.5, 0.0, 0.8}) {
      PosteriorDecomposition d = decompose(w, x, sigma);
      double s_old = 0.0, s_plus = 0.0, s_minus = 0.0;
      double mu_old = 0.0, mu_plus = 0.0, mu_minus = 0.0;
      for (size_t i = 0; i < w.points.size(); ++i) {
        s_old += d.post_old[i];
        s_plus += d.post_plus[i];
        s_minus += d.post_minus[i];
        mu_old += d.post_old[i] * w.points[i];
        mu_plus += d.post_plus[i] * w.points[i];
        mu_minus += d.post_minus[i] * w.points[i];
      }
      CHECK(s_old == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s_plus == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(s_minus == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(d.mu_old == doctest::Approx(mu_old).epsilon(1e-12));
      CHECK(d.mu_plus == doctest::Approx(mu_plus).epsilon(1e-12));
      CHECK(d.mu_minus == doctest::Approx(mu_minus).epsilon(1e-12));
      CHECK(d.delta == doctest::Approx(d.alpha * (d.mu_plus - d.mu_old)).epsilon(1e-12));
      CHECK(d.alpha > 0.0);
    }
  }
}

TEST_CASE("the posterior mean mixture identity holds pointwise") {
  // mu_old = Z' mu_plus + (1 - Z') mu_minus with Z' the posterior-reward mass,
  // equivalently delta = alpha (mu_plus - mu_old) = (1 - alpha') ... exercised
  // here as: mu_old lies between mu_minus and mu_plus whenever rewards are not
  // constant, and the mixture of branch posteriors reconstructs the reference.
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    DiscreteWorld w = random_world(2 + static_cast<int>(rng.below(6)), rng);
    double sigma = rng.uniform(0.2, 3.0);
    double x = rng.uniform(-2.0, 2.0);
    PosteriorDecomposition d = decompose(w, x, sigma);

    // alpha-weighted mixture of the plus/minus posteriors equals the reference
    for (size_t i = 0; i < w.points.size(); ++i) {
      double mix = d.alpha * d.post_plus[i] + (1.0 - d.alpha) * d.post_minus[i];
      CHECK(mix == doctest::Approx(d.post_old[i]).epsilon(1e-10));
    }
    double mu_mix = d.alpha * d.mu_plus + (1.0 - d.alpha) * d.mu_minus;
    CHECK(mu_mix == doctest::Approx(d.mu_old).epsilon(1e-10));
  }
}

TEST_CASE("decompose rejects degenerate partition functions") {
  DiscreteWorld all_reward{{-1.0, 1.0}, {0.5, 0.5}, {1.0, 1.0}};  // Z = 1
  CHECK_THROWS_AS(decompose(all_reward, 0.0, 1.0), ValidationError);
  DiscreteWorld no_reward{{-1.0, 1.0}, {0.5, 0.5}, {0.0, 0.0}};  // Z = 0
  CHECK_THROWS_AS(decompose(no_reward, 0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(decompose(two_point_world(), 0.0, 0.0), ValidationError);
}

TEST_CASE("optimal_prediction matches its defining formula") {
  DiscreteWorld w = two_point_world();
  for (double beta : {0.05, 0.5, 2.0}) {
    for (double x : {-0.7, 0.3}) {
      PosteriorDecomposition d = decompose(w, x, 1.0);
      CHECK(optimal_prediction(w, beta, x, 1.0) ==
            doctest::Approx(d.mu_old + (2.0 / beta) * d.delta).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(optimal_prediction(w, 0.0, 0.0, 1.0), ValidationError);
}

TEST_CASE("linspace endpoints and spacing") {
  auto g = linspace(-3.0, 3.0, 201);
  REQUIRE(g.size() == 201);
  CHECK(g.front() == doctest::Approx(-3.0));
  CHECK(g.back() == doctest::Approx(3.0));
  CHECK(g[1] - g[0] == doctest::Approx(0.03).epsilon(1e-9));
  CHECK_THROWS_AS(linspace(2.0, 5.0, 1), ValidationError);
}

TEST_CASE("grid minimizer tracks the analytic optimum on a coarse sweep") {
  DiscreteWorld w = two_point_world();
  const double beta = 0.5, sigma = 1.0;
  auto xs = linspace(-2.0, 2.0, 9);
  auto preds = linspace(-3.0, 3.0, 201);
  auto mins = grid_minimize_loss(w, beta, sigma, xs, preds);
  REQUIRE(mins.size() == xs.size());
  const double cell = preds[1] - preds[0];
  for (size_t i = 0; i < xs.size(); ++i) {
    double target = optimal_prediction(w, beta, xs[i], sigma);
    CHECK(std::abs(mins[i] - target) <= 2.0 * cell + 1e-9);
  }
}

TEST_CASE("finite_diff_check flags wrong gradients and accepts right ones") {
  ModelConfig mc;
  mc.H = 1;
  mc.L = 1;
  mc.V = 3;
  mc.C = 3;
  mc.img = 8;
  mc.hidden = 4;
  DenoiserParams p = init_params(mc, 5);
  Rng rng(6);
  for (auto& a : p.arrays)
    for (auto& w : a.w) w += 0.1 * rng.normal();

  // quadratic loss 0.5 * sum w^2 has gradient w
  auto loss_fn = [](const DenoiserParams& q) {
    double s = 0.0;
    for (const auto& a : q.arrays)
      for (double w : a.w) s += 0.5 * w * w;
    return s;
  };
  Gradients right = alloc_gradients(p);
  for (size_t a = 0; a < p.arrays.size(); ++a)
    for (size_t i = 0; i < p.arrays[a].w.size(); ++i) right[a][i] = p.arrays[a].w[i];
  CHECK(finite_diff_check(loss_fn, p, right, 1e-4, 40, 7) < 1e-8);

  Gradients wrong = right;
  for (auto& arr : wrong)
    for (auto& x : arr) x *= 2.0;
  CHECK(finite_diff_check(loss_fn, p, wrong, 1e-4, 40, 7) > 0.1);
}

TEST_CASE("the full oracle suite passes and reports in CSV form") {
  OracleReport rep = run_oracle_suite(123, 2);
  CHECK(rep.all_pass());
  CHECK(rep.rows.size() > 100);

  std::string csv = rep.to_csv();
  CHECK(csv.rfind("check,world_seed,max_error,pass\n", 0) == 0);
  size_t lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == rep.rows.size() + 1);

  // deterministic across thread counts
  OracleReport rep1 = run_oracle_suite(123, 1);
  CHECK(rep1.to_csv() == csv);
}
