// Arm kinematics, grip/carry dynamics, rendering masks, dataset round-trips,
// and bit-exact replay of recorded episodes.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "pixelworld/world.hpp"

using namespace pw;

namespace {

std::string file_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

bool states_equal(const SceneState& a, const SceneState& b) {
  if (a.q1 != b.q1 || a.q2 != b.q2 || a.grip_closed != b.grip_closed) return false;
  if (a.objects.size() != b.objects.size()) return false;
  for (size_t i = 0; i < a.objects.size(); ++i) {
    const auto& x = a.objects[i];
    const auto& y = b.objects[i];
    if (x.x != y.x || x.y != y.y || x.theta != y.theta || x.shape != y.shape) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("forward kinematics at axis-aligned joint angles") {
  SceneState s;
  s.objects.clear();

  s.q1 = 0.0;
  s.q2 = 0.0;
  auto p = eef_position(s);
  CHECK(p[0] == doctest::Approx(0.5 + 0.26 + 0.22).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.08).epsilon(1e-12));
  CHECK(eef_orientation(s) == doctest::Approx(0.0));

  s.q1 = M_PI / 2.0;
  p = eef_position(s);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.08 + 0.48).epsilon(1e-12));

  s.q2 = M_PI;  // folded back onto the first link
  p = eef_position(s);
  CHECK(p[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(p[1] == doctest::Approx(0.08 + 0.26 - 0.22).epsilon(1e-9));
}

TEST_CASE("eef_pose layout is [x, y, theta, grip, 0, 0, 0]") {
  SceneState s;
  s.q1 = 0.9;
  s.q2 = -0.4;
  s.grip_closed = true;
  auto pose = eef_pose(s);
  auto p = eef_position(s);
  CHECK(pose[0] == p[0]);
  CHECK(pose[1] == p[1]);
  CHECK(pose[2] == eef_orientation(s));
  CHECK(pose[3] == 1.0);
  CHECK(pose[4] == 0.0);
  CHECK(pose[5] == 0.0);
  CHECK(pose[6] == 0.0);
  s.grip_closed = false;
  CHECK(eef_pose(s)[3] == 0.0);
}

TEST_CASE("orientation wraps to (-pi, pi]") {
  SceneState s;
  s.q1 = 3.0;
  s.q2 = 3.0;
  double th = eef_orientation(s);
  CHECK(th > -M_PI);
  CHECK(th <= M_PI);
  CHECK(th == doctest::Approx(6.0 - 2.0 * M_PI).epsilon(1e-12));
}

TEST_CASE("step_dynamics moves the EEF toward the delta target") {
  SceneState s;
  s.objects.clear();
  auto before = eef_position(s);
  Action a{-0.05, -0.03, 0.0, 0.0, 0.0, 0.0, 0.0};  // inward: stays inside the reach annulus
  SceneState n = step_dynamics(s, a);
  auto after = eef_position(n);
  CHECK(after[0] == doctest::Approx(before[0] - 0.05).epsilon(1e-6));
  CHECK(after[1] == doctest::Approx(before[1] - 0.03).epsilon(1e-6));
}

TEST_CASE("step_dynamics clamps per-step deltas") {
  SceneState s;
  s.objects.clear();
  auto before = eef_position(s);
  Action a{10.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  SceneState n = step_dynamics(s, a);
  auto after = eef_position(n);
  double moved = std::hypot(after[0] - before[0], after[1] - before[1]);
  CHECK(moved <= 0.12 + 1e-9);
}

TEST_CASE("grip command uses a dead zone around zero") {
  SceneState s;
  s.objects.clear();
  s.grip_closed = false;
  Action hold{0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK_FALSE(step_dynamics(s, hold).grip_closed);
  Action close = hold;
  close[3] = 1.0;
  SceneState c = step_dynamics(s, close);
  CHECK(c.grip_closed);
  CHECK(step_dynamics(c, hold).grip_closed);  // 0 keeps the current grip
  Action open = hold;
  open[3] = -1.0;
  CHECK_FALSE(step_dynamics(c, open).grip_closed);
}

TEST_CASE("a closed grip carries the nearby object rigidly") {
  SceneState s;
  s.objects.assign(1, SceneObject{});
  auto eef = eef_position(s);
  s.objects[0].x = eef[0] + 0.01;
  s.objects[0].y = eef[1];
  s.grip_closed = true;

  Action a{0.04, -0.02, 0.1, 1.0, 0.0, 0.0, 0.0};
  SceneState n = step_dynamics(s, a);
  auto neweef = eef_position(n);
  CHECK(n.objects[0].x == doctest::Approx(s.objects[0].x + (neweef[0] - eef[0])).epsilon(1e-9));
  CHECK(n.objects[0].y == doctest::Approx(s.objects[0].y + (neweef[1] - eef[1])).epsilon(1e-9));

  // far object is not carried
  SceneState far = s;
  far.objects[0].x = 0.05;
  far.objects[0].y = 0.9;
  SceneState nf = step_dynamics(far, a);
  CHECK(nf.objects[0].x == far.objects[0].x);
  CHECK(nf.objects[0].y == far.objects[0].y);
}

TEST_CASE("render_views produces bounded frames and disjoint masks") {
  WorldConfig wc{16, 2};
  Rng rng(4);
  SceneState s = random_initial_state(wc, rng);
  ViewSet vs = render_views(s, wc);

  REQUIRE(vs.V == 3);
  REQUIRE(static_cast<int64_t>(vs.frames.size()) == int64_t{3} * 3 * 16 * 16);
  REQUIRE(vs.object_mask.size() == size_t{3} * 16 * 16);
  REQUIRE(vs.robot_mask.size() == vs.object_mask.size());

  for (double v : vs.frames) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  int om = 0, rm = 0;
  for (size_t i = 0; i < vs.object_mask.size(); ++i) {
    CHECK(vs.object_mask[i] * vs.robot_mask[i] == 0);
    om += vs.object_mask[i];
    rm += vs.robot_mask[i];
  }
  CHECK(om > 0);
  CHECK(rm > 0);

  ViewSet again = render_views(s, wc);
  CHECK(again.frames == vs.frames);
  CHECK(again.object_mask == vs.object_mask);
  CHECK(again.robot_mask == vs.robot_mask);
}

TEST_CASE("quantization rounds every field through f32 and is idempotent") {
  auto f32 = [](double v) { return static_cast<double>(static_cast<float>(v)); };

  SceneState s;
  s.q1 = 1.0 / 3.0;
  s.q2 = -0.7231;
  for (int i = 0; i < 6; ++i)
    s.objects.push_back(SceneObject{0.123456789 + i, 0.987654321 + i, 0.5555555555 + i, Shape::Bar});
  SceneState q = quantize_state(s);
  CHECK(q.q1 == f32(s.q1));
  CHECK(q.q2 == f32(s.q2));
  for (int i = 0; i < 6; ++i) {
    CHECK(q.objects[i].x == f32(s.objects[i].x));
    CHECK(q.objects[i].y == f32(s.objects[i].y));
    CHECK(q.objects[i].theta == f32(s.objects[i].theta));
  }
  CHECK(states_equal(quantize_state(q), q));

  Action a{0.1, 0.2, 0.3, 1.0, 0.7231, 1e-7, 0.987654321};
  Action qa = quantize_action(a);
  for (int i = 0; i < 7; ++i) CHECK(qa[i] == f32(a[i]));
  CHECK(quantize_action(qa) == qa);
}

TEST_CASE("generate_episodes shapes, determinism, and thread invariance") {
  WorldConfig wc{16, 2};
  auto eps1 = generate_episodes(wc, 4, 6, 99, 1);
  auto eps2 = generate_episodes(wc, 4, 6, 99, 3);
  auto eps3 = generate_episodes(wc, 4, 6, 100, 1);

  REQUIRE(eps1.size() == 4);
  for (const auto& ep : eps1) {
    CHECK(ep.T() == 6);
    CHECK(ep.states.size() == 7);
    CHECK(ep.views.size() == 7);
  }
  for (size_t e = 0; e < eps1.size(); ++e) {
    CHECK(states_equal(eps1[e].states.back(), eps2[e].states.back()));
    CHECK(eps1[e].views.back().frames == eps2[e].views.back().frames);
    CHECK(eps1[e].actions == eps2[e].actions);
  }
  CHECK_FALSE(states_equal(eps1[0].states.back(), eps3[0].states.back()));
}

TEST_CASE("recorded episodes replay bit-exactly through step_recorded") {
  WorldConfig wc{16, 2};
  auto eps = generate_episodes(wc, 3, 8, 7, 1);
  for (const auto& ep : eps) {
    for (int t = 0; t < ep.T(); ++t) {
      SceneState next = step_recorded(ep.states[t], ep.actions[t]);
      REQUIRE(states_equal(next, ep.states[t + 1]));
    }
  }
}

TEST_CASE("dataset round-trip preserves content and re-saves byte-identically") {
  WorldConfig wc{16, 2};
  auto eps = generate_episodes(wc, 3, 5, 13, 2);
  std::string p1 = "ds_test_1.pwds";
  std::string p2 = "ds_test_2.pwds";
  save_dataset(eps, p1);
  auto back = load_dataset(p1);

  REQUIRE(back.size() == eps.size());
  for (size_t e = 0; e < eps.size(); ++e) {
    REQUIRE(back[e].T() == eps[e].T());
    for (int t = 0; t <= eps[e].T(); ++t) {
      REQUIRE(states_equal(back[e].states[t], eps[e].states[t]));
      CHECK(back[e].views[t].object_mask == eps[e].views[t].object_mask);
      CHECK(back[e].views[t].robot_mask == eps[e].views[t].robot_mask);
      REQUIRE(back[e].views[t].frames.size() == eps[e].views[t].frames.size());
      for (size_t i = 0; i < back[e].views[t].frames.size(); ++i) {
        // frames live at f32 precision on disk
        double expect = static_cast<double>(static_cast<float>(eps[e].views[t].frames[i]));
        REQUIRE(back[e].views[t].frames[i] == expect);
      }
    }
    CHECK(back[e].actions == eps[e].actions);
  }

  save_dataset(back, p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("stored frames equal re-renders of stored states at f32 precision") {
  WorldConfig wc{16, 1};
  auto eps = generate_episodes(wc, 2, 4, 31, 1);
  std::string path = "ds_test_rr.pwds";
  save_dataset(eps, path);
  auto back = load_dataset(path);
  std::remove(path.c_str());

  for (const auto& ep : back) {
    for (size_t t = 0; t < ep.states.size(); ++t) {
      ViewSet re = render_views(ep.states[t], wc);
      REQUIRE(re.frames.size() == ep.views[t].frames.size());
      for (size_t i = 0; i < re.frames.size(); ++i)
        REQUIRE(static_cast<double>(static_cast<float>(re.frames[i])) == ep.views[t].frames[i]);
      REQUIRE(re.object_mask == ep.views[t].object_mask);
      REQUIRE(re.robot_mask == ep.views[t].robot_mask);
    }
  }
}

TEST_CASE("load_dataset rejects foreign files") {
  std::string path = "ds_test_bad.pwds";
  std::ofstream f(path, std::ios::binary);
  f << "NOTADATASET";
  f.close();
  CHECK_THROWS(load_dataset(path));
  std::remove(path.c_str());
}
