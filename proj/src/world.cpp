#include "pixelworld/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "pixelworld/util.hpp"

namespace pw {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kBaseX = 0.5, kBaseY = 0.08;
constexpr double kL1 = 0.26, kL2 = 0.22;
constexpr double kGraspRadius = 0.07;
constexpr double kMaxDelta = 0.12, kMaxDTheta = 0.3;
constexpr double kReachMin = 0.06, kReachMax = 0.46;
constexpr double kDiscR = 0.060, kSquareHalf = 0.055, kBarHx = 0.085, kBarHy = 0.030;
constexpr double kLinkHalf = 0.020, kGripHalf = 0.028;

double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w <= 0.0) w += 2.0 * kPi;
  return w - kPi;
}

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

struct Vec2 {
  double x, y;
};

Vec2 rotate(Vec2 v, double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  const double vx = b.x - a.x, vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p.x - a.x) * vx + (p.y - a.y) * vy) / len2 : 0.0;
  t = clamp(t, 0.0, 1.0);
  const double dx = p.x - (a.x + t * vx), dy = p.y - (a.y + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

Vec2 elbow_position(const SceneState& s) {
  return {kBaseX + kL1 * std::cos(s.q1), kBaseY + kL1 * std::sin(s.q1)};
}

bool object_covers(const SceneObject& o, Vec2 p) {
  const Vec2 d{p.x - o.x, p.y - o.y};
  switch (o.shape) {
    case Shape::Disc:
      return d.x * d.x + d.y * d.y <= kDiscR * kDiscR;
    case Shape::Square: {
      const Vec2 r = rotate(d, -o.theta);
      return std::max(std::abs(r.x), std::abs(r.y)) <= kSquareHalf;
    }
    case Shape::Bar: {
      const Vec2 r = rotate(d, -o.theta);
      return std::abs(r.x) <= kBarHx && std::abs(r.y) <= kBarHy;
    }
  }
  return false;
}

struct SceneGeom {
  Vec2 base, elbow, eef;
  double orient;
};

bool robot_covers(const SceneGeom& g, bool grip_closed, Vec2 p, std::array<double, 3>& rgb) {
  const Vec2 gd = rotate({p.x - g.eef.x, p.y - g.eef.y}, -g.orient);
  if (std::max(std::abs(gd.x), std::abs(gd.y)) <= kGripHalf) {
    rgb = grip_closed ? std::array<double, 3>{0.95, 0.35, 0.10}
                      : std::array<double, 3>{0.90, 0.60, 0.15};
    return true;
  }
  if (dist_point_segment(p, g.elbow, g.eef) <= kLinkHalf ||
      dist_point_segment(p, g.base, g.elbow) <= kLinkHalf) {
    rgb = {0.45, 0.47, 0.52};
    return true;
  }
  return false;
}

std::array<double, 3> object_color(Shape s) {
  switch (s) {
    case Shape::Disc: return {0.85, 0.25, 0.20};
    case Shape::Square: return {0.20, 0.75, 0.30};
    case Shape::Bar: return {0.95, 0.80, 0.25};
  }
  return {1, 0, 1};
}

std::array<double, 3> background_color(Vec2 p) {
  const double y = clamp(p.y, 0.0, 1.0), x = clamp(p.x, 0.0, 1.0);
  return {0.15 + 0.06 * y + 0.02 * x, 0.16 + 0.05 * y, 0.22 + 0.10 * y};
}

// pixel center of (row, col) in view coordinates -> scene point, per view
Vec2 view_to_scene(int view, Vec2 vp, const SceneGeom& g) {
  switch (view) {
    case 0:
      return vp;
    case 1: {
      constexpr double phi = -0.6, scale = 1.15;
      Vec2 q{(vp.x - 0.5) / scale, (vp.y - 0.5) / scale};
      q = rotate(q, -phi);
      return {q.x + 0.5, q.y + 0.5};
    }
    default: {  // wrist: EEF-centered, arm-aligned, zoomed
      constexpr double zoom = 2.2;
      Vec2 q{(vp.x - 0.5) / zoom, (vp.y - 0.5) / zoom};
      q = rotate(q, g.orient);
      return {q.x + g.eef.x, q.y + g.eef.y};
    }
  }
}

}  // namespace

std::array<double, 2> eef_position(const SceneState& s) {
  return {kBaseX + kL1 * std::cos(s.q1) + kL2 * std::cos(s.q1 + s.q2),
          kBaseY + kL1 * std::sin(s.q1) + kL2 * std::sin(s.q1 + s.q2)};
}

double eef_orientation(const SceneState& s) { return wrap_angle(s.q1 + s.q2); }

std::array<double, 7> eef_pose(const SceneState& s) {
  const auto p = eef_position(s);
  return {p[0], p[1], eef_orientation(s), s.grip_closed ? 1.0 : 0.0, 0.0, 0.0, 0.0};
}

SceneState step_dynamics(const SceneState& s, const Action& a) {
  SceneState n = s;
  const double dx = clamp(a[0], -kMaxDelta, kMaxDelta);
  const double dy = clamp(a[1], -kMaxDelta, kMaxDelta);
  const double dth = clamp(a[2], -kMaxDTheta, kMaxDTheta);
  if (a[3] > 0.5) n.grip_closed = true;
  else if (a[3] < -0.5) n.grip_closed = false;

  const auto old = eef_position(s);

  int attached = -1;
  if (n.grip_closed) {
    double best = kGraspRadius;
    for (size_t i = 0; i < n.objects.size(); ++i) {
      const double ox = n.objects[i].x - old[0], oy = n.objects[i].y - old[1];
      const double d = std::sqrt(ox * ox + oy * oy);
      if (d <= best) {
        best = d;
        attached = static_cast<int>(i);
      }
    }
  }

  // clamp the EEF target to the scene and to the reachable annulus, then IK
  double tx = clamp(old[0] + dx, 0.03, 0.97);
  double ty = clamp(old[1] + dy, 0.03, 0.97);
  double vx = tx - kBaseX, vy = ty - kBaseY;
  double r = std::sqrt(vx * vx + vy * vy);
  if (r < 1e-12) {
    vx = kReachMin;
    vy = 0.0;
    r = kReachMin;
  }
  const double rc = clamp(r, kReachMin, kReachMax);
  vx *= rc / r;
  vy *= rc / r;
  const double c2 = (rc * rc - kL1 * kL1 - kL2 * kL2) / (2.0 * kL1 * kL2);
  const double q2 = std::acos(clamp(c2, -1.0, 1.0));  // elbow-up branch
  const double q1 = std::atan2(vy, vx) - std::atan2(kL2 * std::sin(q2), kL1 + kL2 * std::cos(q2));
  n.q1 = wrap_angle(q1);
  n.q2 = wrap_angle(q2);

  if (attached >= 0) {
    const auto neweef = eef_position(n);
    auto& o = n.objects[attached];
    o.x = clamp(o.x + (neweef[0] - old[0]), 0.05, 0.95);
    o.y = clamp(o.y + (neweef[1] - old[1]), 0.05, 0.95);
    o.theta = wrap_angle(o.theta + dth);
  }
  return n;
}

SceneState quantize_state(SceneState s) {
  s.q1 = f32_round(s.q1);
  s.q2 = f32_round(s.q2);
  for (auto& o : s.objects) {
    o.x = f32_round(o.x);
    o.y = f32_round(o.y);
    o.theta = f32_round(o.theta);
  }
  return s;
}

Action quantize_action(Action a) {
  for (auto& v : a) v = f32_round(v);
  return a;
}

SceneState step_recorded(const SceneState& s, const Action& a) {
  return quantize_state(step_dynamics(s, a));
}

ViewSet render_views(const SceneState& s, const WorldConfig& wc) {
  const int n = wc.image;
  ViewSet out;
  out.V = 3;
  out.C = 3;
  out.H = n;
  out.W = n;
  out.frames.assign(int64_t{3} * 3 * n * n, 0.0);
  out.object_mask.assign(int64_t{3} * n * n, 0);
  out.robot_mask.assign(int64_t{3} * n * n, 0);

  SceneGeom g;
  g.base = {kBaseX, kBaseY};
  g.elbow = elbow_position(s);
  const auto e = eef_position(s);
  g.eef = {e[0], e[1]};
  g.orient = eef_orientation(s);

  const int64_t plane = int64_t{n} * n;
  for (int v = 0; v < 3; ++v) {
    double* fr = out.frames.data() + v * 3 * plane;
    uint8_t* om = out.object_mask.data() + v * plane;
    uint8_t* rm = out.robot_mask.data() + v * plane;
    for (int row = 0; row < n; ++row) {
      for (int col = 0; col < n; ++col) {
        const Vec2 vp{(col + 0.5) / n, 1.0 - (row + 0.5) / n};
        const Vec2 p = view_to_scene(v, vp, g);
        std::array<double, 3> rgb;
        const int64_t ix = int64_t{row} * n + col;
        if (robot_covers(g, s.grip_closed, p, rgb)) {
          rm[ix] = 1;
        } else {
          bool hit = false;
          for (auto it = s.objects.rbegin(); it != s.objects.rend(); ++it) {
            if (object_covers(*it, p)) {
              rgb = object_color(it->shape);
              om[ix] = 1;
              hit = true;
              break;
            }
          }
          if (!hit) rgb = background_color(p);
        }
        for (int c = 0; c < 3; ++c) fr[c * plane + ix] = rgb[c];
      }
    }
  }
  return out;
}

SceneState random_initial_state(const WorldConfig& wc, Rng& rng) {
  SceneState s;
  const double rr = rng.uniform(0.18, kReachMax - 0.02);
  const double ang = rng.uniform(0.2 * kPi, 0.8 * kPi);
  Action init{};
  init[0] = kBaseX + rr * std::cos(ang) - (kBaseX + kL1 * std::cos(s.q1) + kL2 * std::cos(s.q1 + s.q2));
  init[1] = kBaseY + rr * std::sin(ang) - (kBaseY + kL1 * std::sin(s.q1) + kL2 * std::sin(s.q1 + s.q2));
  // place the arm via one oversized IK move (clamps keep it legal)
  init[0] = clamp(init[0], -kMaxDelta, kMaxDelta) / 1.0;
  init[1] = clamp(init[1], -kMaxDelta, kMaxDelta) / 1.0;
  s = step_dynamics(s, init);

  for (int i = 0; i < wc.objects; ++i) {
    SceneObject o;
    for (int tries = 0; tries < 40; ++tries) {
      o.x = rng.uniform(0.18, 0.82);
      o.y = rng.uniform(0.25, 0.82);
      bool ok = true;
      for (const auto& other : s.objects) {
        const double dx = o.x - other.x, dy = o.y - other.y;
        if (dx * dx + dy * dy < 0.16 * 0.16) ok = false;
      }
      if (ok) break;
    }
    o.theta = rng.uniform(-kPi, kPi);
    o.shape = static_cast<Shape>(rng.below(3));
    s.objects.push_back(o);
  }
  return s;
}

Episode rollout_scripted(const WorldConfig& wc, int T, uint64_t seed) {
  Rng rng(seed);
  Episode ep;
  ep.states.push_back(quantize_state(random_initial_state(wc, rng)));
  ep.views.push_back(render_views(ep.states[0], wc));

  enum Mode { Approach, Grasp, Carry, Release };
  Mode mode = Approach;
  int target_obj = wc.objects > 0 ? static_cast<int>(rng.below(wc.objects)) : -1;
  Vec2 carry_to{0.5, 0.5};

  for (int t = 0; t < T; ++t) {
    const SceneState& s = ep.states.back();
    const auto e = eef_position(s);
    Action a{};
    auto move_toward = [&](Vec2 goal, double max_step) {
      double dx = goal.x - e[0], dy = goal.y - e[1];
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d > max_step) {
        dx *= max_step / d;
        dy *= max_step / d;
      }
      a[0] = dx + rng.uniform(-0.006, 0.006);
      a[1] = dy + rng.uniform(-0.006, 0.006);
    };

    if (target_obj < 0) {
      // no objects: wander between random reachable points
      move_toward({rng.uniform(0.25, 0.75), rng.uniform(0.2, 0.6)}, 0.06);
      a[3] = -1.0;
    } else {
      const auto& obj = s.objects[target_obj];
      switch (mode) {
        case Approach: {
          const double d = std::hypot(obj.x - e[0], obj.y - e[1]);
          if (d <= 0.02) {
            mode = Grasp;
            a[3] = 1.0;
          } else {
            move_toward({obj.x, obj.y}, 0.065);
            a[3] = -1.0;
          }
          break;
        }
        case Grasp: {
          a[3] = 1.0;
          const double rr = rng.uniform(0.20, kReachMax - 0.03);
          const double ang = rng.uniform(0.25 * kPi, 0.75 * kPi);
          carry_to = {kBaseX + rr * std::cos(ang), kBaseY + rr * std::sin(ang)};
          mode = Carry;
          break;
        }
        case Carry: {
          const double d = std::hypot(carry_to.x - e[0], carry_to.y - e[1]);
          if (d <= 0.025) {
            mode = Release;
            a[3] = -1.0;
          } else {
            move_toward(carry_to, 0.06);
            a[3] = 1.0;
            a[2] = rng.uniform(-0.08, 0.08);
          }
          break;
        }
        case Release: {
          a[3] = -1.0;
          move_toward({e[0] + rng.uniform(-0.05, 0.05), e[1] + rng.uniform(-0.05, 0.05)}, 0.05);
          target_obj = static_cast<int>(rng.below(wc.objects));
          mode = Approach;
          break;
        }
      }
    }

    a = quantize_action(a);
    ep.actions.push_back(a);
    ep.states.push_back(step_recorded(s, a));
    ep.views.push_back(render_views(ep.states.back(), wc));
  }
  return ep;
}

std::vector<Episode> generate_episodes(const WorldConfig& wc, int n_episodes, int T,
                                       uint64_t seed, int threads) {
  if (n_episodes < 1 || T < 1)
    throw ValidationError("generate_episodes: need n_episodes >= 1 and T >= 1");
  std::vector<Episode> eps(n_episodes);
  parallel_for(n_episodes, threads, [&](int64_t i) {
    eps[i] = rollout_scripted(wc, T, derive_seed(seed, 0xDA7A, static_cast<uint64_t>(i)));
  });
  return eps;
}

void save_dataset(const std::vector<Episode>& eps, const std::string& path) {
  BinWriter out(path);
  out.bytes("PWDS", 4);
  out.u32(1);
  out.u32(static_cast<uint32_t>(eps.size()));
  for (const auto& ep : eps) {
    const auto& v0 = ep.views.at(0);
    const uint32_t T = static_cast<uint32_t>(ep.T());
    const uint32_t nobj = static_cast<uint32_t>(ep.states.at(0).objects.size());
    out.u32(T);
    out.u32(static_cast<uint32_t>(v0.V));
    out.u32(static_cast<uint32_t>(v0.C));
    out.u32(static_cast<uint32_t>(v0.H));
    out.u32(static_cast<uint32_t>(v0.W));
    out.u32(nobj);
    for (const auto& vs : ep.views) out.f32v(vs.frames);
    for (const auto& vs : ep.views) out.u8v(vs.object_mask);
    for (const auto& vs : ep.views) out.u8v(vs.robot_mask);
    for (const auto& a : ep.actions) {
      std::vector<double> row(a.begin(), a.end());
      out.f32v(row);
    }
    for (const auto& st : ep.states) {
      std::vector<double> row{st.q1, st.q2, st.grip_closed ? 1.0 : 0.0};
      for (const auto& o : st.objects) {
        row.push_back(o.x);
        row.push_back(o.y);
        row.push_back(o.theta);
        row.push_back(static_cast<double>(o.shape));
      }
      out.f32v(row);
    }
  }
  out.close();
}

std::vector<Episode> load_dataset(const std::string& path) {
  BinReader in(path);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, "PWDS", 4) != 0)
    throw ValidationError("not a dataset file (bad magic): " + path);
  if (in.u32() != 1) throw ValidationError("unsupported dataset version in " + path);
  const uint32_t n = in.u32();
  if (n > 1000000) throw IoError("implausible episode count in " + path);
  std::vector<Episode> eps(n);
  for (auto& ep : eps) {
    const uint32_t T = in.u32(), V = in.u32(), C = in.u32(), H = in.u32(), W = in.u32();
    const uint32_t nobj = in.u32();
    if (V != 3 || C != 3 || H > 4096 || W > 4096 || T > 100000 || nobj > 64)
      throw IoError("implausible episode header in " + path);
    ep.views.resize(T + 1);
    for (auto& vs : ep.views) {
      vs.V = static_cast<int>(V);
      vs.C = static_cast<int>(C);
      vs.H = static_cast<int>(H);
      vs.W = static_cast<int>(W);
      in.f32v(vs.frames, size_t{V} * C * H * W);
    }
    for (auto& vs : ep.views) in.u8v(vs.object_mask, size_t{V} * H * W);
    for (auto& vs : ep.views) in.u8v(vs.robot_mask, size_t{V} * H * W);
    ep.actions.resize(T);
    for (auto& a : ep.actions) {
      std::vector<double> row;
      in.f32v(row, 7);
      std::copy(row.begin(), row.end(), a.begin());
    }
    ep.states.resize(T + 1);
    for (auto& st : ep.states) {
      std::vector<double> row;
      in.f32v(row, 3 + size_t{4} * nobj);
      st.q1 = row[0];
      st.q2 = row[1];
      st.grip_closed = row[2] > 0.5;
      st.objects.resize(nobj);
      for (uint32_t i = 0; i < nobj; ++i) {
        st.objects[i].x = row[3 + 4 * i];
        st.objects[i].y = row[4 + 4 * i];
        st.objects[i].theta = row[5 + 4 * i];
        st.objects[i].shape = static_cast<Shape>(static_cast<int>(row[6 + 4 * i]));
      }
    }
  }
  return eps;
}

}  // namespace pw
