#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pixelworld/config.hpp"
#include "pixelworld/rng.hpp"

namespace pw {

enum class Shape : uint8_t { Disc = 0, Square = 1, Bar = 2 };

struct SceneObject {
  double x = 0.5, y = 0.5, theta = 0.0;
  Shape shape = Shape::Disc;
};

// 2-link planar arm over a unit scene; gripper rigidly carries the nearest
// object while closed.
struct SceneState {
  double q1 = 1.2, q2 = 0.8;  // joint angles, wrapped to (-pi, pi]
  bool grip_closed = false;
  std::vector<SceneObject> objects;
};

// delta EEF pose target: [dx, dy, dtheta, grip, pad, pad, pad]
using Action = std::array<double, 7>;

struct ViewSet {
  int V = 3, C = 3, H = 32, W = 32;
  std::vector<double> frames;        // V*C*H*W in [0,1]
  std::vector<uint8_t> object_mask;  // V*H*W
  std::vector<uint8_t> robot_mask;   // V*H*W
  int64_t frame_numel() const { return int64_t{C} * H * W; }
  const double* view(int v) const { return frames.data() + v * frame_numel(); }
  double* view(int v) { return frames.data() + v * frame_numel(); }
};

struct Episode {
  std::vector<SceneState> states;  // T+1
  std::vector<Action> actions;     // T
  std::vector<ViewSet> views;      // T+1
  int T() const { return static_cast<int>(actions.size()); }
};

struct WorldConfig {
  int image = 32;
  int objects = 2;
  static WorldConfig from(const TrainConfig& c) { return WorldConfig{c.image, c.objects}; }
};

// forward kinematics; pose() is the 7-dim conditioning row
std::array<double, 2> eef_position(const SceneState& s);
double eef_orientation(const SceneState& s);
std::array<double, 7> eef_pose(const SceneState& s);

SceneState step_dynamics(const SceneState& s, const Action& a);
ViewSet render_views(const SceneState& s, const WorldConfig& wc);

// Recorded episodes live at the dataset precision (f32). Generation quantizes
// every state/action through f32 before rendering or storing, so replaying a
// stored episode through step_recorded reproduces it bit-exactly and stored
// frames equal re-renders of stored states.
SceneState quantize_state(SceneState s);
Action quantize_action(Action a);
SceneState step_recorded(const SceneState& s, const Action& a);

SceneState random_initial_state(const WorldConfig& wc, Rng& rng);
Episode rollout_scripted(const WorldConfig& wc, int T, uint64_t seed);

std::vector<Episode> generate_episodes(const WorldConfig& wc, int n_episodes, int T,
                                       uint64_t seed, int threads);

// Dataset format PWDS v1.
void save_dataset(const std::vector<Episode>& eps, const std::string& path);
std::vector<Episode> load_dataset(const std::string& path);

}  // namespace pw
