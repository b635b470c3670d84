#ifndef W2A_CHUNKWORLD_WORLD_H_
#define W2A_CHUNKWORLD_WORLD_H_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2a/numerics/rng.h"
#include "w2a/numerics/tensor.h"
#include "w2a/skillseg/trace.h"

// ChunkWorld: a kinematic 2D gripper/object world. All geometric constants
// are collected in EpisodeSpec and the k* constants below.
namespace w2a::chunkworld {

inline constexpr double kOpenWidth = 0.08;    // W_OPEN, world metres
inline constexpr double kMaxMove = 0.05;      // |dgx|, |dgy| bound per step
inline constexpr double kMaxGrip = 0.02;      // |dw| bound per step
inline constexpr int kActionDim = 3;
inline constexpr int kTaskCount = 4;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};
double Distance(Vec2 a, Vec2 b);

enum class TaskKind { kReach = 0, kPick = 1, kPlace = 2, kPickAndPlace = 3 };
std::string_view TaskName(TaskKind task);
std::optional<TaskKind> ParseTask(std::string_view name);
inline constexpr std::array<TaskKind, kTaskCount> kAllTasks = {
    TaskKind::kReach, TaskKind::kPick, TaskKind::kPlace, TaskKind::kPickAndPlace};

struct EpisodeSpec {
  int chunk_count = 12;  // T
  int chunk_size = 4;    // M
  double grasp_radius = 0.03;
  double goal_radius = 0.05;
  double grasp_aperture_threshold = 0.04;
  Vec2 gripper_start{0.5, 0.5};
  int horizon() const { return chunk_count * chunk_size; }
};

struct SimState {
  Vec2 gripper;
  double aperture = kOpenWidth;
  Vec2 object;
  bool attached = false;
  int step_index = 0;
  friend bool operator==(const SimState&, const SimState&) = default;
};

struct Instruction {
  TaskKind task = TaskKind::kReach;
  Vec2 object_start;
  Vec2 goal;
  // one-hot(task, 4) ++ object_start ++ goal
  std::array<double, 8> Encoded() const;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

// dgx, dgy, dw. Bounds are enforced by clipping inside Step().
using ActionVec = std::array<double, kActionDim>;
ActionVec ClipAction(const ActionVec& a);
// Per-dimension bound, used to normalize actions to [-1, 1].
inline constexpr ActionVec kActionBounds = {kMaxMove, kMaxMove, kMaxGrip};

SimState Step(const SimState& s, const ActionVec& a, const EpisodeSpec& spec = {});
bool Success(const SimState& s, const Instruction& instruction, const EpisodeSpec& spec = {});

SimState InitialState(const Instruction& instruction, const EpisodeSpec& spec = {});
// Object and goal inside [0.15, 0.85]^2 with object-goal distance in
// [0.2, 0.55]; every sampled instruction is solvable within the horizon.
Instruction SampleInstruction(TaskKind task, Rng& rng);
// Raises PlannerError when the scripted expert cannot finish in time.
void CheckSolvable(const Instruction& instruction, const EpisodeSpec& spec = {});

// Scripted proportional expert. Phases: approach the object open, close to
// grasp, carry to the goal closed, open to release, retreat, then park with
// the gripper closed. Reach keeps the gripper open throughout.
ActionVec ExpertAction(const SimState& s, const Instruction& instruction, const EpisodeSpec& spec = {});

struct Demonstration {
  Instruction instruction;
  std::vector<SimState> states;    // horizon + 1
  std::vector<ActionVec> actions;  // horizon, as executed (jitter included, clipped)
  skillseg::GripperTrace trace;    // horizon + 1 widths
};

// Exactly spec.horizon() steps. Gaussian jitter of `jitter_sigma` per action
// component is drawn from `rng`; with sigma 0 the rng is not touched.
Demonstration ExpertRollout(const Instruction& instruction, const EpisodeSpec& spec, Rng& rng,
                            double jitter_sigma = 0.0);

// Same rollout starting from an arbitrary state.
Demonstration ExpertRolloutFrom(const SimState& start, const Instruction& instruction,
                                const EpisodeSpec& spec, int steps, Rng& rng,
                                double jitter_sigma = 0.0);

}  // namespace w2a::chunkworld

#endif  // W2A_CHUNKWORLD_WORLD_H_
