#include "w2a/chunkworld/world.h"

#include <algorithm>
#include <cmath>

#include "w2a/numerics/errors.h"

namespace w2a::chunkworld {
namespace {

// Expert tolerances.
constexpr double kGraspAlign = 0.015;   // close once this near the object
constexpr double kReleaseAlign = 0.01;  // open once this near the goal
constexpr double kRetreatDistance = 0.11;
constexpr double kRetreatTarget = 0.12;

double Clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

Vec2 MoveToward(Vec2 from, Vec2 to) {
  return {Clamp(to.x - from.x, -kMaxMove, kMaxMove), Clamp(to.y - from.y, -kMaxMove, kMaxMove)};
}

double GripToward(double w, double target) { return Clamp(target - w, -kMaxGrip, kMaxGrip); }

bool IsPlacing(TaskKind t) { return t == TaskKind::kPlace || t == TaskKind::kPickAndPlace; }

// Chebyshev steps to cover a displacement at kMaxMove per axis.
int MoveSteps(Vec2 a, Vec2 b) {
  const double d = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y));
  return static_cast<int>(std::ceil(d / kMaxMove - 1e-9));
}

bool Inside(Vec2 p, double margin) {
  return p.x >= margin && p.x <= 1.0 - margin && p.y >= margin && p.y <= 1.0 - margin;
}

}  // namespace

double Distance(Vec2 a, Vec2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::string_view TaskName(TaskKind task) {
  switch (task) {
    case TaskKind::kReach: return "reach";
    case TaskKind::kPick: return "pick";
    case TaskKind::kPlace: return "place";
    case TaskKind::kPickAndPlace: return "pick_and_place";
  }
  return "unknown";
}

std::optional<TaskKind> ParseTask(std::string_view name) {
  for (TaskKind t : kAllTasks) {
    if (TaskName(t) == name) return t;
  }
  return std::nullopt;
}

std::array<double, 8> Instruction::Encoded() const {
  std::array<double, 8> e{};
  e[static_cast<int>(task)] = 1.0;
  e[4] = object_start.x;
  e[5] = object_start.y;
  e[6] = goal.x;
  e[7] = goal.y;
  return e;
}

ActionVec ClipAction(const ActionVec& a) {
  ActionVec out;
  for (int i = 0; i < kActionDim; ++i) {
    // NaN maps to zero so the dynamics stay total.
    const double v = std::isnan(a[i]) ? 0.0 : a[i];
    out[i] = Clamp(v, -kActionBounds[i], kActionBounds[i]);
  }
  return out;
}

SimState Step(const SimState& s, const ActionVec& a, const EpisodeSpec& spec) {
  const ActionVec c = ClipAction(a);
  SimState n = s;
  n.gripper.x = Clamp(s.gripper.x + c[0], 0.0, 1.0);
  n.gripper.y = Clamp(s.gripper.y + c[1], 0.0, 1.0);
  n.aperture = Clamp(s.aperture + c[2], 0.0, kOpenWidth);
  if (!n.attached && n.aperture < spec.grasp_aperture_threshold &&
      Distance(n.gripper, n.object) <= spec.grasp_radius) {
    n.attached = true;
  } else if (n.attached && n.aperture >= spec.grasp_aperture_threshold) {
    n.attached = false;
  }
  if (n.attached) n.object = n.gripper;
  ++n.step_index;
  return n;
}

bool Success(const SimState& s, const Instruction& instruction, const EpisodeSpec& spec) {
  switch (instruction.task) {
    case TaskKind::kReach: return Distance(s.gripper, instruction.goal) <= spec.goal_radius;
    case TaskKind::kPick: return s.attached;
    case TaskKind::kPlace:
    case TaskKind::kPickAndPlace:
      return !s.attached && Distance(s.object, instruction.goal) <= spec.goal_radius;
  }
  return false;
}

SimState InitialState(const Instruction& instruction, const EpisodeSpec& spec) {
  SimState s;
  s.object = instruction.object_start;
  if (instruction.task == TaskKind::kPlace) {
    s.gripper = instruction.object_start;
    s.aperture = 0.0;
    s.attached = true;
  } else {
    s.gripper = spec.gripper_start;
    s.aperture = kOpenWidth;
  }
  return s;
}

Instruction SampleInstruction(TaskKind task, Rng& rng) {
  Instruction ins;
  ins.task = task;
  ins.object_start = {rng.Uniform(0.15, 0.85), rng.Uniform(0.15, 0.85)};
  while (true) {
    ins.goal = {rng.Uniform(0.15, 0.85), rng.Uniform(0.15, 0.85)};
    const double d = Distance(ins.goal, ins.object_start);
    if (d >= 0.2 && d <= 0.55) break;
  }
  return ins;
}

void CheckSolvable(const Instruction& instruction, const EpisodeSpec& spec) {
  if (!Inside(instruction.object_start, 0.05) || !Inside(instruction.goal, 0.05)) {
    throw PlannerError("object or goal outside the reachable workspace");
  }
  const Vec2 start = InitialState(instruction, spec).gripper;
  int steps = 0;
  switch (instruction.task) {
    case TaskKind::kReach: steps = MoveSteps(start, instruction.goal); break;
    case TaskKind::kPick: steps = MoveSteps(start, instruction.object_start) + 4; break;
    case TaskKind::kPlace: steps = MoveSteps(start, instruction.goal) + 4; break;
    case TaskKind::kPickAndPlace:
      steps = MoveSteps(start, instruction.object_start) + 4 +
              MoveSteps(instruction.object_start, instruction.goal) + 4;
      break;
  }
  if (steps > spec.horizon()) {
    throw PlannerError("expert needs " + std::to_string(steps) + " steps, horizon is " +
                       std::to_string(spec.horizon()));
  }
}

ActionVec ExpertAction(const SimState& s, const Instruction& ins, const EpisodeSpec& spec) {
  if (ins.task == TaskKind::kReach) {
    const Vec2 d = MoveToward(s.gripper, ins.goal);
    return {d.x, d.y, GripToward(s.aperture, kOpenWidth)};
  }
  if (s.attached) {
    if (ins.task == TaskKind::kPick) return {0.0, 0.0, GripToward(s.aperture, 0.0)};
    const double to_goal = Distance(s.gripper, ins.goal);
    // Once opening has started near the goal, keep opening even if jitter
    // pushes the gripper back out of the tight alignment radius.
    const bool at_goal =
        to_goal <= kReleaseAlign || (s.aperture > 0.0 && to_goal <= 0.5 * spec.goal_radius);
    if (at_goal) return {0.0, 0.0, GripToward(s.aperture, kOpenWidth)};
    // Finish closing before carrying.
    if (s.aperture > 0.0) return {0.0, 0.0, GripToward(s.aperture, 0.0)};
    const Vec2 d = MoveToward(s.gripper, ins.goal);
    return {d.x, d.y, 0.0};
  }
  if (IsPlacing(ins.task) && Distance(s.object, ins.goal) <= spec.goal_radius) {
    // Released: open fully in place, back away, then park with the gripper
    // closed.
    if (Distance(s.gripper, s.object) < kRetreatDistance) {
      if (s.aperture < kOpenWidth) return {0.0, 0.0, GripToward(s.aperture, kOpenWidth)};
      Vec2 dir{spec.gripper_start.x - s.object.x, spec.gripper_start.y - s.object.y};
      double norm = std::hypot(dir.x, dir.y);
      if (norm < 0.05) {
        dir = {0.0, 1.0};
        norm = 1.0;
      }
      const Vec2 target{s.object.x + kRetreatTarget * dir.x / norm,
                        s.object.y + kRetreatTarget * dir.y / norm};
      const Vec2 d = MoveToward(s.gripper, target);
      return {d.x, d.y, 0.0};
    }
    return {0.0, 0.0, GripToward(s.aperture, 0.0)};
  }
  const Vec2 d = MoveToward(s.gripper, s.object);
  const bool aligned = Distance(s.gripper, s.object) <= kGraspAlign;
  return {d.x, d.y, GripToward(s.aperture, aligned ? 0.0 : kOpenWidth)};
}

Demonstration ExpertRolloutFrom(const SimState& start, const Instruction& instruction,
                                const EpisodeSpec& spec, int steps, Rng& rng, double jitter_sigma) {
  Demonstration demo;
  demo.instruction = instruction;
  demo.trace.w0 = kOpenWidth;
  demo.states.reserve(steps + 1);
  demo.actions.reserve(steps);
  demo.states.push_back(start);
  demo.trace.widths.push_back(start.aperture);
  SimState s = start;
  for (int i = 0; i < steps; ++i) {
    ActionVec a = ExpertAction(s, instruction, spec);
    if (jitter_sigma > 0.0) {
      for (double& v : a) v += rng.Normal(0.0, jitter_sigma);
    }
    a = ClipAction(a);
    s = Step(s, a, spec);
    demo.actions.push_back(a);
    demo.states.push_back(s);
    demo.trace.widths.push_back(s.aperture);
  }
  return demo;
}

Demonstration ExpertRollout(const Instruction& instruction, const EpisodeSpec& spec, Rng& rng,
                            double jitter_sigma) {
  CheckSolvable(instruction, spec);
  return ExpertRolloutFrom(InitialState(instruction, spec), instruction, spec, spec.horizon(), rng,
                           jitter_sigma);
}

}  // namespace w2a::chunkworld
