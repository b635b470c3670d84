#include <gtest/gtest.h>

#include <cmath>

#include "w2a/chunkworld/world.h"
#include "w2a/numerics/errors.h"

namespace w2a::chunkworld {
namespace {

SimState At(Vec2 gripper, double aperture, Vec2 object, bool attached = false) {
  SimState s;
  s.gripper = gripper;
  s.aperture = aperture;
  s.object = object;
  s.attached = attached;
  return s;
}

TEST(Step, MovesAndClipsActions) {
  const SimState s = At({0.5, 0.5}, kOpenWidth, {0.1, 0.1});
  const SimState n = Step(s, {0.02, -0.01, 0.0});
  EXPECT_DOUBLE_EQ(n.gripper.x, 0.52);
  EXPECT_DOUBLE_EQ(n.gripper.y, 0.49);
  EXPECT_EQ(n.step_index, 1);
  const SimState c = Step(s, {1.0, -1.0, -1.0});
  EXPECT_DOUBLE_EQ(c.gripper.x, 0.55);
  EXPECT_DOUBLE_EQ(c.gripper.y, 0.45);
  EXPECT_DOUBLE_EQ(c.aperture, kOpenWidth - kMaxGrip);
}

TEST(Step, ClampsToWorkspaceAndAperture) {
  const SimState s = At({0.99, 0.01}, 0.01, {0.5, 0.5});
  const SimState n = Step(s, {0.05, -0.05, -0.02});
  EXPECT_DOUBLE_EQ(n.gripper.x, 1.0);
  EXPECT_DOUBLE_EQ(n.gripper.y, 0.0);
  EXPECT_DOUBLE_EQ(n.aperture, 0.0);
  const SimState o = Step(At({0.5, 0.5}, 0.07, {0.1, 0.1}), {0, 0, 0.02});
  EXPECT_DOUBLE_EQ(o.aperture, kOpenWidth);
}

TEST(Step, NanActionIsIgnored) {
  const SimState s = At({0.5, 0.5}, 0.05, {0.1, 0.1});
  const SimState n = Step(s, {std::nan(""), 0.01, std::nan("")});
  EXPECT_DOUBLE_EQ(n.gripper.x, 0.5);
  EXPECT_DOUBLE_EQ(n.aperture, 0.05);
}

TEST(Step, AttachesWhenClosingAtObject) {
  const SimState s = At({0.4, 0.4}, 0.05, {0.4, 0.4});
  const SimState n = Step(s, {0, 0, -0.02});
  EXPECT_NEAR(n.aperture, 0.03, 1e-15);
  EXPECT_TRUE(n.attached);
  EXPECT_EQ(n.object, n.gripper);
}

TEST(Step, NoAttachOutsideGraspRadius) {
  const SimState s = At({0.4, 0.4}, 0.05, {0.44, 0.4});
  EXPECT_FALSE(Step(s, {0, 0, -0.02}).attached);
}

TEST(Step, NoAttachWhileOpen) {
  const SimState s = At({0.4, 0.4}, kOpenWidth, {0.4, 0.4});
  EXPECT_FALSE(Step(s, {0, 0, 0}).attached);
}

TEST(Step, CarriesAndReleases) {
  SimState s = At({0.4, 0.4}, 0.0, {0.4, 0.4}, true);
  s = Step(s, {0.05, 0.03, 0.0});
  EXPECT_TRUE(s.attached);
  EXPECT_EQ(s.object, s.gripper);
  s = Step(s, {0, 0, 0.02});
  EXPECT_TRUE(s.attached);  // 0.02 < threshold
  s = Step(s, {0, 0, 0.02});
  EXPECT_FALSE(s.attached);  // 0.04 >= threshold
  const Vec2 dropped = s.object;
  s = Step(s, {0.05, 0.0, 0.0});
  EXPECT_EQ(s.object, dropped);
}

TEST(Success, PerTaskPredicate) {
  Instruction ins;
  ins.goal = {0.7, 0.7};
  ins.task = TaskKind::kReach;
  EXPECT_TRUE(Success(At({0.73, 0.7}, kOpenWidth, {0, 0}), ins));
  EXPECT_FALSE(Success(At({0.76, 0.7}, kOpenWidth, {0, 0}), ins));
  ins.task = TaskKind::kPick;
  EXPECT_TRUE(Success(At({0.2, 0.2}, 0.0, {0.2, 0.2}, true), ins));
  EXPECT_FALSE(Success(At({0.2, 0.2}, 0.0, {0.2, 0.2}, false), ins));
  for (TaskKind t : {TaskKind::kPlace, TaskKind::kPickAndPlace}) {
    ins.task = t;
    EXPECT_TRUE(Success(At({0.5, 0.5}, kOpenWidth, {0.7, 0.7}), ins));
    EXPECT_FALSE(Success(At({0.7, 0.7}, 0.0, {0.7, 0.7}, true), ins));
    EXPECT_FALSE(Success(At({0.5, 0.5}, kOpenWidth, {0.7, 0.76}), ins));
  }
}

TEST(Success, FuzzAgainstOracle) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    Instruction ins = SampleInstruction(kAllTasks[rng.Below(kTaskCount)], rng);
    const bool attached = rng.Below(2) == 1;
    const Vec2 g{rng.Uniform(0, 1), rng.Uniform(0, 1)};
    const Vec2 o = attached ? g : Vec2{rng.Uniform(0, 1), rng.Uniform(0, 1)};
    const SimState s = At(g, attached ? 0.0 : kOpenWidth, o, attached);
    auto dist = [](Vec2 a, Vec2 b) { return std::sqrt((a.x - b.x) * (a.x - b.x) + (a.y - b.y) * (a.y - b.y)); };
    bool want = false;
    switch (ins.task) {
      case TaskKind::kReach: want = dist(g, ins.goal) <= 0.05; break;
      case TaskKind::kPick: want = attached; break;
      default: want = !attached && dist(o, ins.goal) <= 0.05;
    }
    ASSERT_EQ(Success(s, ins), want) << i;
  }
}

TEST(Task, NamesRoundTrip) {
  for (TaskKind t : kAllTasks) EXPECT_EQ(ParseTask(TaskName(t)), t);
  EXPECT_FALSE(ParseTask("stack").has_value());
}

TEST(Instruction, EncodedLayout) {
  Instruction ins{TaskKind::kPlace, {0.2, 0.3}, {0.6, 0.7}};
  const auto e = ins.Encoded();
  const std::array<double, 8> want{0, 0, 1, 0, 0.2, 0.3, 0.6, 0.7};
  EXPECT_EQ(e, want);
}

TEST(Instruction, SamplesWithinBounds) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Instruction ins = SampleInstruction(TaskKind::kPickAndPlace, rng);
    for (double v : {ins.object_start.x, ins.object_start.y, ins.goal.x, ins.goal.y}) {
      EXPECT_GE(v, 0.15);
      EXPECT_LE(v, 0.85);
    }
    const double d = Distance(ins.object_start, ins.goal);
    EXPECT_GE(d, 0.2);
    EXPECT_LE(d, 0.55);
    EXPECT_NO_THROW(CheckSolvable(ins));
  }
}

TEST(InitialState, PlaceStartsHolding) {
  Instruction ins{TaskKind::kPlace, {0.3, 0.3}, {0.7, 0.6}};
  const SimState s = InitialState(ins);
  EXPECT_TRUE(s.attached);
  EXPECT_EQ(s.gripper, ins.object_start);
  ins.task = TaskKind::kPick;
  const SimState p = InitialState(ins);
  EXPECT_FALSE(p.attached);
  EXPECT_EQ(p.gripper, (Vec2{0.5, 0.5}));
  EXPECT_DOUBLE_EQ(p.aperture, kOpenWidth);
}

TEST(Expert, CanonicalPickAndPlaceReplaysToSuccess) {
  Rng rng(1);
  const Instruction ins{TaskKind::kPickAndPlace, {0.3, 0.3}, {0.7, 0.6}};
  const Demonstration d = ExpertRollout(ins, {}, rng);
  ASSERT_EQ(d.actions.size(), 48u);
  ASSERT_EQ(d.states.size(), 49u);
  SimState s = InitialState(ins);
  for (const ActionVec& a : d.actions) {
    s = Step(s, a);
    if (s.attached) {
      ASSERT_EQ(s.object, s.gripper);
    }
  }
  EXPECT_EQ(s, d.states.back());
  EXPECT_TRUE(Success(s, ins));
}

TEST(Expert, ActionsWithinBoundsAndTraceMatchesStates) {
  Rng rng(2);
  for (TaskKind t : kAllTasks) {
    const Instruction ins = SampleInstruction(t, rng);
    const Demonstration d = ExpertRollout(ins, {}, rng, 0.01);
    ASSERT_EQ(d.trace.widths.size(), d.states.size());
    for (std::size_t i = 0; i < d.states.size(); ++i) EXPECT_DOUBLE_EQ(d.trace.widths[i], d.states[i].aperture);
    for (const ActionVec& a : d.actions)
      for (int k = 0; k < kActionDim; ++k) EXPECT_LE(std::abs(a[k]), kActionBounds[k]);
  }
}

TEST(Expert, NoiselessSweepAlwaysSucceeds) {
  Rng rng(100);
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    const Instruction ins = SampleInstruction(kAllTasks[i % kTaskCount], rng);
    Rng roll(i);
    ok += Success(ExpertRollout(ins, {}, roll).states.back(), ins);
  }
  EXPECT_EQ(ok, 100);
}

TEST(Expert, JitteredSweepMostlySucceeds) {
  Rng rng(101);
  int ok = 0;
  for (int i = 0; i < 100; ++i) {
    const Instruction ins = SampleInstruction(kAllTasks[i % kTaskCount], rng);
    Rng roll(1000 + i);
    ok += Success(ExpertRollout(ins, {}, roll, 0.01).states.back(), ins);
  }
  EXPECT_GE(ok, 90);
}

TEST(Expert, ReachNeverCloses) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Instruction ins = SampleInstruction(TaskKind::kReach, rng);
    const Demonstration d = ExpertRollout(ins, {}, rng, 0.01);
    for (const SimState& s : d.states) {
      ASSERT_GE(s.aperture, 0.04);
      ASSERT_FALSE(s.attached);
    }
  }
}

TEST(Expert, DeterministicWithoutJitter) {
  const Instruction ins{TaskKind::kPick, {0.25, 0.7}, {0.6, 0.4}};
  Rng a(1), b(999);
  const Demonstration da = ExpertRollout(ins, {}, a), db = ExpertRollout(ins, {}, b);
  EXPECT_EQ(da.states, db.states);
  EXPECT_EQ(da.actions, db.actions);
  // sigma 0 leaves the rng untouched.
  Rng c(1);
  EXPECT_EQ(a.NextU64(), c.NextU64());
}

TEST(Expert, JitterDeterministicPerSeed) {
  const Instruction ins{TaskKind::kPickAndPlace, {0.25, 0.7}, {0.6, 0.4}};
  Rng a(7), b(7);
  EXPECT_EQ(ExpertRollout(ins, {}, a, 0.01).actions, ExpertRollout(ins, {}, b, 0.01).actions);
}

TEST(Expert, RolloutFromStateContinues) {
  const Instruction ins{TaskKind::kPickAndPlace, {0.3, 0.3}, {0.7, 0.6}};
  Rng rng(1);
  const Demonstration full = ExpertRollout(ins, {}, rng);
  const Demonstration tail = ExpertRolloutFrom(full.states[20], ins, {}, 28, rng);
  ASSERT_EQ(tail.actions.size(), 28u);
  EXPECT_EQ(tail.states.back(), full.states.back());
}

TEST(Expert, UnsolvableRaisesPlannerError) {
  Rng rng(1);
  const Instruction outside{TaskKind::kPick, {0.01, 0.5}, {0.5, 0.5}};
  EXPECT_THROW(CheckSolvable(outside), PlannerError);
  EXPECT_THROW(ExpertRollout(outside, {}, rng), PlannerError);
  EpisodeSpec tiny;
  tiny.chunk_count = 1;
  const Instruction far{TaskKind::kPickAndPlace, {0.15, 0.15}, {0.6, 0.6}};
  EXPECT_THROW(CheckSolvable(far, tiny), PlannerError);
}

}  // namespace
}  // namespace w2a::chunkworld
