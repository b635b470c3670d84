#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "w2a/chunkworld/world.h"
#include "w2a/numerics/errors.h"
#include "w2a/numerics/rng.h"
#include "w2a/skillseg/skillseg.h"

namespace w2a::skillseg {
namespace {

constexpr Event C = Event::kContact;
constexpr Event N = Event::kNonContact;

// Events with contact runs of the given lengths, separated by `gap`
// non-contact steps and padded with `gap` at both ends.
std::vector<Event> Runs(std::initializer_list<int> lengths, int gap = 5) {
  std::vector<Event> e(gap, N);
  for (int len : lengths) {
    e.insert(e.end(), len, C);
    e.insert(e.end(), gap, N);
  }
  return e;
}

Segment Seg(int start, int end, int contact, std::string label = std::string(kUnlabeled)) {
  return {start, end, std::move(label), contact};
}

TEST(ClassifyEvents, ThresholdArithmetic) {
  const GripperTrace trace{0.08, {0.080, 0.074}};
  EXPECT_EQ(ClassifyEvents(trace), (std::vector<Event>{N, C}));
}

TEST(ClassifyEvents, FullyOpenIsNonContact) {
  const GripperTrace trace{0.08, std::vector<double>(48, 0.08)};
  for (Event e : ClassifyEvents(trace)) EXPECT_EQ(e, N);
}

TEST(ClassifyEvents, MatchesElementwiseOracle) {
  Rng rng(1);
  GripperTrace trace{0.08, {}};
  for (int i = 0; i < 10000; ++i) trace.widths.push_back(rng.Uniform(0.0, 0.08));
  const auto events = ClassifyEvents(trace);
  for (std::size_t t = 0; t < events.size(); ++t)
    ASSERT_EQ(events[t] == C, 0.08 - trace.widths[t] >= 0.005) << t;
}

TEST(ClassifyEvents, ThresholdMonotone) {
  Rng rng(2);
  GripperTrace trace{0.08, {}};
  for (int i = 0; i < 2000; ++i) trace.widths.push_back(rng.Uniform(0.06, 0.08));
  SegConfig low, high;
  low.closure_threshold = 0.004;
  high.closure_threshold = 0.01;
  const auto a = ClassifyEvents(trace, low), b = ClassifyEvents(trace, high);
  for (std::size_t t = 0; t < a.size(); ++t)
    if (a[t] == N) ASSERT_EQ(b[t], N);
}

TEST(ClassifyEvents, Errors) {
  EXPECT_THROW(ClassifyEvents({0.08, {0.05, 0.081}}), TraceError);
  EXPECT_THROW(ClassifyEvents({0.08, {-0.01}}), TraceError);
  EXPECT_THROW(ClassifyEvents({0.08, {}}), ContractError);
}

TEST(BuildSegments, SingleRun) {
  std::vector<Event> e(48, N);
  std::fill(e.begin() + 20, e.begin() + 26, C);
  const auto s = BuildSegments(e);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], Seg(0, 25, 20));
}

TEST(BuildSegments, ShortRunIsFiltered) {
  // Runs (6, 2, 7): starts at 5, 16, 23.
  const auto s = BuildSegments(Runs({6, 2, 7}));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], Seg(0, 10, 5));
  EXPECT_EQ(s[1], Seg(11, 29, 23));
}

TEST(BuildSegments, NoContact) { EXPECT_TRUE(BuildSegments(std::vector<Event>(30, N)).empty()); }

TEST(BuildSegments, RunAtTraceEnd) {
  std::vector<Event> e(10, N);
  e.insert(e.end(), 4, C);
  const auto s = BuildSegments(e);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0], Seg(0, 13, 10));
}

TEST(BuildSegments, OrderedAndDisjoint) {
  Rng rng(3);
  std::vector<Event> e;
  for (int i = 0; i < 5000; ++i) e.push_back(rng.Below(3) == 0 ? N : C);
  const auto s = BuildSegments(e);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_LT(s[i].start, s[i].end);
    EXPECT_GE(s[i].contact_index, s[i].start);
    EXPECT_LE(s[i].contact_index, s[i].end);
    if (i > 0) EXPECT_EQ(s[i].start, s[i - 1].end + 1);
  }
}

TEST(AlignSchema, ExactCountLabelsInOrder) {
  const auto a = AlignSchema({Seg(0, 20, 10), Seg(21, 40, 30)}, SkillSchema::Default(), "pick_and_place");
  ASSERT_TRUE(a.accepted);
  EXPECT_EQ(a.segments[0].label, "pick");
  EXPECT_EQ(a.segments[1].label, "place");
  EXPECT_TRUE(a.missing.empty());
}

TEST(AlignSchema, PromptExampleWithClosenessWindow) {
  SegConfig cfg;
  cfg.closeness_window = 5;
  const std::vector<Segment> segs{Seg(0, 120, 116), Seg(121, 233, 230), Seg(234, 240, 235)};
  const auto a = AlignSchema(segs, SkillSchema::Default(), "pick_and_place", cfg);
  ASSERT_TRUE(a.accepted);
  EXPECT_EQ(a.segments[0].label, "pick");
  EXPECT_EQ(a.segments[1].label, "place");
  EXPECT_EQ(a.segments[2].label, kNoise);
}

TEST(AlignSchema, PromptExampleWithDefaultWindow) {
  // 235 - 230 exceeds the default window; the surplus rule still marks it.
  const std::vector<Segment> segs{Seg(0, 120, 116), Seg(121, 233, 230), Seg(234, 240, 235)};
  const auto a = AlignSchema(segs, SkillSchema::Default(), "pick_and_place");
  ASSERT_TRUE(a.accepted);
  EXPECT_EQ(a.segments[0].label, "pick");
  EXPECT_EQ(a.segments[1].label, "place");
  EXPECT_EQ(a.segments[2].label, kNoise);
}

TEST(AlignSchema, CloseDuplicateBeforeLaterContact) {
  // 12 sits within the window of 10 and is dropped; 40 then takes "place".
  const std::vector<Segment> segs{Seg(0, 11, 10), Seg(12, 20, 12), Seg(21, 45, 40)};
  const auto a = AlignSchema(segs, SkillSchema::Default(), "pick_and_place");
  ASSERT_TRUE(a.accepted);
  EXPECT_EQ(a.segments[0].label, "pick");
  EXPECT_EQ(a.segments[1].label, kNoise);
  EXPECT_EQ(a.segments[2].label, "place");
}

TEST(AlignSchema, UnderCountIsRejected) {
  const auto a = AlignSchema({Seg(0, 20, 10)}, SkillSchema::Default(), "pick_and_place");
  EXPECT_FALSE(a.accepted);
  EXPECT_EQ(a.missing, (std::vector<std::string>{"place"}));
  EXPECT_EQ(a.segments[0].label, kUnlabeled);
  const auto empty = AlignSchema({}, SkillSchema::Default(), "pick");
  EXPECT_FALSE(empty.accepted);
  EXPECT_EQ(empty.missing, (std::vector<std::string>{"pick"}));
}

TEST(AlignSchema, Deterministic) {
  const std::vector<Segment> segs{Seg(0, 11, 10), Seg(12, 20, 12), Seg(21, 45, 40), Seg(46, 60, 50)};
  const auto a = AlignSchema(segs, SkillSchema::Default(), "pick_and_place");
  const auto b = AlignSchema(segs, SkillSchema::Default(), "pick_and_place");
  EXPECT_EQ(a.segments, b.segments);
  EXPECT_EQ(a.accepted, b.accepted);
}

TEST(SkillSchema, Errors) {
  EXPECT_THROW(AlignSchema({}, SkillSchema::Default(), "stack"), SchemaError);
  SkillSchema s;
  EXPECT_THROW(s.Add("x", {}), SchemaError);
  s.Add("x", {"a", "b", "c"});
  EXPECT_TRUE(s.Contains("x"));
  EXPECT_EQ(s.Labels("x").size(), 3u);
}

TEST(Segmentation, ExpertPickAndPlaceSynchronizes) {
  Rng rng(4);
  int synced = 0;
  for (int i = 0; i < 200; ++i) {
    const auto ins = chunkworld::SampleInstruction(chunkworld::TaskKind::kPickAndPlace, rng);
    const auto demo = chunkworld::ExpertRollout(ins, {}, rng);
    const auto a = AlignSchema(BuildSegments(ClassifyEvents(demo.trace)), SkillSchema::Default(),
                               "pick_and_place");
    synced += a.accepted;
  }
  EXPECT_GE(synced, 190);
}

TEST(LengthStats, IdenticalListsGiveUnitRatio) {
  const std::vector<double> x{10, 12, 50, 11, 13, 9};
  EXPECT_DOUBLE_EQ(LengthStats(x, x).density_ratio, 1.0);
}

TEST(LengthStats, ConstantSegmentsAreDense) {
  const auto r = LengthStats({5, 20, 40, 80, 160}, {12, 12, 12});
  EXPECT_DOUBLE_EQ(r.segmented.near_median_fraction, 1.0);
  EXPECT_DOUBLE_EQ(r.segmented.median, 12.0);
  EXPECT_DOUBLE_EQ(r.original.median, 40.0);
  EXPECT_DOUBLE_EQ(r.original.mean, 61.0);
}

TEST(LengthStats, ZeroOriginalDensityIsInfinite) {
  const auto r = LengthStats({1, 10, 100, 1000}, {5, 5});
  EXPECT_EQ(r.original.near_median_fraction, 0.0);
  EXPECT_TRUE(std::isinf(r.density_ratio));
  EXPECT_THROW(LengthStats({}, {1}), ContractError);
}

std::vector<double> ReadList(std::istream& in, const std::string& key) {
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::string name;
    row >> name;
    if (name != key) continue;
    std::vector<double> out;
    for (double v; row >> v;) out.push_back(v);
    return out;
  }
  return {};
}

// Sort, take the middle, count within a quarter of it.
double OracleFraction(std::vector<double> x, double* median) {
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  *median = n % 2 ? x[n / 2] : (x[n / 2 - 1] + x[n / 2]) / 2;
  int near = 0;
  for (double v : x) near += std::abs(v - *median) <= *median / 4;
  return static_cast<double>(near) / n;
}

TEST(LengthStats, LongTailFixtureMatchesSortOracle) {
  std::ifstream in(std::string(W2A_FIXTURE_DIR) + "/length_longtail.txt");
  ASSERT_TRUE(in);
  const auto original = ReadList(in, "original");
  const auto segmented = ReadList(in, "segmented");
  ASSERT_EQ(original.size(), 120u);
  ASSERT_EQ(segmented.size(), 180u);
  const auto r = LengthStats(original, segmented);
  double mo = 0, ms = 0;
  const double fo = OracleFraction(original, &mo), fs = OracleFraction(segmented, &ms);
  EXPECT_EQ(r.original.median, mo);
  EXPECT_EQ(r.segmented.median, ms);
  EXPECT_EQ(r.original.near_median_fraction, fo);
  EXPECT_EQ(r.segmented.near_median_fraction, fs);
  EXPECT_NEAR(r.density_ratio, fs / fo, 1e-15);
  EXPECT_GT(r.density_ratio, 1.0);
}

}  // namespace
}  // namespace w2a::skillseg
