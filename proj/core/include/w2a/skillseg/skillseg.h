#ifndef W2A_SKILLSEG_SKILLSEG_H_
#define W2A_SKILLSEG_SKILLSEG_H_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "w2a/skillseg/trace.h"

// Atomic-skill segmentation of gripper traces: closure events, contact-run
// segments, and a rule-based matcher against per-task skill schemas.
namespace w2a::skillseg {

inline constexpr std::string_view kUnlabeled = "UNLABELED";
inline constexpr std::string_view kNoise = "NOISE";

struct SegConfig {
  double closure_threshold = 0.005;  // contact iff w0 - w >= threshold
  int min_segment_len = 4;           // shorter contact runs are dropped
  // Two contacts this many steps apart or fewer count as one event when a
  // demo has more segments than its schema.
  int closeness_window = 4;
};

enum class Event { kNonContact, kContact };

struct Segment {
  int start = 0;
  int end = 0;
  std::string label{kUnlabeled};
  int contact_index = 0;
  friend bool operator==(const Segment&, const Segment&) = default;
};

class SkillSchema {
 public:
  // reach, pick, place, pick_and_place.
  static SkillSchema Default();
  void Add(const std::string& task, std::vector<std::string> labels);
  bool Contains(std::string_view task) const;
  // SchemaError for an unknown task.
  const std::vector<std::string>& Labels(std::string_view task) const;
  const std::map<std::string, std::vector<std::string>, std::less<>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<std::string>, std::less<>> entries_;
};

// TraceError when a width exceeds w0 or is negative; ContractError when empty.
std::vector<Event> ClassifyEvents(const GripperTrace& trace, const SegConfig& cfg = {});

// One segment per contact run of at least min_segment_len steps, running from
// the step after the previous segment (or 0) to the run's last step.
std::vector<Segment> BuildSegments(const std::vector<Event>& events, const SegConfig& cfg = {});

struct Alignment {
  bool accepted = false;
  std::vector<Segment> segments;      // labeled; surplus entries marked NOISE
  std::vector<std::string> missing;   // schema steps without a segment
};

Alignment AlignSchema(const std::vector<Segment>& segments, const SkillSchema& schema,
                      std::string_view task, const SegConfig& cfg = {});

struct LengthSummary {
  double mean = 0.0;
  double median = 0.0;
  double near_median_fraction = 0.0;  // |x - median| <= 0.25 * median
};

struct LengthReport {
  LengthSummary original;
  LengthSummary segmented;
  // segmented / original near-median fraction; infinite if the original
  // fraction is zero.
  double density_ratio = 0.0;
};

LengthSummary SummarizeLengths(const std::vector<double>& lengths);
LengthReport LengthStats(const std::vector<double>& original, const std::vector<double>& segmented);

}  // namespace w2a::skillseg

#endif  // W2A_SKILLSEG_SKILLSEG_H_
