#include "w2a/skillseg/skillseg.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "w2a/numerics/errors.h"

namespace w2a::skillseg {

SkillSchema SkillSchema::Default() {
  SkillSchema s;
  s.Add("reach", {"reach"});
  s.Add("pick", {"pick"});
  s.Add("place", {"place"});
  s.Add("pick_and_place", {"pick", "place"});
  return s;
}

void SkillSchema::Add(const std::string& task, std::vector<std::string> labels) {
  if (labels.empty()) throw SchemaError("schema for '" + task + "' has no labels");
  entries_[task] = std::move(labels);
}

bool SkillSchema::Contains(std::string_view task) const {
  return entries_.find(task) != entries_.end();
}

const std::vector<std::string>& SkillSchema::Labels(std::string_view task) const {
  auto it = entries_.find(task);
  if (it == entries_.end()) throw SchemaError("no schema for task '" + std::string(task) + "'");
  return it->second;
}

std::vector<Event> ClassifyEvents(const GripperTrace& trace, const SegConfig& cfg) {
  if (trace.widths.empty()) throw ContractError("empty gripper trace");
  if (!(cfg.closure_threshold > 0.0)) throw ConfigError("closure threshold must be positive");
  std::vector<Event> events;
  events.reserve(trace.widths.size());
  for (std::size_t t = 0; t < trace.widths.size(); ++t) {
    const double w = trace.widths[t];
    if (!(w >= 0.0 && w <= trace.w0)) {
      throw TraceError("width " + std::to_string(w) + " at step " + std::to_string(t) +
                       " outside [0, w0=" + std::to_string(trace.w0) + "]");
    }
    events.push_back(trace.w0 - w >= cfg.closure_threshold ? Event::kContact : Event::kNonContact);
  }
  return events;
}

std::vector<Segment> BuildSegments(const std::vector<Event>& events, const SegConfig& cfg) {
  std::vector<Segment> out;
  int next_start = 0;
  const int n = static_cast<int>(events.size());
  int t = 0;
  while (t < n) {
    if (events[t] != Event::kContact) {
      ++t;
      continue;
    }
    const int run_start = t;
    while (t < n && events[t] == Event::kContact) ++t;
    const int run_end = t - 1;
    if (run_end - run_start + 1 < cfg.min_segment_len) continue;
    Segment seg;
    seg.start = next_start;
    seg.end = run_end;
    seg.contact_index = run_start;
    out.push_back(seg);
    next_start = run_end + 1;
  }
  return out;
}

Alignment AlignSchema(const std::vector<Segment>& segments, const SkillSchema& schema,
                      std::string_view task, const SegConfig& cfg) {
  const std::vector<std::string>& labels = schema.Labels(task);
  Alignment result;
  result.segments = segments;
  for (auto& s : result.segments) s.label = std::string(kUnlabeled);

  std::vector<std::size_t> kept;
  if (segments.size() > labels.size()) {
    for (std::size_t i = 0; i < segments.size(); ++i) {
      if (!kept.empty() &&
          segments[i].contact_index - segments[kept.back()].contact_index <= cfg.closeness_window) {
        result.segments[i].label = std::string(kNoise);
        continue;
      }
      kept.push_back(i);
    }
    while (kept.size() > labels.size()) {
      result.segments[kept.back()].label = std::string(kNoise);
      kept.pop_back();
    }
  } else {
    kept.resize(segments.size());
    std::iota(kept.begin(), kept.end(), std::size_t{0});
  }

  if (kept.size() < labels.size()) {
    result.accepted = false;
    result.missing.assign(labels.begin() + static_cast<std::ptrdiff_t>(kept.size()), labels.end());
    return result;
  }
  for (std::size_t k = 0; k < kept.size(); ++k) result.segments[kept[k]].label = labels[k];
  result.accepted = true;
  return result;
}

LengthSummary SummarizeLengths(const std::vector<double>& lengths) {
  if (lengths.empty()) throw ContractError("length list is empty");
  std::vector<double> sorted = lengths;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  LengthSummary s;
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(n);
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const double band = 0.25 * std::abs(s.median);
  const auto near = std::count_if(sorted.begin(), sorted.end(),
                                  [&](double x) { return std::abs(x - s.median) <= band; });
  s.near_median_fraction = static_cast<double>(near) / static_cast<double>(n);
  return s;
}

LengthReport LengthStats(const std::vector<double>& original, const std::vector<double>& segmented) {
  LengthReport r;
  r.original = SummarizeLengths(original);
  r.segmented = SummarizeLengths(segmented);
  r.density_ratio = r.original.near_median_fraction > 0.0
                        ? r.segmented.near_median_fraction / r.original.near_median_fraction
                        : std::numeric_limits<double>::infinity();
  return r;
}

}  // namespace w2a::skillseg
