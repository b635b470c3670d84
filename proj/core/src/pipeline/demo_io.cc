#include "w2a/pipeline/demo_io.h"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "w2a/numerics/errors.h"

namespace w2a::pipeline {
namespace {

using nlohmann::ordered_json;

ordered_json PointJson(chunkworld::Vec2 p) { return ordered_json::array({p.x, p.y}); }

template <std::size_t N>
std::array<double, N> FixedArray(const ordered_json& j, const char* what) {
  if (!j.is_array() || j.size() != N) {
    throw FormatError(std::string(what) + " must be an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    if (!j[i].is_number()) throw FormatError(std::string(what) + " holds a non-number");
    out[i] = j[i].get<double>();
  }
  return out;
}

const ordered_json& Field(const ordered_json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw FormatError(std::string("missing key '") + key + "'");
  return *it;
}

void CheckLengths(const DemoRecord& r) {
  if (r.states.empty()) throw FormatError("demo " + std::to_string(r.demo_id) + " has no states");
  if (r.actions.size() + 1 != r.states.size() || r.widths.size() != r.states.size()) {
    throw FormatError("demo " + std::to_string(r.demo_id) + " has " + std::to_string(r.states.size()) +
                      " states, " + std::to_string(r.actions.size()) + " actions and " +
                      std::to_string(r.widths.size()) + " widths");
  }
}

}  // namespace

StateVector ToStateVector(const chunkworld::SimState& s) {
  return {s.gripper.x, s.gripper.y, s.aperture,          s.object.x,
          s.object.y,  s.attached ? 1.0 : 0.0, static_cast<double>(s.step_index)};
}

chunkworld::SimState FromStateVector(const StateVector& v) {
  chunkworld::SimState s;
  s.gripper = {v[0], v[1]};
  s.aperture = v[2];
  s.object = {v[3], v[4]};
  s.attached = v[5] != 0.0;
  s.step_index = static_cast<int>(v[6]);
  return s;
}

DemoRecord ToRecord(std::int64_t demo_id, const chunkworld::Demonstration& demo) {
  DemoRecord r;
  r.demo_id = demo_id;
  r.task = std::string(chunkworld::TaskName(demo.instruction.task));
  r.object_start = demo.instruction.object_start;
  r.goal = demo.instruction.goal;
  r.w0 = demo.trace.w0;
  for (const auto& s : demo.states) r.states.push_back(ToStateVector(s));
  r.actions = demo.actions;
  r.widths = demo.trace.widths;
  return r;
}

chunkworld::Demonstration FromRecord(const DemoRecord& r) {
  CheckLengths(r);
  const auto task = chunkworld::ParseTask(r.task);
  if (!task) throw FormatError("unknown task '" + r.task + "'");
  chunkworld::Demonstration d;
  d.instruction = {*task, r.object_start, r.goal};
  for (const auto& v : r.states) d.states.push_back(FromStateVector(v));
  d.actions = r.actions;
  d.trace.w0 = r.w0;
  d.trace.widths = r.widths;
  return d;
}

std::size_t TruncateToChunks(DemoRecord& r, std::size_t chunk_size) {
  if (chunk_size == 0) throw ChunkingError("chunk size must be positive");
  CheckLengths(r);
  const std::size_t keep = r.actions.size() / chunk_size * chunk_size;
  const std::size_t dropped = r.actions.size() - keep;
  r.actions.resize(keep);
  r.states.resize(keep + 1);
  r.widths.resize(keep + 1);
  return dropped;
}

std::string SerializeDemo(const DemoRecord& r) {
  ordered_json j;
  j["demo_id"] = r.demo_id;
  j["task"] = r.task;
  j["object_start"] = PointJson(r.object_start);
  j["goal"] = PointJson(r.goal);
  j["w0"] = r.w0;
  j["states"] = ordered_json::array();
  for (const auto& s : r.states) j["states"].push_back(s);
  j["actions"] = ordered_json::array();
  for (const auto& a : r.actions) j["actions"].push_back(a);
  j["widths"] = r.widths;
  return j.dump();
}

DemoRecord ParseDemo(std::string_view line) {
  ordered_json j;
  try {
    j = ordered_json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw FormatError("demo record must be a JSON object");
  static const char* kKeys[] = {"demo_id", "task", "object_start", "goal",
                                "w0",      "states", "actions",    "widths"};
  for (const auto& [key, unused] : j.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw FormatError("unknown key '" + key + "'");
    }
  }
  DemoRecord r;
  try {
    r.demo_id = Field(j, "demo_id").get<std::int64_t>();
    r.task = Field(j, "task").get<std::string>();
    const auto os = FixedArray<2>(Field(j, "object_start"), "object_start");
    const auto goal = FixedArray<2>(Field(j, "goal"), "goal");
    r.object_start = {os[0], os[1]};
    r.goal = {goal[0], goal[1]};
    r.w0 = Field(j, "w0").get<double>();
    for (const auto& s : Field(j, "states")) r.states.push_back(FixedArray<7>(s, "state"));
    for (const auto& a : Field(j, "actions")) r.actions.push_back(FixedArray<3>(a, "action"));
    for (const auto& w : Field(j, "widths")) r.widths.push_back(w.get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad field type: ") + e.what());
  }
  CheckLengths(r);
  return r;
}

void WriteDemos(const std::filesystem::path& path, const std::vector<DemoRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& r : records) out << SerializeDemo(r) << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<DemoRecord> ReadDemos(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<DemoRecord> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      out.push_back(ParseDemo(line));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

std::vector<DemoRecord> GenerateDemos(std::size_t n, std::optional<chunkworld::TaskKind> task,
                                      double sigma, std::uint64_t seed,
                                      const chunkworld::EpisodeSpec& spec) {
  if (sigma < 0.0) throw ConfigError("jitter sigma must be non-negative");
  const Rng root = Rng(seed).Split("demos");
  std::vector<DemoRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = root.Split(static_cast<std::uint64_t>(i));
    const auto kind = task ? *task : chunkworld::kAllTasks[i % chunkworld::kTaskCount];
    const auto ins = chunkworld::SampleInstruction(kind, r);
    out.push_back(ToRecord(static_cast<std::int64_t>(i), chunkworld::ExpertRollout(ins, spec, r, sigma)));
  }
  return out;
}

std::vector<chunkworld::Demonstration> LoadForTraining(const std::vector<DemoRecord>& records,
                                                       std::size_t chunk_size,
                                                       std::size_t* dropped_steps) {
  std::vector<chunkworld::Demonstration> out;
  std::size_t dropped = 0;
  for (DemoRecord r : records) {
    dropped += TruncateToChunks(r, chunk_size);
    if (r.actions.empty()) continue;
    out.push_back(FromRecord(r));
  }
  if (dropped_steps) *dropped_steps = dropped;
  return out;
}

}  // namespace w2a::pipeline
