#ifndef W2A_PIPELINE_DEMO_IO_H_
#define W2A_PIPELINE_DEMO_IO_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2a/chunkworld/world.h"

// Demonstration datasets as JSONL, one record per line. Keys are written in
// the order demo_id, task, object_start, goal, w0, states, actions, widths.
// A state vector is [gx, gy, w, ox, oy, attached, step].
namespace w2a::pipeline {

using StateVector = std::array<double, 7>;

struct DemoRecord {
  std::int64_t demo_id = 0;
  std::string task;
  chunkworld::Vec2 object_start;
  chunkworld::Vec2 goal;
  double w0 = chunkworld::kOpenWidth;
  std::vector<StateVector> states;
  std::vector<chunkworld::ActionVec> actions;
  std::vector<double> widths;

  friend bool operator==(const DemoRecord&, const DemoRecord&) = default;
};

StateVector ToStateVector(const chunkworld::SimState& s);
chunkworld::SimState FromStateVector(const StateVector& v);

DemoRecord ToRecord(std::int64_t demo_id, const chunkworld::Demonstration& demo);
// FormatError on an unknown task or inconsistent lengths.
chunkworld::Demonstration FromRecord(const DemoRecord& record);

// Drops trailing actions so their count is a multiple of `chunk_size`, and the
// matching states and widths. Returns the number of dropped actions.
std::size_t TruncateToChunks(DemoRecord& record, std::size_t chunk_size);

std::string SerializeDemo(const DemoRecord& record);
// FormatError naming the problem.
DemoRecord ParseDemo(std::string_view line);

// IoError naming the path when it cannot be opened; FormatError with the line
// number on a bad record.
void WriteDemos(const std::filesystem::path& path, const std::vector<DemoRecord>& records);
std::vector<DemoRecord> ReadDemos(const std::filesystem::path& path);

// Expert demos; demo i draws its instruction and jitter from
// Rng(seed).Split("demos").Split(i). Without a task the tasks cycle.
std::vector<DemoRecord> GenerateDemos(std::size_t n, std::optional<chunkworld::TaskKind> task,
                                      double sigma, std::uint64_t seed,
                                      const chunkworld::EpisodeSpec& spec = {});

// Ingestion for training: truncates every record to whole chunks and converts
// it. `dropped_steps` receives the total number of dropped actions.
std::vector<chunkworld::Demonstration> LoadForTraining(const std::vector<DemoRecord>& records,
                                                       std::size_t chunk_size,
                                                       std::size_t* dropped_steps = nullptr);

}  // namespace w2a::pipeline

#endif  // W2A_PIPELINE_DEMO_IO_H_
