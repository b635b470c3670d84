#ifndef W2A_PIPELINE_METRICS_H_
#define W2A_PIPELINE_METRICS_H_

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "w2a/adapters/adapters.h"
#include "w2a/policy/residual.h"

// Metric logs as CSV. Numbers use the shortest round-trip decimal form, so
// identical runs give identical bytes. An absent value is an empty field.
namespace w2a::pipeline {

inline constexpr std::string_view kStage1Header = "step,l_recon,l_contrastive,pos_sim";
inline constexpr std::string_view kStage2Header = "iter,loss,pos_sim,success_rate";

std::string FormatNumber(double v);

std::string Stage1Csv(const std::vector<adapters::Stage1Metric>& log);
std::string Stage2Csv(const std::vector<policy::Stage2Metric>& log);

// First column is the x axis; the rest are metrics.
struct MetricTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
};

// FormatError on a header other than the two above, an empty body, a row
// with the wrong field count or a malformed number.
MetricTable ParseMetricCsv(std::string_view text);

// IoError naming the path.
void WriteTextFile(const std::filesystem::path& path, std::string_view contents);
std::string ReadTextFile(const std::filesystem::path& path);

}  // namespace w2a::pipeline

#endif  // W2A_PIPELINE_METRICS_H_
