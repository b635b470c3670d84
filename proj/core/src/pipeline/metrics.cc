#include "w2a/pipeline/metrics.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "w2a/numerics/errors.h"

namespace w2a::pipeline {
namespace {

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

std::optional<double> ParseField(std::string_view f, std::size_t line) {
  if (f.empty()) return std::nullopt;
  if (f == "nan") return std::nan("");
  if (f == "inf") return HUGE_VAL;
  if (f == "-inf") return -HUGE_VAL;
  double v = 0.0;
  const auto [end, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
  if (ec != std::errc() || end != f.data() + f.size()) {
    throw FormatError("line " + std::to_string(line) + ": bad number '" + std::string(f) + "'");
  }
  return v;
}

}  // namespace

std::string FormatNumber(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

std::string Stage1Csv(const std::vector<adapters::Stage1Metric>& log) {
  std::string out(kStage1Header);
  out += '\n';
  for (const auto& m : log) {
    out += std::to_string(m.step) + ',' + FormatNumber(m.l_recon) + ',' + FormatNumber(m.l_contrastive) +
           ',' + FormatNumber(m.pos_sim) + '\n';
  }
  return out;
}

std::string Stage2Csv(const std::vector<policy::Stage2Metric>& log) {
  std::string out(kStage2Header);
  out += '\n';
  for (const auto& m : log) {
    out += std::to_string(m.iter) + ',' + FormatNumber(m.loss) + ',' + FormatNumber(m.pos_sim) + ',';
    if (m.success_rate) out += FormatNumber(*m.success_rate);
    out += '\n';
  }
  return out;
}

MetricTable ParseMetricCsv(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  if (lines.empty()) throw FormatError("metric CSV is empty");
  if (lines[0] != kStage1Header && lines[0] != kStage2Header) {
    throw FormatError("unknown metric header '" + std::string(lines[0]) + "'");
  }
  MetricTable table;
  for (auto f : SplitFields(lines[0])) table.columns.emplace_back(f);
  if (lines.size() == 1) throw FormatError("metric CSV has no rows");
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = SplitFields(lines[i]);
    if (fields.size() != table.columns.size()) {
      throw FormatError("line " + std::to_string(i + 1) + ": expected " +
                        std::to_string(table.columns.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    std::vector<std::optional<double>> row;
    for (auto f : fields) row.push_back(ParseField(f, i + 1));
    if (!row[0]) throw FormatError("line " + std::to_string(i + 1) + ": missing x value");
    table.rows.push_back(std::move(row));
  }
  return table;
}

void WriteTextFile(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace w2a::pipeline
