#include "w2a/numerics/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "w2a/numerics/errors.h"

namespace w2a {
namespace {

void PutU32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t GetU32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string SerializeCheckpoint(const ParameterRecord& record) {
  nlohmann::json entries = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& [name, t] : record.entries()) {
    entries.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"offset", offset}});
    offset += t.size() * 4;
  }
  const std::string header = nlohmann::json{{"entries", entries}}.dump();
  std::string out(kCheckpointMagic);
  PutU32(out, static_cast<std::uint32_t>(header.size()));
  out += header;
  out.reserve(out.size() + offset);
  for (const auto& [name, t] : record.entries()) {
    for (std::size_t i = 0; i < t.size(); ++i) PutU32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
  }
  return out;
}

ParameterRecord ParseCheckpoint(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 8) != kCheckpointMagic) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const std::size_t header_len = GetU32(bytes, 8);
  if (12 + header_len > bytes.size()) throw FormatError("checkpoint header truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(12 + header_len);
  ParameterRecord record;
  try {
    for (const auto& entry : header.at("entries")) {
      if (entry.at("dtype") != "f32") throw FormatError("unsupported dtype " + entry.at("dtype").dump());
      Shape shape = entry.at("shape").get<Shape>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      const std::size_t count = ShapeProduct(shape);
      if (offset + count * 4 > payload.size()) throw FormatError("checkpoint payload truncated");
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) {
        data[i] = std::bit_cast<float>(GetU32(payload, offset + 4 * i));
      }
      record.Set(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return record;
}

void SaveCheckpoint(const std::filesystem::path& path, const ParameterRecord& record) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const std::string bytes = SerializeCheckpoint(record);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

ParameterRecord LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ParseCheckpoint(ss.str());
}

ParameterRecord RoundToFloat32(const ParameterRecord& record) {
  ParameterRecord out;
  for (const auto& [name, t] : record.entries()) {
    Tensor r = t;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = static_cast<float>(r[i]);
    out.Set(name, std::move(r));
  }
  return out;
}

}  // namespace w2a
