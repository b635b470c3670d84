#include "w2a/numerics/parameters.h"

#include <cmath>
#include <cstring>

#include "w2a/numerics/errors.h"

namespace w2a {
namespace {

void FnvBytes(std::uint64_t& h, const void* bytes, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

}  // namespace

void ParameterRecord::Set(const std::string& name, Tensor value) {
  entries_.insert_or_assign(name, std::move(value));
}

const Tensor& ParameterRecord::Get(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

Tensor& ParameterRecord::GetMutable(std::string_view name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParameterRecord::total_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

ParameterRecord ParameterRecord::WithPrefix(std::string_view prefix) const {
  ParameterRecord out;
  for (const auto& [name, t] : entries_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.Set(name, t);
  }
  return out;
}

void ParameterRecord::Merge(const ParameterRecord& other) {
  for (const auto& [name, t] : other.entries_) {
    if (Contains(name)) throw ContractError("duplicate parameter '" + name + "'");
    entries_.emplace(name, t);
  }
}

std::uint64_t ParameterRecord::Hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, t] : entries_) {
    FnvBytes(h, name.data(), name.size());
    for (std::size_t d : t.shape()) {
      const std::uint64_t d64 = d;
      FnvBytes(h, &d64, sizeof d64);
    }
    FnvBytes(h, t.data(), t.size() * sizeof(double));
  }
  return h;
}

Tensor UniformInit(Shape shape, double bound, Rng& rng) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.Uniform(-bound, bound);
  return t;
}

Tensor GlorotInit(std::size_t in, std::size_t out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in + out));
  return UniformInit({in, out}, bound, rng);
}

}  // namespace w2a
