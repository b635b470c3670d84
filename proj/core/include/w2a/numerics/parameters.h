#ifndef W2A_NUMERICS_PARAMETERS_H_
#define W2A_NUMERICS_PARAMETERS_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "w2a/numerics/rng.h"
#include "w2a/numerics/tensor.h"

namespace w2a {

// Named trainable arrays. std::map keeps iteration lexicographic, which fixes
// both serialization order and optimizer accumulation order.
class ParameterRecord {
 public:
  using Map = std::map<std::string, Tensor, std::less<>>;

  void Set(const std::string& name, Tensor value);
  bool Contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }
  const Tensor& Get(std::string_view name) const;
  Tensor& GetMutable(std::string_view name);

  const Map& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t total_count() const;

  // Entries whose name starts with `prefix`, with the prefix kept.
  ParameterRecord WithPrefix(std::string_view prefix) const;
  // Copies every entry of `other` in; names must not collide.
  void Merge(const ParameterRecord& other);

  // FNV-1a over names, shapes and the raw bytes of every value.
  std::uint64_t Hash() const;

  friend bool operator==(const ParameterRecord&, const ParameterRecord&) = default;

 private:
  Map entries_;
};

// Weight-init helpers used by every network in the project.
Tensor UniformInit(Shape shape, double bound, Rng& rng);
// Glorot-uniform for an [in, out] weight matrix.
Tensor GlorotInit(std::size_t in, std::size_t out, Rng& rng);

}  // namespace w2a

#endif  // W2A_NUMERICS_PARAMETERS_H_
