#ifndef W2A_NUMERICS_RNG_H_
#define W2A_NUMERICS_RNG_H_

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace w2a {

// Counter-based generator: draw i of a stream is Mix(key, i), so sequences are
// identical across runs and platforms. Split() derives independent named
// sub-streams, which is how each consumer gets its own stream off a run seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  Rng Split(std::string_view name) const;
  Rng Split(std::uint64_t index) const;

  std::uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n);
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  Rng(std::uint64_t seed, std::uint64_t key);

  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

// Fisher-Yates driven by `rng`; unlike std::shuffle the result is the same on
// every standard library.
void Shuffle(std::vector<std::size_t>& items, Rng& rng);

}  // namespace w2a

#endif  // W2A_NUMERICS_RNG_H_
