#ifndef RPDLAB_RNG_H_
#define RPDLAB_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>

namespace rpdlab {

// Identifier written into run manifests. Anything that changes the bit
// stream below must change this string.
inline constexpr std::string_view kRngAlgorithm =
    "mt19937_64; substream seed = splitmix64 chain over (master, a, b); "
    "uniform = top 53 bits * 2^-53; normal = Box-Muller (cosine branch)";

std::uint64_t splitmix64(std::uint64_t x);

// Deterministic substream seed for a (master, a, b) triple. Used as
// (master, session, treatment) by the simulator and (seed, k, restart)
// by the clustering code.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b);

// Thin wrapper pinning the conversions from raw engine output, since the
// standard distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1).
  double uniform();
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  double normal(double mean, double sd);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rpdlab

#endif  // RPDLAB_RNG_H_
