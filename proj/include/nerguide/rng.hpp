#ifndef NERGUIDE_RNG_HPP_
#define NERGUIDE_RNG_HPP_

#include <array>
#include <cstdint>
#include <vector>

namespace nerguide {

// Deterministic random generator (xoshiro256** seeded through splitmix64).
// All randomness in the library goes through this class rather than the
// standard <random> distributions, whose output is implementation-defined;
// this keeps seeded runs byte-identical across compilers.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent substream for (seed, stream [, item]). Substreams derived
  // from the same arguments are identical regardless of the order in which
  // they are created, which is what makes per-entity noise decisions
  // reproducible and order-independent.
  static Rng derive(std::uint64_t seed, std::uint64_t stream);
  static Rng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t item);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();

  // Uniform integer in [0, n), n > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (no state carried between calls).
  double normal();
  double normal(double mean, double stddev);

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[static_cast<std::size_t>(below(v.size()))];
  }

 private:
  std::array<std::uint64_t, 4> state_{};
};

// splitmix64 step; also used as a stand-alone mixing function for hashes.
std::uint64_t splitmix64(std::uint64_t& x);

}  // namespace nerguide

#endif  // NERGUIDE_RNG_HPP_
