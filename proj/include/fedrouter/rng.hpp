#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace fedrouter {

// splitmix64 finalizer; the basis for all seed derivation.
std::uint64_t splitmix64(std::uint64_t x);

// Folds a path of identifiers into a base seed. Used to give every
// (purpose, client, round, ...) combination its own independent stream.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

// Stream tags for derive_seed, so distinct purposes never collide.
namespace seed_tag {
inline constexpr std::uint64_t kData = 1;
inline constexpr std::uint64_t kLocalCluster = 2;
inline constexpr std::uint64_t kGlobalCluster = 3;
inline constexpr std::uint64_t kTrain = 4;
inline constexpr std::uint64_t kSilhouette = 5;
}  // namespace seed_tag

// Deterministic random source. All randomness in the library flows through
// this class so that results are bit-reproducible across platforms:
// mt19937_64 output is pinned by the standard, and uniform/normal/bounded
// draws below are implemented here rather than with the (implementation-
// defined) standard distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. The uniform for the log lives in
  // (0, 1], so log(0) cannot occur and sigma=0 callers get exact values.
  double normal();

  // Uniform integer in [0, n), rejection-debiased.
  std::uint64_t below(std::uint64_t n);

  // Fisher-Yates shuffle driven by below().
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fedrouter
