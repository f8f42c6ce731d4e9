#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace disc {

// Purposes for keyed substreams. Separate streams keep the random draws of
// one branch (e.g. the negative condition) from shifting another's.
enum class Stream : std::uint64_t {
  Init = 1,
  PositiveAnneal = 2,
  NegativeAnneal = 3,
  StepNoise = 4,
  Data = 5,
  Batches = 6,
  Weights = 7,
  Projection = 8,
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent generator keyed by (master, index, purpose).
  static Rng stream(std::uint64_t master, std::uint64_t index, Stream purpose);

  double normal() { return normal_(engine_); }
  void fill_normal(std::span<double> out) {
    for (double& v : out) v = normal_(engine_);
  }
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  // Symmetric Beta(a, a) via two gamma draws.
  double beta_symmetric(double a);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace disc
