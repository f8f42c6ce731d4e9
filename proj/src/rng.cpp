#include "disc/rng.hpp"

namespace disc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_keys(std::uint64_t a, std::uint64_t b) { return splitmix64(splitmix64(a) ^ b); }

Rng Rng::stream(std::uint64_t master, std::uint64_t index, Stream purpose) {
  return Rng(mix_keys(mix_keys(master, index), static_cast<std::uint64_t>(purpose)));
}

double Rng::beta_symmetric(double a) {
  std::gamma_distribution<double> g(a, 1.0);
  const double x = g(engine_);
  const double y = g(engine_);
  const double s = x + y;
  return s > 0.0 ? x / s : 0.5;
}

}  // namespace disc
