#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "disc/gm_world.hpp"

namespace testutil {

inline disc::ClassMixture gaussian(std::vector<double> mean, double std, const char* name = "") {
  return disc::ClassMixture{name, {disc::MixtureComponent{1.0, std::move(mean), std}}};
}

inline disc::GaussianMixtureWorld single_gaussian(std::vector<double> mean, double std) {
  return disc::GaussianMixtureWorld(static_cast<int>(mean.size()), {gaussian(mean, std, "g")},
                                    {1.0});
}

// Classes placed at the given 2-D points with a shared std and uniform priors.
inline disc::GaussianMixtureWorld point_world(const std::vector<std::vector<double>>& means,
                                              double std, double kappa = 8.0) {
  std::vector<disc::ClassMixture> classes;
  for (std::size_t c = 0; c < means.size(); ++c) {
    classes.push_back(gaussian(means[c], std, ""));
    classes.back().name = std::string(1, static_cast<char>('A' + c));
  }
  std::vector<double> priors(means.size(), 1.0 / static_cast<double>(means.size()));
  return disc::GaussianMixtureWorld(static_cast<int>(means[0].size()), std::move(classes),
                                    std::move(priors), kappa);
}

inline bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

inline std::vector<double> sample_mean(std::span<const double> coords, int dim) {
  std::vector<double> m(static_cast<std::size_t>(dim), 0.0);
  const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) m[j] += coords[i * dim + j];
  for (double& v : m) v /= static_cast<double>(n);
  return m;
}

inline double trace_cov(std::span<const double> coords, int dim) {
  const auto m = sample_mean(coords, dim);
  const std::size_t n = coords.size() / static_cast<std::size_t>(dim);
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) t += (coords[i * dim + j] - m[j]) * (coords[i * dim + j] - m[j]);
  return t / static_cast<double>(n - 1);
}

}  // namespace testutil
