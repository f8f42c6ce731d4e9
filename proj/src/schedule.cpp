#include "disc/schedule.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "disc/simd/kernels.hpp"

namespace disc {

NoiseSchedule NoiseSchedule::linear(int num_train_steps, double beta_min, double beta_max) {
  if (num_train_steps < 2) throw std::invalid_argument("schedule needs at least 2 train steps");
  if (!(beta_min > 0.0 && beta_min < 1.0) || !(beta_max > 0.0 && beta_max < 1.0)) {
    throw std::invalid_argument("schedule betas must lie in (0, 1)");
  }
  if (beta_min > beta_max) throw std::invalid_argument("beta_min must not exceed beta_max");

  const auto n = static_cast<std::size_t>(num_train_steps);
  std::vector<double> beta(n);
  std::vector<double> alpha_bar(n);
  double prod = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(n - 1);
    beta[i] = beta_min + (beta_max - beta_min) * frac;
    prod *= 1.0 - beta[i];
    alpha_bar[i] = prod;
  }
  return NoiseSchedule(std::move(beta), std::move(alpha_bar));
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t >= num_train_steps()) {
    throw std::out_of_range("train timestep out of range: " + std::to_string(t));
  }
  return alpha_bar_[static_cast<std::size_t>(t)];
}

InferenceGrid::InferenceGrid(const NoiseSchedule& schedule, int num_steps)
    : num_steps_(num_steps), num_train_steps_(schedule.num_train_steps()) {
  if (num_steps < 1) throw std::invalid_argument("inference grid needs at least one step");
  if (num_steps > num_train_steps_) {
    throw std::invalid_argument("inference steps exceed train steps");
  }
}

void InferenceGrid::check_step(int step) const {
  if (step < 0 || step >= num_steps_) {
    throw std::out_of_range("inference step out of range: " + std::to_string(step));
  }
}

int InferenceGrid::train_timestep(int step) const {
  check_step(step);
  if (num_steps_ == 1) return num_train_steps_ - 1;
  // round((T-1) * (N-1-step) / (N-1)) in exact integer arithmetic
  const long long num = static_cast<long long>(num_train_steps_ - 1) * (num_steps_ - 1 - step);
  const long long den = num_steps_ - 1;
  return static_cast<int>((2 * num + den) / (2 * den));
}

int InferenceGrid::next_timestep(int step) const {
  check_step(step);
  return step + 1 < num_steps_ ? train_timestep(step + 1) : -1;
}

double InferenceGrid::normalized_time(int step) const {
  return static_cast<double>(train_timestep(step)) / static_cast<double>(num_train_steps_);
}

double normalized_time(const NoiseSchedule& schedule, int num_steps, int step) {
  return InferenceGrid(schedule, num_steps).normalized_time(step);
}

std::vector<double> forward_diffuse(std::span<const double> x0, int t, std::span<const double> eps,
                                    const NoiseSchedule& schedule) {
  if (x0.size() != eps.size()) throw std::invalid_argument("forward_diffuse: dimension mismatch");
  const double ab = schedule.alpha_bar(t);
  std::vector<double> out(x0.size());
  simd::axpby(std::sqrt(ab), x0, std::sqrt(1.0 - ab), eps, out);
  return out;
}

}  // namespace disc
