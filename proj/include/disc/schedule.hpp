#pragma once

#include <span>
#include <vector>

namespace disc {

/// Forward diffusion process with a linear beta schedule.
///
/// alpha_bar[t] is the cumulative product of (1 - beta[i]) for i <= t and is
/// strictly decreasing. Immutable after construction.
class NoiseSchedule {
 public:
  /// Throws std::invalid_argument unless T >= 2 and 0 < beta_min <= beta_max < 1.
  static NoiseSchedule linear(int num_train_steps, double beta_min, double beta_max);

  int num_train_steps() const { return static_cast<int>(beta_.size()); }
  std::span<const double> beta() const { return beta_; }
  std::span<const double> alpha_bar() const { return alpha_bar_; }
  double alpha_bar(int t) const;

 private:
  NoiseSchedule(std::vector<double> beta, std::vector<double> alpha_bar)
      : beta_(std::move(beta)), alpha_bar_(std::move(alpha_bar)) {}

  std::vector<double> beta_;
  std::vector<double> alpha_bar_;
};

/// Uniform inference grid of N steps mapped onto train timesteps T-1 ... 0.
class InferenceGrid {
 public:
  InferenceGrid(const NoiseSchedule& schedule, int num_steps);

  int num_steps() const { return num_steps_; }
  int num_train_steps() const { return num_train_steps_; }

  /// Train timestep visited at `step`; step 0 is the noisiest.
  int train_timestep(int step) const;
  /// Train timestep of the step after `step`, or -1 past the final step.
  int next_timestep(int step) const;
  /// train_timestep(step) / T, so 1 at the noisiest end and 0 at the clean end.
  double normalized_time(int step) const;

 private:
  void check_step(int step) const;

  int num_steps_;
  int num_train_steps_;
};

double normalized_time(const NoiseSchedule& schedule, int num_steps, int step);

/// x_t = sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * eps
std::vector<double> forward_diffuse(std::span<const double> x0, int t, std::span<const double> eps,
                                    const NoiseSchedule& schedule);

}  // namespace disc
