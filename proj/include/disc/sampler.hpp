#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "disc/gm_world.hpp"
#include "disc/guidance.hpp"
#include "disc/rng.hpp"
#include "disc/sample_set.hpp"
#include "disc/schedule.hpp"

namespace disc {

enum class Stepper { Ancestral, Ddim, Multistep2 };
enum class InitMode { PureNoise, FromReal };

std::string_view stepper_name(Stepper s);
Stepper parse_stepper(std::string_view s);
std::string_view init_mode_name(InitMode m);
InitMode parse_init_mode(std::string_view s);

struct SamplerConfig {
  int num_steps = 50;
  Stepper stepper = Stepper::Ddim;
  InitMode init = InitMode::PureNoise;
  double strength = 0.8;  // used when init == FromReal
  std::uint64_t master_seed = 0;
  int threads = 1;          // worker cap; never changes results
  std::size_t chunk_rows = 32;

  void validate(const NoiseSchedule& schedule) const;
};

struct InitResult {
  std::vector<double> x;
  int start_step;
};

/// First step of the grid whose normalised time is <= strength.
int start_step_for_strength(const InferenceGrid& grid, double strength);

/// Noises a real sample to the timestep matching `strength`; sampling then
/// runs from the returned step onwards.
InitResult init_from_real(std::span<const double> x0, double strength, const InferenceGrid& grid,
                          const NoiseSchedule& schedule, Rng& rng);

/// Reverse-process update over a batch of rows. Holds the history needed by
/// the second-order multistep solver, so use one instance per trajectory batch.
class ReverseStepper {
 public:
  ReverseStepper(Stepper kind, const InferenceGrid& grid, const NoiseSchedule& schedule);

  /// Advances `x` (rows * dim, in place) from grid step `step` to the next one.
  /// `z` is standard-normal noise of the same size, read only by the ancestral
  /// stepper on non-final steps; it may be empty otherwise.
  void step(std::span<double> x, std::span<const double> eps, int step, std::span<const double> z);

  /// Clean-data estimate computed during the last call.
  std::span<const double> last_x0() const { return x0_; }

 private:
  void ddim(std::span<double> x, std::span<const double> eps, double ab_t, double ab_prev);

  Stepper kind_;
  const InferenceGrid& grid_;
  const NoiseSchedule& schedule_;
  std::vector<double> x0_;
  std::vector<double> prev_x0_;
  double prev_lambda_ = 0.0;
  bool has_history_ = false;
};

/// Single-vector convenience wrapper around ReverseStepper (first-order
/// steppers only carry no history, so this is exact for them).
std::vector<double> reverse_step(std::span<const double> x_t, std::span<const double> eps_hat,
                                 int step, const InferenceGrid& grid, const NoiseSchedule& schedule,
                                 Stepper stepper, Rng& rng);

struct SampleRequest {
  int pos_class = 0;
  std::optional<int> neg_class;
  std::size_t count = 0;
  // Real rows used for FromReal initialisation; rows of pos_class are cycled.
  const LabeledSampleSet* init_pool = nullptr;
  Source source = Source::Synthetic;
};

/// Guided reverse diffusion. Row i draws from RNG substreams keyed by
/// (master_seed, i), so output is identical for any thread count or chunking.
LabeledSampleSet sample(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                        const SampleRequest& request, const SamplerConfig& cfg,
                        const NoiseSchedule& schedule);

LabeledSampleSet sample(const NoisePredictor& denoiser, const GuidancePolicy& policy, int pos_class,
                        std::optional<int> neg_class, const SamplerConfig& cfg,
                        const NoiseSchedule& schedule, std::size_t n);

/// Per-step trace of one row, used to compare trajectories across policies.
struct Trajectory {
  std::vector<std::vector<double>> states;  // x before each step, then the final x
};
Trajectory trace(const NoisePredictor& denoiser, const GuidancePolicy& policy,
                 const SampleRequest& request, const SamplerConfig& cfg,
                 const NoiseSchedule& schedule, std::size_t row);

}  // namespace disc
