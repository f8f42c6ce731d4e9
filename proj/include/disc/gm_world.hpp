#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disc/sample_set.hpp"
#include "disc/schedule.hpp"

namespace disc {

/// Class condition fed to the denoiser. A clean class condition is the
/// one-hot vector e_c; the null condition (unconditional token) has no values.
struct ConditionVector {
  std::vector<double> values;
  bool is_null = false;

  static ConditionVector null() { return ConditionVector{{}, true}; }
  static ConditionVector one_hot(int c, int num_classes);

  bool operator==(const ConditionVector&) const = default;
};

struct MixtureComponent {
  double weight = 1.0;
  std::vector<double> mean;
  double std = 1.0;  // isotropic
};

struct ClassMixture {
  std::string name;
  std::vector<MixtureComponent> components;
};

/// Ground-truth class-conditional isotropic Gaussian mixture.
///
/// Provides exact data sampling, the closed-form noise prediction of the
/// diffused marginal (standing in for a trained denoiser) and the Bayes
/// posterior used as an oracle classifier. A non-null condition y is read as
/// class blend weights softmax(kappa * y); the null condition uses the priors.
class GaussianMixtureWorld {
 public:
  GaussianMixtureWorld(int dim, std::vector<ClassMixture> classes, std::vector<double> priors,
                       double kappa = 8.0, std::string name = {});

  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  double kappa() const { return kappa_; }
  std::span<const double> priors() const { return priors_; }
  const ClassMixture& mixture(int c) const;
  int class_index(const std::string& name) const;

  /// Class blend weights for a condition; sums to 1.
  std::vector<double> class_weights(const ConditionVector& cond) const;

  LabeledSampleSet sample_class_data(int c, std::size_t n, std::uint64_t seed) const;

  /// log p_t(x | cond) for the marginal at train timestep t.
  double log_density_t(const ConditionVector& cond, std::span<const double> x, int t,
                       const NoiseSchedule& schedule) const;
  /// Same density parameterised directly by alpha_bar (1 = clean data).
  double log_density(const ConditionVector& cond, std::span<const double> x, double alpha_bar) const;

  /// eps = -sqrt(1 - alpha_bar_t) * grad_x log p_t(x | cond).
  void analytic_eps(const ConditionVector& cond, std::span<const double> x, int t,
                    const NoiseSchedule& schedule, std::span<double> eps) const;
  std::vector<double> analytic_eps(const ConditionVector& cond, std::span<const double> x, int t,
                                   const NoiseSchedule& schedule) const;

  /// p(c | x) proportional to prior_c * p_0(x | c) on clean data.
  std::vector<double> oracle_posterior(std::span<const double> x) const;
  int oracle_argmax(std::span<const double> x) const;

  std::vector<double> class_mean(int c) const;
  /// Row-major D x D covariance of class c's clean mixture.
  std::vector<double> class_covariance(int c) const;

 private:
  void check_class(int c) const;
  void check_dim(std::size_t n) const;
  // Log of weight * N(x; sqrt(ab) mu, (ab s^2 + 1 - ab) I) for every component
  // with non-zero class weight. Returns the log-sum-exp.
  double component_logs(std::span<const double> class_w, std::span<const double> x, double ab,
                        std::vector<double>& logs) const;

  std::string name_;
  int dim_;
  double kappa_;
  std::vector<ClassMixture> classes_;
  std::vector<double> priors_;
};

/// Noise predictor queried by the sampler. Implementations must be pure and
/// safe to call concurrently.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual int dim() const = 0;
  virtual int num_classes() const = 0;
  virtual void predict(const ConditionVector& cond, std::span<const double> x, int t,
                       std::span<double> eps) const = 0;
};

class AnalyticDenoiser final : public NoisePredictor {
 public:
  AnalyticDenoiser(const GaussianMixtureWorld& world, const NoiseSchedule& schedule)
      : world_(world), schedule_(schedule) {}

  int dim() const override { return world_.dim(); }
  int num_classes() const override { return world_.num_classes(); }
  void predict(const ConditionVector& cond, std::span<const double> x, int t,
               std::span<double> eps) const override {
    world_.analytic_eps(cond, x, t, schedule_, eps);
  }

 private:
  const GaussianMixtureWorld& world_;
  const NoiseSchedule& schedule_;
};

/// Per-class counts n_c = round(n_max * IF^(-c / (C - 1))), clamped to >= 1.
std::vector<std::size_t> build_longtail(int num_classes, std::size_t n_max, double imbalance_factor);

}  // namespace disc
