#include "disc/gm_world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "disc/rng.hpp"

namespace disc {

ConditionVector ConditionVector::one_hot(int c, int num_classes) {
  if (c < 0 || c >= num_classes) throw std::out_of_range("class id out of range");
  ConditionVector y;
  y.values.assign(static_cast<std::size_t>(num_classes), 0.0);
  y.values[static_cast<std::size_t>(c)] = 1.0;
  return y;
}

GaussianMixtureWorld::GaussianMixtureWorld(int dim, std::vector<ClassMixture> classes,
                                           std::vector<double> priors, double kappa,
                                           std::string name)
    : name_(std::move(name)),
      dim_(dim),
      kappa_(kappa),
      classes_(std::move(classes)),
      priors_(std::move(priors)) {
  if (dim_ < 1) throw std::invalid_argument("world dimension must be positive");
  if (classes_.empty()) throw std::invalid_argument("world needs at least one class");
  if (priors_.size() != classes_.size()) {
    throw std::invalid_argument("one prior per class required");
  }
  if (!(kappa_ > 0.0)) throw std::invalid_argument("condition sharpness kappa must be positive");
  double prior_sum = 0.0;
  for (double p : priors_) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("class priors must lie in (0, 1]");
    prior_sum += p;
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw std::invalid_argument("class priors must sum to 1");
  for (const auto& cls : classes_) {
    if (cls.components.empty()) throw std::invalid_argument("class without mixture components");
    double wsum = 0.0;
    for (const auto& comp : cls.components) {
      if (!(comp.weight > 0.0 && comp.weight <= 1.0)) {
        throw std::invalid_argument("component weights must lie in (0, 1]");
      }
      if (!(comp.std > 0.0)) throw std::invalid_argument("component std must be positive");
      if (comp.mean.size() != static_cast<std::size_t>(dim_)) {
        throw std::invalid_argument("component mean has wrong dimension");
      }
      wsum += comp.weight;
    }
    if (std::abs(wsum - 1.0) > 1e-9) {
      throw std::invalid_argument("component weights of class '" + cls.name + "' must sum to 1");
    }
  }
}

void GaussianMixtureWorld::check_class(int c) const {
  if (c < 0 || c >= num_classes()) throw std::out_of_range("unknown class " + std::to_string(c));
}

void GaussianMixtureWorld::check_dim(std::size_t n) const {
  if (n != static_cast<std::size_t>(dim_)) throw std::invalid_argument("data dimension mismatch");
}

const ClassMixture& GaussianMixtureWorld::mixture(int c) const {
  check_class(c);
  return classes_[static_cast<std::size_t>(c)];
}

int GaussianMixtureWorld::class_index(const std::string& name) const {
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    if (classes_[c].name == name) return static_cast<int>(c);
  }
  throw std::out_of_range("unknown class name '" + name + "'");
}

std::vector<double> GaussianMixtureWorld::class_weights(const ConditionVector& cond) const {
  if (cond.is_null) return priors_;
  if (cond.values.size() != classes_.size()) {
    throw std::invalid_argument("condition length must equal the class count");
  }
  std::vector<double> w(cond.values.size());
  const double top = kappa_ * *std::max_element(cond.values.begin(), cond.values.end());
  double sum = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    w[c] = std::exp(kappa_ * cond.values[c] - top);
    sum += w[c];
  }
  for (double& v : w) v /= sum;
  return w;
}

LabeledSampleSet GaussianMixtureWorld::sample_class_data(int c, std::size_t n,
                                                         std::uint64_t seed) const {
  check_class(c);
  const auto& comps = classes_[static_cast<std::size_t>(c)].components;
  LabeledSampleSet out(dim_, num_classes());
  out.reserve(n);
  std::vector<double> x(static_cast<std::size_t>(dim_));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = Rng::stream(mix_keys(seed, static_cast<std::uint64_t>(c)), i, Stream::Data);
    double u = rng.uniform();
    std::size_t k = 0;
    while (k + 1 < comps.size() && u >= comps[k].weight) {
      u -= comps[k].weight;
      ++k;
    }
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = comps[k].mean[j] + comps[k].std * rng.normal();
    out.add(x, c, Provenance{}, seed);
  }
  return out;
}

double GaussianMixtureWorld::component_logs(std::span<const double> class_w,
                                            std::span<const double> x, double ab,
                                            std::vector<double>& logs) const {
  logs.clear();
  const double sab = std::sqrt(ab);
  const double half_d = 0.5 * static_cast<double>(dim_);
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    for (const auto& comp : classes_[c].components) {
      const double wt = class_w[c] * comp.weight;
      if (wt <= 0.0) {
        logs.push_back(-std::numeric_limits<double>::infinity());
        continue;
      }
      const double var = ab * comp.std * comp.std + (1.0 - ab);
      double r2 = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - sab * comp.mean[j];
        r2 += d * d;
      }
      const double lp =
          std::log(wt) - half_d * std::log(2.0 * std::numbers::pi * var) - 0.5 * r2 / var;
      logs.push_back(lp);
      top = std::max(top, lp);
    }
  }
  double sum = 0.0;
  for (double lp : logs) sum += std::exp(lp - top);
  return top + std::log(sum);
}

double GaussianMixtureWorld::log_density(const ConditionVector& cond, std::span<const double> x,
                                         double alpha_bar) const {
  check_dim(x.size());
  if (!(alpha_bar > 0.0 && alpha_bar <= 1.0)) throw std::invalid_argument("alpha_bar outside (0, 1]");
  std::vector<double> logs;
  return component_logs(class_weights(cond), x, alpha_bar, logs);
}

double GaussianMixtureWorld::log_density_t(const ConditionVector& cond, std::span<const double> x,
                                           int t, const NoiseSchedule& schedule) const {
  return log_density(cond, x, schedule.alpha_bar(t));
}

void GaussianMixtureWorld::analytic_eps(const ConditionVector& cond, std::span<const double> x,
                                        int t, const NoiseSchedule& schedule,
                                        std::span<double> eps) const {
  check_dim(x.size());
  check_dim(eps.size());
  const double ab = schedule.alpha_bar(t);
  const double sab = std::sqrt(ab);
  thread_local std::vector<double> logs;
  const double lse = component_logs(class_weights(cond), x, ab, logs);

  std::fill(eps.begin(), eps.end(), 0.0);
  std::size_t idx = 0;
  for (const auto& cls : classes_) {
    for (const auto& comp : cls.components) {
      const double r = std::exp(logs[idx++] - lse);
      if (r == 0.0) continue;
      const double var = ab * comp.std * comp.std + (1.0 - ab);
      // score contribution: -r * (x - sqrt(ab) mu) / var
      for (std::size_t j = 0; j < x.size(); ++j) eps[j] += r * (x[j] - sab * comp.mean[j]) / var;
    }
  }
  const double s = std::sqrt(1.0 - ab);
  for (double& e : eps) e *= s;
}

std::vector<double> GaussianMixtureWorld::analytic_eps(const ConditionVector& cond,
                                                       std::span<const double> x, int t,
                                                       const NoiseSchedule& schedule) const {
  std::vector<double> eps(x.size());
  analytic_eps(cond, x, t, schedule, eps);
  return eps;
}

std::vector<double> GaussianMixtureWorld::oracle_posterior(std::span<const double> x) const {
  check_dim(x.size());
  std::vector<double> logp(classes_.size());
  std::vector<double> logs;
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    std::vector<double> w(classes_.size(), 0.0);
    w[c] = 1.0;
    logp[c] = std::log(priors_[c]) + component_logs(w, x, 1.0, logs);
  }
  const double top = *std::max_element(logp.begin(), logp.end());
  double sum = 0.0;
  for (double& v : logp) {
    v = std::exp(v - top);
    sum += v;
  }
  for (double& v : logp) v /= sum;
  return logp;
}

int GaussianMixtureWorld::oracle_argmax(std::span<const double> x) const {
  const auto p = oracle_posterior(x);
  return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

std::vector<double> GaussianMixtureWorld::class_mean(int c) const {
  check_class(c);
  std::vector<double> m(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& comp : classes_[static_cast<std::size_t>(c)].components) {
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += comp.weight * comp.mean[j];
  }
  return m;
}

std::vector<double> GaussianMixtureWorld::class_covariance(int c) const {
  const auto mean = class_mean(c);
  const auto d = static_cast<std::size_t>(dim_);
  std::vector<double> cov(d * d, 0.0);
  for (const auto& comp : classes_[static_cast<std::size_t>(c)].components) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        const double outer = (comp.mean[i] - mean[i]) * (comp.mean[j] - mean[j]);
        cov[i * d + j] += comp.weight * (outer + (i == j ? comp.std * comp.std : 0.0));
      }
    }
  }
  return cov;
}

std::vector<std::size_t> build_longtail(int num_classes, std::size_t n_max, double imbalance_factor) {
  if (num_classes < 1) throw std::invalid_argument("need at least one class");
  if (n_max < 1) throw std::invalid_argument("n_max must be at least 1");
  if (!(imbalance_factor >= 1.0)) throw std::invalid_argument("imbalance factor must be >= 1");
  if (num_classes < 2 && imbalance_factor > 1.0) {
    throw std::invalid_argument("an imbalance factor above 1 needs at least 2 classes");
  }
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), n_max);
  if (num_classes < 2) return counts;
  const double nmax = static_cast<double>(n_max);
  for (int c = 0; c < num_classes; ++c) {
    const double expo = -static_cast<double>(c) / static_cast<double>(num_classes - 1);
    const double v = std::round(nmax * std::pow(imbalance_factor, expo));
    counts[static_cast<std::size_t>(c)] = std::max<std::size_t>(1, static_cast<std::size_t>(v));
  }
  return counts;
}

}  // namespace disc
