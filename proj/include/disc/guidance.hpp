#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "disc/gm_world.hpp"
#include "disc/rng.hpp"

namespace disc {

/// Condition-annealing schedule parameters.
struct AnnealConfig {
  double tau1 = 0.5;
  double tau2 = 0.9;
  double noise_scale = 0.1;  // s
  double psi = 1.0;          // rescale mixing factor

  void validate() const;
  bool operator==(const AnnealConfig&) const = default;
};

enum class GuidanceKind { Cfg, Cads, Ccfg, DiscDs };
enum class TauMode { Fixed, Dynamic };

// Which positive prediction the CCFG weight distance is measured against:
// the raw annealed-conditional estimate, or the CFG-combined output.
enum class DistanceSource { Conditional, CfgOutput };

std::string_view kind_name(GuidanceKind k);
GuidanceKind parse_kind(std::string_view s);
std::string_view tau_mode_name(TauMode m);
TauMode parse_tau_mode(std::string_view s);
std::string_view distance_source_name(DistanceSource d);
DistanceSource parse_distance_source(std::string_view s);

/// A guidance policy and its parameters.
///
/// CFG takes only w. CADS adds an annealing config. CCFG needs tau and may
/// carry an annealing config, in which case its conditions are annealed too.
/// DiSC-DS needs w, anneal, tau and alpha. Dynamic tau requires annealing.
struct GuidancePolicy {
  std::string name;
  GuidanceKind kind = GuidanceKind::Cfg;
  double w = 2.0;
  std::optional<AnnealConfig> anneal;
  std::optional<double> tau;
  TauMode tau_mode = TauMode::Fixed;
  std::optional<double> alpha;
  DistanceSource distance_source = DistanceSource::Conditional;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  bool uses_negative() const { return kind == GuidanceKind::Ccfg || kind == GuidanceKind::DiscDs; }
  bool operator==(const GuidancePolicy&) const = default;

  static GuidancePolicy cfg(double w);
  static GuidancePolicy cads(double w, AnnealConfig anneal = {});
  static GuidancePolicy ccfg(double w, double tau, std::optional<AnnealConfig> anneal = std::nullopt,
                             TauMode mode = TauMode::Fixed);
  static GuidancePolicy disc_ds(double w, AnnealConfig anneal = {}, double tau = 0.8,
                                double alpha = 0.8, TauMode mode = TauMode::Dynamic);
};

/// Annealing schedule: 1 below tau1, 0 above tau2, linear in between.
double gamma(double t_norm, const AnnealConfig& cfg);

/// y_hat = sqrt(gamma) * y + s * sqrt(1 - gamma) * n with n ~ N(0, I).
ConditionVector anneal_condition(const ConditionVector& y, double t_norm, const AnnealConfig& cfg,
                                 Rng& rng);

/// Standardises y_hat, maps it to (mu_in, sigma_in), and mixes with y_hat by psi.
/// Mean and (population) std are taken over the entries of the vector.
ConditionVector rescale_condition(const ConditionVector& y_hat, double mu_in, double sigma_in,
                                  double psi);

struct VectorMoments {
  double mean;
  double std;
};
VectorMoments moments(std::span<const double> v);

// ---- noise-prediction combiners (work on one vector or a flattened batch) ----

void cfg_combine(std::span<const double> eps_null, std::span<const double> eps_cond, double w,
                 std::span<double> out);
std::vector<double> cfg_combine(std::span<const double> eps_null, std::span<const double> eps_cond,
                                double w);

struct CcfgWeights {
  double plus;
  double minus;
};

/// Contrastive weights from squared distances d+ = |eps_null - eps_pos|^2 and
/// d- = |eps_null - eps_neg|^2 over the full prediction.
CcfgWeights ccfg_weights(std::span<const double> eps_null, std::span<const double> eps_pos,
                         std::span<const double> eps_neg, double w, double tau_eff);
CcfgWeights ccfg_weights_from_distances(double d_plus, double d_minus, double w, double tau_eff);

void ccfg_combine(std::span<const double> eps_null, std::span<const double> eps_pos,
                  std::span<const double> eps_neg, double w_plus, double w_minus,
                  std::span<double> out);
std::vector<double> ccfg_combine(std::span<const double> eps_null, std::span<const double> eps_pos,
                                 std::span<const double> eps_neg, double w_plus, double w_minus);

/// tau * sqrt(gamma_t).
double dynamic_tau(double tau, double gamma_t);
/// Effective CCFG sharpness for a policy at annealing level gamma_t.
double effective_tau(const GuidancePolicy& policy, double gamma_t);

/// alpha * eps_cads + (1 - alpha) * eps_ccfg; the endpoints return an input bitwise.
void disc_ds_noise(std::span<const double> eps_cads, std::span<const double> eps_ccfg, double alpha,
                   std::span<double> out);
std::vector<double> disc_ds_noise(std::span<const double> eps_cads,
                                  std::span<const double> eps_ccfg, double alpha);

}  // namespace disc
