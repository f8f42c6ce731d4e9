#include "disc/guidance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "disc/errors.hpp"
#include "disc/simd/kernels.hpp"

namespace disc {

void AnnealConfig::validate() const {
  if (!(tau1 >= 0.0 && tau1 <= 1.0)) throw std::invalid_argument("anneal.tau1 must lie in [0, 1]");
  if (!(tau2 > tau1 && tau2 <= 1.0)) throw std::invalid_argument("anneal.tau2 must lie in (tau1, 1]");
  if (!(noise_scale >= 0.0)) throw std::invalid_argument("anneal.noise_scale must be >= 0");
  if (!(psi >= 0.0 && psi <= 1.0)) throw std::invalid_argument("anneal.psi must lie in [0, 1]");
}

std::string_view kind_name(GuidanceKind k) {
  switch (k) {
    case GuidanceKind::Cfg:
      return "cfg";
    case GuidanceKind::Cads:
      return "cads";
    case GuidanceKind::Ccfg:
      return "ccfg";
    case GuidanceKind::DiscDs:
      return "disc_ds";
  }
  return "?";
}

GuidanceKind parse_kind(std::string_view s) {
  if (s == "cfg") return GuidanceKind::Cfg;
  if (s == "cads") return GuidanceKind::Cads;
  if (s == "ccfg") return GuidanceKind::Ccfg;
  if (s == "disc_ds") return GuidanceKind::DiscDs;
  throw std::invalid_argument("unknown guidance kind '" + std::string(s) + "'");
}

std::string_view tau_mode_name(TauMode m) { return m == TauMode::Fixed ? "fixed" : "dynamic"; }

TauMode parse_tau_mode(std::string_view s) {
  if (s == "fixed") return TauMode::Fixed;
  if (s == "dynamic") return TauMode::Dynamic;
  throw std::invalid_argument("unknown tau_mode '" + std::string(s) + "'");
}

std::string_view distance_source_name(DistanceSource d) {
  return d == DistanceSource::Conditional ? "conditional" : "cfg_output";
}

DistanceSource parse_distance_source(std::string_view s) {
  if (s == "conditional") return DistanceSource::Conditional;
  if (s == "cfg_output") return DistanceSource::CfgOutput;
  throw std::invalid_argument("unknown distance_source '" + std::string(s) + "'");
}

void GuidancePolicy::validate() const {
  const std::string who = "policy '" + name + "': ";
  auto fail = [&](const std::string& msg) { throw std::invalid_argument(who + msg); };
  if (!(w > 0.0)) fail("w must be > 0");
  if (anneal) {
    try {
      anneal->validate();
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (tau && !(*tau >= 0.0)) fail("tau must be >= 0");
  if (alpha && !(*alpha >= 0.0 && *alpha <= 1.0)) fail("alpha must lie in [0, 1]");

  switch (kind) {
    case GuidanceKind::Cfg:
      if (anneal) fail("anneal is not allowed for kind cfg");
      if (tau) fail("tau is not allowed for kind cfg");
      if (alpha) fail("alpha is not allowed for kind cfg");
      if (tau_mode != TauMode::Fixed) fail("tau_mode is not allowed for kind cfg");
      break;
    case GuidanceKind::Cads:
      if (!anneal) fail("anneal is required for kind cads");
      if (tau) fail("tau is not allowed for kind cads");
      if (alpha) fail("alpha is not allowed for kind cads");
      if (tau_mode != TauMode::Fixed) fail("tau_mode is not allowed for kind cads");
      break;
    case GuidanceKind::Ccfg:
      if (!tau) fail("tau is required for kind ccfg");
      if (alpha) fail("alpha is not allowed for kind ccfg");
      if (tau_mode == TauMode::Dynamic && !anneal) fail("tau_mode dynamic requires anneal");
      break;
    case GuidanceKind::DiscDs:
      if (!anneal) fail("anneal is required for kind disc_ds");
      if (!tau) fail("tau is required for kind disc_ds");
      if (!alpha) fail("alpha is required for kind disc_ds");
      break;
  }
}

GuidancePolicy GuidancePolicy::cfg(double w) {
  GuidancePolicy p;
  p.name = "cfg";
  p.kind = GuidanceKind::Cfg;
  p.w = w;
  return p;
}

GuidancePolicy GuidancePolicy::cads(double w, AnnealConfig anneal) {
  GuidancePolicy p;
  p.name = "cads";
  p.kind = GuidanceKind::Cads;
  p.w = w;
  p.anneal = anneal;
  return p;
}

GuidancePolicy GuidancePolicy::ccfg(double w, double tau, std::optional<AnnealConfig> anneal,
                                    TauMode mode) {
  GuidancePolicy p;
  p.name = "ccfg";
  p.kind = GuidanceKind::Ccfg;
  p.w = w;
  p.tau = tau;
  p.anneal = anneal;
  p.tau_mode = mode;
  return p;
}

GuidancePolicy GuidancePolicy::disc_ds(double w, AnnealConfig anneal, double tau, double alpha,
                                       TauMode mode) {
  GuidancePolicy p;
  p.name = "disc_ds";
  p.kind = GuidanceKind::DiscDs;
  p.w = w;
  p.anneal = anneal;
  p.tau = tau;
  p.alpha = alpha;
  p.tau_mode = mode;
  return p;
}

double gamma(double t_norm, const AnnealConfig& cfg) {
  if (t_norm <= cfg.tau1) return 1.0;
  if (t_norm >= cfg.tau2) return 0.0;
  return (cfg.tau2 - t_norm) / (cfg.tau2 - cfg.tau1);
}

ConditionVector anneal_condition(const ConditionVector& y, double t_norm, const AnnealConfig& cfg,
                                 Rng& rng) {
  if (y.is_null) throw std::invalid_argument("the null condition is never annealed");
  const double g = gamma(t_norm, cfg);
  ConditionVector out;
  out.values.resize(y.values.size());
  // Draw the noise even at gamma == 1 so the stream advances identically every step.
  std::vector<double> noise(y.values.size());
  rng.fill_normal(noise);
  if (g == 1.0) {
    out.values = y.values;
    return out;
  }
  simd::axpby(std::sqrt(g), y.values, cfg.noise_scale * std::sqrt(1.0 - g), noise, out.values);
  return out;
}

VectorMoments moments(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("moments of an empty vector");
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  return {mean, std::sqrt(var)};
}

ConditionVector rescale_condition(const ConditionVector& y_hat, double mu_in, double sigma_in,
                                  double psi) {
  if (y_hat.is_null) throw std::invalid_argument("the null condition is never rescaled");
  if (psi == 0.0) return y_hat;
  const auto m = moments(y_hat.values);
  if (!(m.std > 0.0)) {
    throw DegenerateInput("cannot rescale a zero-variance condition (psi > 0)");
  }
  ConditionVector out;
  out.values.resize(y_hat.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double rescaled = (y_hat.values[i] - m.mean) / m.std * sigma_in + mu_in;
    out.values[i] = psi * rescaled + (1.0 - psi) * y_hat.values[i];
  }
  return out;
}

void cfg_combine(std::span<const double> eps_null, std::span<const double> eps_cond, double w,
                 std::span<double> out) {
  if (eps_null.size() != eps_cond.size() || eps_null.size() != out.size()) {
    throw std::invalid_argument("cfg_combine: dimension mismatch");
  }
  // Endpoints reproduce an input exactly.
  if (w == 1.0) {
    std::copy(eps_cond.begin(), eps_cond.end(), out.begin());
    return;
  }
  if (w == 0.0) {
    std::copy(eps_null.begin(), eps_null.end(), out.begin());
    return;
  }
  std::vector<double> ws(eps_null.size(), w);
  simd::combine1(eps_null, ws, eps_cond, out);
}

std::vector<double> cfg_combine(std::span<const double> eps_null, std::span<const double> eps_cond,
                                double w) {
  std::vector<double> out(eps_null.size());
  cfg_combine(eps_null, eps_cond, w, out);
  return out;
}

CcfgWeights ccfg_weights_from_distances(double d_plus, double d_minus, double w, double tau_eff) {
  const double ep = std::exp(-tau_eff * d_plus);
  const double em = std::exp(-tau_eff * d_minus);
  return {2.0 * w / (1.0 + ep), -2.0 * w * em / (1.0 + em)};
}

CcfgWeights ccfg_weights(std::span<const double> eps_null, std::span<const double> eps_pos,
                         std::span<const double> eps_neg, double w, double tau_eff) {
  if (eps_null.size() != eps_pos.size() || eps_null.size() != eps_neg.size()) {
    throw std::invalid_argument("ccfg_weights: dimension mismatch");
  }
  double dp = 0.0, dm = 0.0;
  simd::row_sq_dist(eps_null, eps_pos, eps_null.size(), std::span<double>(&dp, 1));
  simd::row_sq_dist(eps_null, eps_neg, eps_null.size(), std::span<double>(&dm, 1));
  return ccfg_weights_from_distances(dp, dm, w, tau_eff);
}

void ccfg_combine(std::span<const double> eps_null, std::span<const double> eps_pos,
                  std::span<const double> eps_neg, double w_plus, double w_minus,
                  std::span<double> out) {
  std::vector<double> wp(eps_null.size(), w_plus);
  std::vector<double> wm(eps_null.size(), w_minus);
  simd::combine2(eps_null, wp, eps_pos, wm, eps_neg, out);
}

std::vector<double> ccfg_combine(std::span<const double> eps_null, std::span<const double> eps_pos,
                                 std::span<const double> eps_neg, double w_plus, double w_minus) {
  std::vector<double> out(eps_null.size());
  ccfg_combine(eps_null, eps_pos, eps_neg, w_plus, w_minus, out);
  return out;
}

double dynamic_tau(double tau, double gamma_t) { return tau * std::sqrt(gamma_t); }

double effective_tau(const GuidancePolicy& policy, double gamma_t) {
  const double tau = policy.tau.value_or(0.0);
  return policy.tau_mode == TauMode::Dynamic ? dynamic_tau(tau, gamma_t) : tau;
}

void disc_ds_noise(std::span<const double> eps_cads, std::span<const double> eps_ccfg, double alpha,
                   std::span<double> out) {
  if (eps_cads.size() != eps_ccfg.size() || eps_cads.size() != out.size()) {
    throw std::invalid_argument("disc_ds_noise: dimension mismatch");
  }
  if (alpha == 1.0) {
    std::copy(eps_cads.begin(), eps_cads.end(), out.begin());
  } else if (alpha == 0.0) {
    std::copy(eps_ccfg.begin(), eps_ccfg.end(), out.begin());
  } else {
    simd::lerp(alpha, eps_cads, eps_ccfg, out);
  }
}

std::vector<double> disc_ds_noise(std::span<const double> eps_cads,
                                  std::span<const double> eps_ccfg, double alpha) {
  std::vector<double> out(eps_cads.size());
  disc_ds_noise(eps_cads, eps_ccfg, alpha, out);
  return out;
}

}  // namespace disc
