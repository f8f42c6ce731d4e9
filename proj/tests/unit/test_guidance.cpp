#include <doctest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "disc/errors.hpp"
#include "disc/guidance.hpp"
#include "disc/rng.hpp"
#include "helpers.hpp"

using namespace disc;
using V = std::vector<double>;

TEST_CASE("gamma schedule") {
  const AnnealConfig cfg;
  CHECK(gamma(0.4, cfg) == 1.0);
  CHECK(gamma(0.95, cfg) == 0.0);
  CHECK(gamma(0.7, cfg) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(gamma(0.5, cfg) == 1.0);
  CHECK(gamma(0.9, cfg) == 0.0);
  CHECK(gamma(-3.0, cfg) == 1.0);
  CHECK(gamma(7.0, cfg) == 0.0);
}

TEST_CASE("gamma is non-increasing, continuous and clamped") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    AnnealConfig cfg;
    cfg.tau1 = 0.8 * rng.uniform();
    cfg.tau2 = cfg.tau1 + 1e-3 + (1.0 - cfg.tau1 - 1e-3) * rng.uniform();
    double prev = gamma(-0.1, cfg);
    for (int i = 0; i <= 1200; ++i) {
      const double t = -0.1 + 1.2 * i / 1200.0;
      const double g = gamma(t, cfg);
      CHECK(g >= 0.0);
      CHECK(g <= 1.0);
      CHECK(g <= prev);
      CHECK(prev - g <= 1e-3 / (cfg.tau2 - cfg.tau1) + 1e-12);
      prev = g;
    }
  }
}

TEST_CASE("anneal config validation") {
  AnnealConfig bad;
  bad.tau1 = 0.9;
  bad.tau2 = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.noise_scale = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = {};
  bad.psi = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("anneal_condition") {
  const AnnealConfig cfg;
  Rng rng(5);
  const auto y = ConditionVector::one_hot(2, 5);
  CHECK(anneal_condition(y, 0.3, cfg, rng) == y);

  AnnealConfig silent = cfg;
  silent.noise_scale = 0.0;
  const auto zero = anneal_condition(y, 0.99, silent, rng);
  for (double v : zero.values) CHECK(v == 0.0);

  double sq = 0.0;
  std::size_t n = 0;
  for (int i = 0; i < 10000; ++i) {
    for (double v : anneal_condition(y, 0.99, cfg, rng).values) {
      sq += v * v;
      ++n;
    }
  }
  CHECK(std::abs(std::sqrt(sq / n) / 0.1 - 1.0) < 0.02);
  CHECK_THROWS(anneal_condition(ConditionVector::null(), 0.99, cfg, rng));
}

TEST_CASE("rescale_condition") {
  const ConditionVector y_hat{{0.3, -1.2, 2.5, 0.1}, false};
  CHECK(rescale_condition(y_hat, 0.2, 0.4, 0.0) == y_hat);

  const auto full = rescale_condition(y_hat, 0.2, 0.4, 1.0);
  const auto m = moments(full.values);
  CHECK(std::abs(m.mean - 0.2) <= 1e-9);
  CHECK(std::abs(m.std - 0.4) <= 1e-9);

  const auto half = rescale_condition(ConditionVector{{2.0, 0.0}, false}, 0.0, 1.0, 0.5);
  CHECK(half.values[0] == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(half.values[1] == doctest::Approx(-0.5).epsilon(1e-12));

  CHECK_THROWS_AS(rescale_condition(ConditionVector{{1.0}, false}, 0.0, 1.0, 0.5), DegenerateInput);
  CHECK_NOTHROW(rescale_condition(ConditionVector{{1.0}, false}, 0.0, 1.0, 0.0));
}

TEST_CASE("cfg_combine") {
  const V null{0.3, -0.7, 1.1}, cond{1.9, 0.2, -0.4};
  CHECK(testutil::bitwise_equal(cfg_combine(null, cond, 1.0), cond));
  CHECK(testutil::bitwise_equal(cfg_combine(null, cond, 0.0), null));
  CHECK(cfg_combine(V{0, 0}, V{1, 2}, 2.0) == V{2, 4});
  CHECK_THROWS_AS(cfg_combine(V{0, 0}, V{1}, 2.0), std::invalid_argument);
}

TEST_CASE("ccfg weights") {
  for (double d : {0.0, 0.5, 10.0, 1e6}) {
    const auto wt = ccfg_weights_from_distances(d, 2 * d + 1, 3.0, 0.0);
    CHECK(wt.plus == 3.0);
    CHECK(wt.minus == -3.0);
  }
  const auto lim = ccfg_weights_from_distances(1e6, 1e6, 2.0, 1.0);
  CHECK(lim.plus == doctest::Approx(4.0));
  CHECK(lim.minus == doctest::Approx(0.0));

  const auto ex = ccfg_weights_from_distances(1.0, 1.0, 2.0, 0.8);
  CHECK(ex.plus == doctest::Approx(2.75989792451045).epsilon(1e-12));
  CHECK(ex.minus == doctest::Approx(-1.2401020754895502).epsilon(1e-12));
  CHECK(std::round(ex.plus * 1000) / 1000 == 2.760);
  CHECK(std::round(ex.minus * 1000) / 1000 == -1.240);

  // Distances computed from the predictions themselves.
  const V null{0, 0}, pos{1, 0}, neg{0, 1};
  const auto from_eps = ccfg_weights(null, pos, neg, 2.0, 0.8);
  CHECK(from_eps.plus == ex.plus);
  CHECK(from_eps.minus == ex.minus);
}

TEST_CASE("ccfg weight bounds and monotonicity") {
  Rng rng(99);
  for (int i = 0; i < 10000; ++i) {
    const double w = 0.01 + 10.0 * rng.uniform();
    const double tau = 5.0 * rng.uniform();
    const double dp = 5.0 * rng.uniform(), dm = 5.0 * rng.uniform();
    const auto a = ccfg_weights_from_distances(dp, dm, w, tau);
    CHECK(w <= a.plus);
    CHECK(a.plus < 2 * w);
    CHECK(-w <= a.minus);
    CHECK(a.minus <= 0.0);
    const auto b = ccfg_weights_from_distances(dp + rng.uniform(), dm + rng.uniform(), w, tau);
    CHECK(b.plus >= a.plus);
    CHECK(std::abs(b.minus) <= std::abs(a.minus));
  }
}

TEST_CASE("ccfg_combine") {
  const V null{0.2, -0.3}, pos{1.4, 0.9}, neg{-0.6, 0.5};
  const auto as_cfg = ccfg_combine(null, pos, neg, 2.5, 0.0);
  const auto cfg = cfg_combine(null, pos, 2.5);
  CHECK(as_cfg[0] == doctest::Approx(cfg[0]).epsilon(1e-15));
  CHECK(as_cfg[1] == doctest::Approx(cfg[1]).epsilon(1e-15));

  const auto cancel = ccfg_combine(null, pos, pos, 1.7, -1.7);
  CHECK(cancel[0] == doctest::Approx(null[0]).epsilon(1e-15));
  CHECK(cancel[1] == doctest::Approx(null[1]).epsilon(1e-15));

  CHECK(ccfg_combine(V{0, 0}, V{1, 0}, V{0, 1}, 2.0, -1.0) == V{2, -1});
}

TEST_CASE("dynamic tau") {
  CHECK(dynamic_tau(0.8, 0.0) == 0.0);
  CHECK(dynamic_tau(0.8, 1.0) == 0.8);
  CHECK(dynamic_tau(0.8, 0.25) == doctest::Approx(0.4).epsilon(1e-15));

  auto dyn = GuidancePolicy::disc_ds(2.0);
  CHECK(effective_tau(dyn, 0.25) == doctest::Approx(0.4));
  auto fixed = GuidancePolicy::disc_ds(2.0, {}, 0.8, 0.8, TauMode::Fixed);
  CHECK(effective_tau(fixed, 0.25) == 0.8);
}

TEST_CASE("dynamic tau at gamma zero reduces the CCFG branch") {
  const V null{0.1, 0.4}, pos{0.9, -0.2}, neg{0.5, 0.7};
  const double w = 2.0;
  const auto policy = GuidancePolicy::disc_ds(w);
  const auto wts = ccfg_weights(null, pos, neg, w, effective_tau(policy, 0.0));
  const auto out = ccfg_combine(null, pos, neg, wts.plus, wts.minus);
  for (int j = 0; j < 2; ++j) {
    const double expect = null[j] + w * (pos[j] - null[j]) - w * (neg[j] - null[j]);
    CHECK(out[j] == expect);
  }
}

TEST_CASE("disc_ds_noise") {
  const V cads{0.123456789, -9.87654321}, ccfg{3.3, 1e-300};
  CHECK(testutil::bitwise_equal(disc_ds_noise(cads, ccfg, 1.0), cads));
  CHECK(testutil::bitwise_equal(disc_ds_noise(cads, ccfg, 0.0), ccfg));
  const auto mid = disc_ds_noise(V{1, 1}, V{0, 2}, 0.8);
  CHECK(mid[0] == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(mid[1] == doctest::Approx(1.2).epsilon(1e-15));
  CHECK_THROWS_AS(disc_ds_noise(V{1, 1}, V{0}, 0.5), std::invalid_argument);
}

TEST_CASE("policy validation rejects forbidden field combinations") {
  CHECK_NOTHROW(GuidancePolicy::cfg(2.0).validate());
  CHECK_NOTHROW(GuidancePolicy::cads(2.0).validate());
  CHECK_NOTHROW(GuidancePolicy::ccfg(2.0, 0.8).validate());
  CHECK_NOTHROW(GuidancePolicy::disc_ds(2.0).validate());

  auto p = GuidancePolicy::cfg(2.0);
  p.anneal = AnnealConfig{};
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("anneal"), std::invalid_argument);
  p = GuidancePolicy::cads(2.0);
  p.anneal.reset();
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("anneal"), std::invalid_argument);
  p = GuidancePolicy::cads(2.0);
  p.alpha = 0.5;
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("alpha"), std::invalid_argument);
  p = GuidancePolicy::ccfg(2.0, 0.8);
  p.tau.reset();
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("tau"), std::invalid_argument);
  p = GuidancePolicy::ccfg(2.0, 0.8, std::nullopt, TauMode::Dynamic);
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("tau_mode"), std::invalid_argument);
  p = GuidancePolicy::disc_ds(2.0);
  p.alpha.reset();
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("alpha"), std::invalid_argument);
  p = GuidancePolicy::disc_ds(2.0);
  p.alpha = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = GuidancePolicy::cfg(0.0);
  CHECK_THROWS_WITH_AS(p.validate(), doctest::Contains("w"), std::invalid_argument);
}

TEST_CASE("enum names round-trip") {
  for (auto k : {GuidanceKind::Cfg, GuidanceKind::Cads, GuidanceKind::Ccfg, GuidanceKind::DiscDs})
    CHECK(parse_kind(kind_name(k)) == k);
  for (auto m : {TauMode::Fixed, TauMode::Dynamic}) CHECK(parse_tau_mode(tau_mode_name(m)) == m);
  for (auto d : {DistanceSource::Conditional, DistanceSource::CfgOutput})
    CHECK(parse_distance_source(distance_source_name(d)) == d);
  CHECK_THROWS(parse_kind("dpm"));
}
