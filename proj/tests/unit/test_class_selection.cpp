#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "disc/class_selection.hpp"
#include "disc/errors.hpp"
#include "helpers.hpp"

using namespace disc;
using V = std::vector<double>;

namespace {

const NoiseSchedule& sched() {
  static const auto s = NoiseSchedule::linear(1000, 1e-4, 0.02);
  return s;
}

// Reference set with rows placed exactly at the given points.
LabeledSampleSet at_points(const std::vector<std::vector<V>>& per_class) {
  const int dim = static_cast<int>(per_class[0][0].size());
  LabeledSampleSet s(dim, static_cast<int>(per_class.size()));
  for (std::size_t c = 0; c < per_class.size(); ++c)
    for (const auto& x : per_class[c]) s.add(x, static_cast<int>(c), {Source::Reference, "cads", -1}, 0);
  return s;
}

}  // namespace

TEST_CASE("cosine similarity") {
  CHECK(cosine_similarity(V{1.5, -2, 3}, V{1.5, -2, 3}) == doctest::Approx(1.0));
  CHECK(cosine_similarity(V{1, 0}, V{0, 4}) == 0.0);
  CHECK(cosine_similarity(V{1, 2}, V{2, 1}) == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(cosine_similarity(V{1, 2}, V{-1, -2}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine_similarity(V{0, 0}, V{1, 0}), DegenerateInput);
  CHECK_THROWS_AS(cosine_similarity(V{1, 0}, V{1, 0, 0}), std::invalid_argument);
}

TEST_CASE("feature extractors") {
  const auto id = FeatureExtractor::identity(3);
  CHECK(id.extract(V{1, 2, 3}) == V{1, 2, 3});
  const auto p = FeatureExtractor::random_projection(6, 4, 7);
  const V x{1, -2, 0.5, 3, 0, 1};
  CHECK(p.extract(x).size() == 4);
  CHECK(p.extract(x) == FeatureExtractor::random_projection(6, 4, 7).extract(x));
  CHECK_FALSE(p.extract(x) == FeatureExtractor::random_projection(6, 4, 8).extract(x));
  CHECK_THROWS(p.extract(V{1, 2}));
  CHECK(default_extractor(2).kind() == ExtractorKind::Identity);
  CHECK(default_extractor(6).kind() == ExtractorKind::RandomProjection);
}

TEST_CASE("mean_feature") {
  const auto id = FeatureExtractor::identity(2);
  const auto one = at_points({{{3, 4}}});
  CHECK(mean_feature(one, 0, id) == V{3, 4});
  const auto two = at_points({{{1, 0}, {0, 1}}, {{5, 5}}});
  CHECK(mean_feature(two, 0, id) == V{0.5, 0.5});
  const auto missing = at_points({{{1, 0}}, {}});
  CHECK_THROWS_AS(mean_feature(missing, 1, id), DataError);
}

TEST_CASE("mean feature of a reference set tracks the class mean") {
  const auto w = testutil::point_world({{6, 1}, {-4, 5}}, 1.0);
  const AnalyticDenoiser den(w, sched());
  SamplerConfig cfg;
  cfg.master_seed = 3;
  const auto ref = generate_reference_set(den, GuidancePolicy::cads(1.0), 10000, cfg, sched());
  CHECK(ref.size() == 20000);
  const auto id = FeatureExtractor::identity(2);
  for (int c = 0; c < 2; ++c) {
    const auto v = mean_feature(ref, c, id);
    const auto mu = w.class_mean(c);
    const double err = std::hypot(v[0] - mu[0], v[1] - mu[1]);
    CHECK(err < 0.05 * std::hypot(mu[0], mu[1]));
  }
}

TEST_CASE("generate_reference_set preconditions") {
  const auto w = testutil::point_world({{6, 1}, {-4, 5}, {0, -5}, {3, 3}, {-3, -3}}, 1.0);
  const AnalyticDenoiser den(w, sched());
  SamplerConfig cfg;
  CHECK_THROWS(generate_reference_set(den, GuidancePolicy::cads(2.0), 0, cfg, sched()));
  CHECK_THROWS(generate_reference_set(den, GuidancePolicy::cfg(2.0), 4, cfg, sched()));
  const auto ref = generate_reference_set(den, GuidancePolicy::cads(2.0), 3, cfg, sched());
  CHECK(ref.size() == 15);
  CHECK(ref.class_counts() == std::vector<std::size_t>(5, 3));
  CHECK(ref.provenance(0).source == Source::Reference);
}

TEST_CASE("two classes select each other") {
  const auto map = select_negatives(at_points({{{1, 0}}, {{0, 1}}}), FeatureExtractor::identity(2));
  CHECK(map.negative == std::vector<int>{1, 0});
}

TEST_CASE("nearest-direction pair is selected") {
  // A zero-norm class mean has no cosine similarity.
  const auto degenerate = at_points({{{0, 0}}, {{0.5, 0}}, {{10, 10}}});
  CHECK_THROWS_AS(select_negatives(degenerate, FeatureExtractor::identity(2)), DegenerateInput);

  const auto shifted = at_points({{{5, 0.2}}, {{5.5, 0}}, {{10, 10}}});
  const auto map = select_negatives(shifted, FeatureExtractor::identity(2));
  CHECK(map.negative[0] == 1);
  CHECK(map.negative[1] == 0);
  CHECK(map.negative[2] == 0);
}

TEST_CASE("ties break to the smallest id and are flagged") {
  const auto sym = at_points({{{2, 1, 1}}, {{1, 2, 1}}, {{1, 1, 2}}});
  const auto map = select_negatives(sym, FeatureExtractor::identity(3));
  CHECK(map.negative == std::vector<int>{1, 0, 0});
  CHECK(map.tie_broken[0]);
  CHECK(map.tie_broken[1]);
  CHECK(map.tie_broken[2]);
}

TEST_CASE("negative map invariants") {
  Rng rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const int C = 2 + static_cast<int>(rng.index(6));
    std::vector<std::vector<V>> pts(C);
    for (auto& cls : pts)
      for (int i = 0; i < 3; ++i) cls.push_back({rng.normal(), rng.normal(), rng.normal()});
    const auto map = select_negatives(at_points(pts), FeatureExtractor::identity(3));
    REQUIRE(map.negative.size() == static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      CHECK(map.negative[c] != c);
      CHECK(map.similarity[c][c] == doctest::Approx(1.0).epsilon(1e-12));
      double best = -2.0;
      for (int k = 0; k < C; ++k) {
        CHECK(std::abs(map.similarity[c][k] - map.similarity[k][c]) <= 1e-9);
        if (k != c) best = std::max(best, map.similarity[c][k]);
      }
      CHECK(map.similarity[c][map.negative[c]] == best);
    }
  }
}

TEST_CASE("negative map file round trip") {
  const auto map = select_negatives(at_points({{{1, 0}}, {{1, 1}}, {{0, 1}}}), FeatureExtractor::identity(2));
  std::stringstream ss;
  write_negative_map(ss, map, "deadbeef");
  std::string hash;
  const auto back = read_negative_map(ss, &hash);
  CHECK(hash == "deadbeef");
  CHECK(back.negative == map.negative);
  CHECK(back.similarity == map.similarity);
  CHECK(back.tie_broken == map.tie_broken);

  std::istringstream junk("{not json");
  CHECK_THROWS_AS(read_negative_map(junk), DataError);
}
