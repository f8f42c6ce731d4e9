#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "disc/augment_train.hpp"
#include "helpers.hpp"

using namespace disc;
using V = std::vector<double>;

namespace {

LabeledSampleSet grid_set(int classes, std::size_t per_class, Source src, double offset = 0.0) {
  LabeledSampleSet s(2, classes);
  for (int c = 0; c < classes; ++c)
    for (std::size_t i = 0; i < per_class; ++i) {
      const V x{10.0 * c + 0.01 * static_cast<double>(i) + offset, 0.5 * c};
      s.add(x, c, {src, src == Source::Synthetic ? "p" : "", -1}, i);
    }
  return s;
}

TrainConfig quick(MixupMode mode, std::size_t batch) {
  TrainConfig cfg;
  cfg.mixup_mode = mode;
  cfg.batch_size = batch;
  cfg.epochs = 5;
  return cfg;
}

}  // namespace

TEST_CASE("uniformize_plan") {
  CHECK(uniformize_plan(std::vector<std::size_t>{7, 7, 7}) == std::vector<std::size_t>{0, 0, 0});
  CHECK(uniformize_plan(std::vector<std::size_t>{100, 1}) == std::vector<std::size_t>{0, 99});
  CHECK(uniformize_plan(std::vector<std::size_t>{200, 63, 20, 6, 2}) ==
        std::vector<std::size_t>{0, 137, 180, 194, 198});
  CHECK(uniformize_plan(std::vector<std::size_t>{0, 0}) == std::vector<std::size_t>{0, 0});
  CHECK_THROWS(uniformize_plan(std::vector<std::size_t>{}));
}

TEST_CASE("mixup") {
  const V xr{1, 2}, yr{1, 0}, xs{-3, 5}, ys{0, 1};
  auto [x1, y1] = mixup(xr, yr, xs, ys, 1.0);
  CHECK(x1 == xr);
  CHECK(y1 == yr);
  auto [x0, y0] = mixup(xr, yr, xs, ys, 0.0);
  CHECK(x0 == xs);
  CHECK(y0 == ys);
  auto [xh, yh] = mixup(xr, yr, xs, yr, 0.5);
  CHECK(yh == yr);
  CHECK(xh == V{-1, 3.5});
  CHECK_THROWS(mixup(xr, yr, V{1}, ys, 0.5));
  CHECK_THROWS(mixup(xr, yr, xs, ys, 1.5));
}

TEST_CASE("NONE batches are a shuffled pass over the real rows") {
  const auto real = grid_set(3, 10, Source::Real);
  Rng rng(1);
  const auto batches = build_epoch_batches(real, LabeledSampleSet(2, 3), quick(MixupMode::None, 8), rng);
  CHECK(batches.size() == 4);
  std::vector<std::size_t> seen;
  for (const auto& b : batches) {
    CHECK_FALSE(b.is_mixup);
    for (std::size_t i = 0; i < b.rows; ++i) {
      CHECK(b.synth_index[i] == -1);
      CHECK(b.lambda[i] == 1.0);
      seen.push_back(b.real_index[i]);
    }
  }
  std::sort(seen.begin(), seen.end());
  for (std::size_t i = 0; i < seen.size(); ++i) CHECK(seen[i] == i);
}

TEST_CASE("RANDOM turns half the batches into Mixup batches") {
  const auto real = grid_set(2, 50, Source::Real);  // 100 rows, 10 batches of 10
  const auto synth = grid_set(2, 7, Source::Synthetic, 0.5);
  Rng rng(2);
  const auto batches = build_epoch_batches(real, synth, quick(MixupMode::Random, 10), rng);
  CHECK(batches.size() == 10);
  CHECK(std::count_if(batches.begin(), batches.end(), [](auto& b) { return b.is_mixup; }) == 5);
}

TEST_CASE("ALL covers every synthetic row exactly once") {
  const auto real = grid_set(2, 100, Source::Real);
  const auto synth = grid_set(2, 500, Source::Synthetic, 0.3);
  Rng rng(3);
  const auto batches = build_epoch_batches(real, synth, quick(MixupMode::All, 512), rng);
  std::map<std::ptrdiff_t, int> uses;
  std::size_t mixed_rows = 0;
  for (const auto& b : batches) {
    if (!b.is_mixup) continue;
    for (std::size_t i = 0; i < b.rows; ++i) {
      ++uses[b.synth_index[i]];
      ++mixed_rows;
    }
  }
  CHECK(mixed_rows == 1000);
  CHECK(uses.size() == 1000);
  for (auto& [idx, n] : uses) CHECK(n == 1);
}

TEST_CASE("Mixup rows are convex combinations with simplex labels") {
  const auto real = grid_set(3, 20, Source::Real);
  const auto synth = grid_set(3, 30, Source::Synthetic, 0.7);
  Rng rng(4);
  for (auto mode : {MixupMode::Random, MixupMode::All}) {
    for (const auto& b : build_epoch_batches(real, synth, quick(mode, 16), rng)) {
      for (std::size_t i = 0; i < b.rows; ++i) {
        const double lam = b.lambda[i];
        CHECK(lam >= 0.0);
        CHECK(lam <= 1.0);
        const auto xr = real.x(b.real_index[i]);
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
          const double p = b.target[i * 3 + c];
          CHECK(p >= 0.0);
          sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        if (b.synth_index[i] < 0) {
          CHECK(b.x[i * 2] == xr[0]);
          continue;
        }
        const auto xs = synth.x(static_cast<std::size_t>(b.synth_index[i]));
        for (int j = 0; j < 2; ++j)
          CHECK(b.x[i * 2 + j] == doctest::Approx(lam * xr[j] + (1 - lam) * xs[j]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("Mixup without synthetic rows is rejected") {
  const auto real = grid_set(2, 5, Source::Real);
  Rng rng(5);
  CHECK_THROWS(build_epoch_batches(real, LabeledSampleSet(2, 2), quick(MixupMode::All, 4), rng));
  CHECK_THROWS(build_epoch_batches(LabeledSampleSet(2, 2), real, quick(MixupMode::None, 4), rng));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.lr = 0.0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.epochs = -1;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("separable data is learned") {
  LabeledSampleSet real(2, 2);
  Rng rng(6);
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    const V x{(c ? 1.0 : -1.0) + 0.4 * rng.normal(), 0.4 * rng.normal()};
    if (std::abs(x[0]) < 0.1) continue;
    real.add(x, x[0] > 0 ? 1 : 0, {}, 0);
  }
  TrainConfig cfg;
  cfg.batch_size = 32;
  const auto res = train_classifier(real, LabeledSampleSet(2, 2), cfg);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < real.size(); ++i) hit += res.model.predict(real.x(i)) == real.label(i);
  CHECK(static_cast<double>(hit) / real.size() >= 0.99);
  CHECK_FALSE(res.single_class);
  CHECK(res.epoch_loss.size() == 150);
  CHECK(res.epoch_loss.back() < res.epoch_loss.front());
}

TEST_CASE("zero epochs leave the classifier at chance") {
  const auto real = grid_set(4, 10, Source::Real);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto res = train_classifier(real, LabeledSampleSet(2, 4), cfg);
  const auto p = res.model.predict_proba(real.x(5));
  for (double v : p) CHECK(v == doctest::Approx(0.25));
  const auto rep = evaluate(res.model, real, std::vector<std::size_t>{10, 10, 10, 10});
  CHECK(rep.overall == doctest::Approx(25.0));
}

TEST_CASE("soft targets are matched by the trained predictions") {
  LabeledSampleSet real(2, 2);
  Rng rng(7);
  const double half[2] = {0.5, 0.5};
  for (int i = 0; i < 100; ++i) {
    const V x{rng.normal(), rng.normal()};
    real.add(x, i % 2, {}, 0, half);
  }
  TrainConfig cfg;
  cfg.batch_size = 20;
  const auto res = train_classifier(real, LabeledSampleSet(2, 2), cfg);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(res.model.predict_proba(real.x(i))[0] == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("single-class training is flagged") {
  const auto real = grid_set(1, 10, Source::Real);
  LabeledSampleSet two(2, 2);
  for (std::size_t i = 0; i < real.size(); ++i) two.add(real.x(i), 0, {}, 0);
  TrainConfig cfg;
  cfg.epochs = 2;
  CHECK(train_classifier(two, LabeledSampleSet(2, 2), cfg).single_class);
}

TEST_CASE("training is deterministic in the seed") {
  const auto real = grid_set(3, 15, Source::Real);
  const auto synth = grid_set(3, 9, Source::Synthetic, 0.2);
  auto cfg = quick(MixupMode::All, 8);
  cfg.seed = 5;
  const auto a = train_classifier(real, synth, cfg);
  const auto b = train_classifier(real, synth, cfg);
  CHECK(testutil::bitwise_equal(a.model.params(), b.model.params()));
  cfg.seed = 6;
  CHECK_FALSE(testutil::bitwise_equal(a.model.params(), train_classifier(real, synth, cfg).model.params()));
}

TEST_CASE("classifier save and load round trip") {
  for (auto kind : {ClassifierKind::Linear, ClassifierKind::Mlp}) {
    const auto real = grid_set(3, 15, Source::Real);
    auto cfg = quick(MixupMode::None, 8);
    cfg.classifier = kind;
    cfg.hidden = 6;
    const auto m = train_classifier(real, LabeledSampleSet(2, 3), cfg).model;
    std::stringstream ss;
    m.save(ss, "cafe");
    const auto back = Classifier::load(ss);
    CHECK(back.kind() == kind);
    CHECK(testutil::bitwise_equal(back.params(), m.params()));
    CHECK(testutil::bitwise_equal(back.input_shift(), m.input_shift()));
    CHECK(testutil::bitwise_equal(back.input_scale(), m.input_scale()));
    CHECK(testutil::bitwise_equal(back.predict_proba(real.x(3)), m.predict_proba(real.x(3))));
  }
}

TEST_CASE("evaluate") {
  // Points far apart so a hand-set linear model is perfect.
  LabeledSampleSet test(2, 5);
  for (int c = 0; c < 5; ++c)
    for (int i = 0; i < 4; ++i) test.add(V{static_cast<double>(c), 0.0}, c, {}, 0);
  Classifier perfect(ClassifierKind::Linear, 2, 5, 0, 0);
  auto& p = perfect.mutable_params();
  for (int c = 0; c < 5; ++c) {
    p[c * 2] = 100.0 * c;
    p[10 + c] = -50.0 * c * c;
  }
  const std::vector<std::size_t> counts{200, 63, 20, 6, 2};
  const auto rep = evaluate(perfect, test, counts);
  CHECK(rep.head == 100.0);
  CHECK(rep.tail == 100.0);
  CHECK(rep.overall == 100.0);
  CHECK(rep.is_head == std::vector<bool>{true, true, true, false, false});

  Classifier constant(ClassifierKind::Linear, 2, 5, 0, 0);
  constant.mutable_params()[10 + 2] = 1.0;
  const auto crep = evaluate(constant, test, counts);
  CHECK(crep.overall == doctest::Approx(20.0));
  CHECK(crep.per_class[2] == 100.0);
  CHECK(crep.head == doctest::Approx(100.0 / 3));
  CHECK(crep.tail == 0.0);
  double weighted = 0.0;
  for (double v : crep.per_class) weighted += v / 5;
  CHECK(crep.overall == doctest::Approx(weighted));

  LabeledSampleSet missing(2, 5);
  missing.add(V{0, 0}, 0, {}, 0);
  CHECK_THROWS(evaluate(perfect, missing, counts));
}

TEST_CASE("diversity score") {
  const auto w = testutil::point_world({{-40, 0}, {40, 0}, {0, 40}}, 1.0);
  LabeledSampleSet same(2, 3);
  for (int i = 0; i < 10; ++i) same.add(V{-40, 0}, 0, {}, 0);
  CHECK(diversity_score(same, w) == doctest::Approx(1.0));
  LabeledSampleSet split(2, 3);
  for (int i = 0; i < 10; ++i) split.add(V{i % 2 ? 40.0 : -40.0, 0}, 0, {}, 0);
  CHECK(diversity_score(split, w) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS(diversity_score(LabeledSampleSet(2, 3), w));
}

TEST_CASE("confusion rate") {
  const auto w = testutil::point_world({{-40, 0}, {40, 0}, {0, 40}}, 1.0);
  LabeledSampleSet at_plus(2, 3);
  for (int i = 0; i < 10; ++i) at_plus.add(V{-40, 0}, 0, {}, 0);
  CHECK(confusion_rate(at_plus, w, 1) == 0.0);
  auto from_minus = w.sample_class_data(1, 500, 2);
  CHECK(confusion_rate(from_minus, w, 1) > 0.999);
  CHECK_THROWS(confusion_rate(LabeledSampleSet(2, 3), w, 1));

  const auto conf = oracle_confusion(from_minus, w);
  CHECK(conf[1][1] == doctest::Approx(1.0));
}

TEST_CASE("mixup and classifier names round-trip") {
  for (auto m : {MixupMode::None, MixupMode::Random, MixupMode::All}) CHECK(parse_mixup_mode(mixup_mode_name(m)) == m);
  for (auto k : {ClassifierKind::Linear, ClassifierKind::Mlp})
    CHECK(parse_classifier_kind(classifier_kind_name(k)) == k);
}
