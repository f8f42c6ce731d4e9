#include <doctest.h>

#include <cstring>
#include <stdexcept>
#include <vector>

#include "disc/rng.hpp"
#include "disc/simd/kernels.hpp"
#include "helpers.hpp"

namespace simd = disc::simd;
using V = std::vector<double>;

namespace {

struct Outputs {
  V combine1, combine2, lerp, sq_diff, axpby, axpbypcz, unnoise, row_dist;
};

Outputs run_all(std::size_t n, std::uint64_t seed) {
  disc::Rng rng(seed);
  auto draw = [&] {
    V v(n);
    for (double& x : v) x = 3.0 * rng.normal();
    return v;
  };
  const V base = draw(), a = draw(), b = draw(), c = draw(), wp = draw(), wm = draw();
  Outputs o;
  o.combine1.resize(n);
  o.combine2.resize(n);
  o.lerp.resize(n);
  o.sq_diff.resize(n);
  o.axpby.resize(n);
  o.axpbypcz.resize(n);
  o.unnoise.resize(n);
  simd::combine1(base, wp, a, o.combine1);
  simd::combine2(base, wp, a, wm, b, o.combine2);
  simd::lerp(0.37, a, b, o.lerp);
  simd::sq_diff(a, b, o.sq_diff);
  simd::axpby(0.9, a, -1.3, b, o.axpby);
  simd::axpbypcz(0.2, a, 1.7, b, -0.4, c, o.axpbypcz);
  simd::unnoise(0.31, 0.95, a, b, o.unnoise);
  if (n % 3 == 0) {
    o.row_dist.resize(n / 3);
    simd::row_sq_dist(a, b, 3, o.row_dist);
  }
  return o;
}

}  // namespace

TEST_CASE("every available backend is bitwise equal to the scalar reference") {
  const auto backends = simd::available_backends();
  REQUIRE_FALSE(backends.empty());
  CHECK(backends.front() == simd::Backend::Scalar);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 33u, 1000u, 1023u}) {
    Outputs ref;
    {
      simd::ScopedBackend scalar(simd::Backend::Scalar);
      ref = run_all(n, 100 + n);
    }
    for (auto b : backends) {
      simd::ScopedBackend use(b);
      CAPTURE(simd::backend_name(b));
      CAPTURE(n);
      const auto out = run_all(n, 100 + n);
      CHECK(testutil::bitwise_equal(out.combine1, ref.combine1));
      CHECK(testutil::bitwise_equal(out.combine2, ref.combine2));
      CHECK(testutil::bitwise_equal(out.lerp, ref.lerp));
      CHECK(testutil::bitwise_equal(out.sq_diff, ref.sq_diff));
      CHECK(testutil::bitwise_equal(out.axpby, ref.axpby));
      CHECK(testutil::bitwise_equal(out.axpbypcz, ref.axpbypcz));
      CHECK(testutil::bitwise_equal(out.unnoise, ref.unnoise));
      CHECK(testutil::bitwise_equal(out.row_dist, ref.row_dist));
    }
  }
}

TEST_CASE("scalar kernels compute the documented formulas") {
  simd::ScopedBackend scalar(simd::Backend::Scalar);
  const V base{1, 2}, a{3, 5}, b{-1, 4}, w{2, 0.5}, wm{-1, 1};
  V out(2);
  simd::combine1(base, w, a, out);
  CHECK(out == V{5, 3.5});
  simd::combine2(base, w, a, wm, b, out);
  CHECK(out == V{7, 5.5});
  simd::lerp(0.25, a, b, out);
  CHECK(out == V{0, 4.25});
  simd::sq_diff(a, b, out);
  CHECK(out == V{16, 1});
  simd::unnoise(2.0, 1.0, a, b, out);
  CHECK(out == V{2, 0.5});
  V rows(1);
  simd::row_sq_dist(a, b, 2, rows);
  CHECK(rows[0] == 17.0);
  V expanded(4);
  simd::expand_rows(V{1.5, -2}, 2, expanded);
  CHECK(expanded == V{1.5, 1.5, -2, -2});
}

TEST_CASE("span front-ends check sizes") {
  V out(2);
  CHECK_THROWS_AS(simd::lerp(0.5, V{1, 2}, V{1}, out), std::invalid_argument);
  V three(3);
  CHECK_THROWS_AS(simd::sq_diff(V{1, 2}, V{1, 2}, three), std::invalid_argument);
}

TEST_CASE("scoped backend restores the previous one") {
  const auto before = simd::active().backend;
  {
    simd::ScopedBackend s(simd::Backend::Scalar);
    CHECK(simd::active().backend == simd::Backend::Scalar);
  }
  CHECK(simd::active().backend == before);
}
