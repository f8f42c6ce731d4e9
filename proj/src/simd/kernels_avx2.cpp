#include <immintrin.h>

#include "disc/simd/kernels.hpp"

namespace disc::simd {
namespace {

constexpr std::size_t kLanes = 4;

void combine1(const double* base, const double* w, const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vb = _mm256_loadu_pd(base + i);
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), vb);
    _mm256_storeu_pd(out + i, _mm256_add_pd(vb, _mm256_mul_pd(_mm256_loadu_pd(w + i), d)));
  }
  for (; i < n; ++i) out[i] = base[i] + w[i] * (a[i] - base[i]);
}

void combine2(const double* base, const double* wp, const double* a, const double* wm,
              const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d vb = _mm256_loadu_pd(base + i);
    const __m256d pos =
        _mm256_mul_pd(_mm256_loadu_pd(wp + i), _mm256_sub_pd(_mm256_loadu_pd(a + i), vb));
    const __m256d neg =
        _mm256_mul_pd(_mm256_loadu_pd(wm + i), _mm256_sub_pd(_mm256_loadu_pd(b + i), vb));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_add_pd(vb, pos), neg));
  }
  for (; i < n; ++i) {
    const double pos = wp[i] * (a[i] - base[i]);
    const double neg = wm[i] * (b[i] - base[i]);
    out[i] = (base[i] + pos) + neg;
  }
}

void lerp(double alpha, const double* a, const double* b, double* out, std::size_t n) {
  const double beta = 1.0 - alpha;
  const __m256d va = _mm256_set1_pd(alpha);
  const __m256d vb = _mm256_set1_pd(beta);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d l = _mm256_mul_pd(va, _mm256_loadu_pd(a + i));
    const __m256d r = _mm256_mul_pd(vb, _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(l, r));
  }
  for (; i < n; ++i) out[i] = alpha * a[i] + beta * b[i];
}

void sq_diff(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    _mm256_storeu_pd(out + i, _mm256_mul_pd(d, d));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    out[i] = d * d;
  }
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d l = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    const __m256d r = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(l, r));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y, double c, const double* z,
              double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vb = _mm256_set1_pd(b);
  const __m256d vc = _mm256_set1_pd(c);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d l = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    const __m256d m = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
    const __m256d r = _mm256_mul_pd(vc, _mm256_loadu_pd(z + i));
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_add_pd(l, m), r));
  }
  for (; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void unnoise(double a, double s, const double* x, const double* e, double* out, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  const __m256d vs = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const __m256d num =
        _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vs, _mm256_loadu_pd(e + i)));
    _mm256_storeu_pd(out + i, _mm256_div_pd(num, va));
  }
  for (; i < n; ++i) out[i] = (x[i] - s * e[i]) / a;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Backend::Avx2, combine1, combine2, lerp, sq_diff,
                                 axpby,         axpbypcz, unnoise};
  return table;
}

}  // namespace disc::simd
