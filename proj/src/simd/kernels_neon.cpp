#include <arm_neon.h>

#include "disc/simd/kernels.hpp"

namespace disc::simd {
namespace {

constexpr std::size_t kLanes = 2;

void combine1(const double* base, const double* w, const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t vb = vld1q_f64(base + i);
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vb);
    vst1q_f64(out + i, vaddq_f64(vb, vmulq_f64(vld1q_f64(w + i), d)));
  }
  for (; i < n; ++i) out[i] = base[i] + w[i] * (a[i] - base[i]);
}

void combine2(const double* base, const double* wp, const double* a, const double* wm,
              const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t vb = vld1q_f64(base + i);
    const float64x2_t pos = vmulq_f64(vld1q_f64(wp + i), vsubq_f64(vld1q_f64(a + i), vb));
    const float64x2_t neg = vmulq_f64(vld1q_f64(wm + i), vsubq_f64(vld1q_f64(b + i), vb));
    vst1q_f64(out + i, vaddq_f64(vaddq_f64(vb, pos), neg));
  }
  for (; i < n; ++i) {
    const double pos = wp[i] * (a[i] - base[i]);
    const double neg = wm[i] * (b[i] - base[i]);
    out[i] = (base[i] + pos) + neg;
  }
}

void lerp(double alpha, const double* a, const double* b, double* out, std::size_t n) {
  const double beta = 1.0 - alpha;
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(out + i, vaddq_f64(vmulq_f64(va, vld1q_f64(a + i)), vmulq_f64(vb, vld1q_f64(b + i))));
  }
  for (; i < n; ++i) out[i] = alpha * a[i] + beta * b[i];
}

void sq_diff(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    vst1q_f64(out + i, vmulq_f64(d, d));
  }
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    out[i] = d * d;
  }
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    vst1q_f64(out + i, vaddq_f64(vmulq_f64(va, vld1q_f64(x + i)), vmulq_f64(vb, vld1q_f64(y + i))));
  }
  for (; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y, double c, const double* z,
              double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vb = vdupq_n_f64(b);
  const float64x2_t vc = vdupq_n_f64(c);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t l = vmulq_f64(va, vld1q_f64(x + i));
    const float64x2_t m = vmulq_f64(vb, vld1q_f64(y + i));
    const float64x2_t r = vmulq_f64(vc, vld1q_f64(z + i));
    vst1q_f64(out + i, vaddq_f64(vaddq_f64(l, m), r));
  }
  for (; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void unnoise(double a, double s, const double* x, const double* e, double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  const float64x2_t vs = vdupq_n_f64(s);
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    const float64x2_t num = vsubq_f64(vld1q_f64(x + i), vmulq_f64(vs, vld1q_f64(e + i)));
    vst1q_f64(out + i, vdivq_f64(num, va));
  }
  for (; i < n; ++i) out[i] = (x[i] - s * e[i]) / a;
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Backend::Neon, combine1, combine2, lerp, sq_diff,
                                 axpby,         axpbypcz, unnoise};
  return table;
}

}  // namespace disc::simd
