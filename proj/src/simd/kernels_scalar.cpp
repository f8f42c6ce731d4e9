#include "disc/simd/kernels.hpp"

namespace disc::simd {
namespace {

void combine1(const double* base, const double* w, const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = base[i] + w[i] * (a[i] - base[i]);
}

void combine2(const double* base, const double* wp, const double* a, const double* wm,
              const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = wp[i] * (a[i] - base[i]);
    const double neg = wm[i] * (b[i] - base[i]);
    out[i] = (base[i] + pos) + neg;
  }
}

void lerp(double alpha, const double* a, const double* b, double* out, std::size_t n) {
  const double beta = 1.0 - alpha;
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * a[i] + beta * b[i];
}

void sq_diff(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    out[i] = d * d;
  }
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y, double c, const double* z,
              double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void unnoise(double a, double s, const double* x, const double* e, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = (x[i] - s * e[i]) / a;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::Scalar, combine1, combine2, lerp, sq_diff,
                                 axpby,           axpbypcz, unnoise};
  return table;
}

}  // namespace disc::simd
