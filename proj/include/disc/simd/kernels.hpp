#pragma once

// Elementwise arithmetic used by the guidance combiners and reverse steppers.
//
// Every kernel exists as a portable scalar reference and, where the host
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The active backend
// is picked once at startup from CPU features and can be overridden for
// testing. All variants perform the same IEEE operations in the same order
// (no FMA contraction), so their results are bitwise identical.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace disc::simd {

enum class Backend { Scalar, Avx2, Neon };

struct KernelTable {
  Backend backend;
  // out = base + w * (a - base), w per element
  void (*combine1)(const double* base, const double* w, const double* a, double* out, std::size_t n);
  // out = base + wp * (a - base) + wm * (b - base), weights per element
  void (*combine2)(const double* base, const double* wp, const double* a, const double* wm,
                   const double* b, double* out, std::size_t n);
  // out = alpha * a + (1 - alpha) * b
  void (*lerp)(double alpha, const double* a, const double* b, double* out, std::size_t n);
  // out = (a - b)^2
  void (*sq_diff)(const double* a, const double* b, double* out, std::size_t n);
  // out = a * x + b * y
  void (*axpby)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
  // out = a * x + b * y + c * z
  void (*axpbypcz)(double a, const double* x, double b, const double* y, double c, const double* z,
                   double* out, std::size_t n);
  // out = (x - s * e) / a
  void (*unnoise)(double a, double s, const double* x, const double* e, double* out, std::size_t n);
};

const KernelTable& scalar_table();
#if defined(DISC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(DISC_HAVE_NEON)
const KernelTable& neon_table();
#endif

std::string_view backend_name(Backend b);

// Backends compiled in AND supported by the running CPU.
std::vector<Backend> available_backends();

const KernelTable& active();

// Throws std::invalid_argument if the backend is unavailable on this host.
void set_backend(Backend b);
Backend best_backend();

// RAII override, used by equivalence tests.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

// Span front-ends; sizes are checked and mismatches throw std::invalid_argument.
void combine1(std::span<const double> base, std::span<const double> w, std::span<const double> a,
              std::span<double> out);
void combine2(std::span<const double> base, std::span<const double> wp, std::span<const double> a,
              std::span<const double> wm, std::span<const double> b, std::span<double> out);
void lerp(double alpha, std::span<const double> a, std::span<const double> b, std::span<double> out);
void sq_diff(std::span<const double> a, std::span<const double> b, std::span<double> out);
void axpby(double a, std::span<const double> x, double b, std::span<const double> y,
           std::span<double> out);
void axpbypcz(double a, std::span<const double> x, double b, std::span<const double> y, double c,
              std::span<const double> z, std::span<double> out);
void unnoise(double a, double s, std::span<const double> x, std::span<const double> e,
             std::span<double> out);

// Sum of squared differences per row of width `dim`, accumulated left to right.
void row_sq_dist(std::span<const double> a, std::span<const double> b, std::size_t dim,
                 std::span<double> out);

// Broadcasts one value per row across the row's `dim` elements.
void expand_rows(std::span<const double> per_row, std::size_t dim, std::span<double> out);

}  // namespace disc::simd
