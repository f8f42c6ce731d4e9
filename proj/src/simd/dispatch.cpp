#include <atomic>
#include <stdexcept>
#include <string>

#include "disc/simd/kernels.hpp"

namespace disc::simd {
namespace {

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
#if defined(DISC_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::Neon:
#if defined(DISC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table_for(Backend b) {
  switch (b) {
#if defined(DISC_HAVE_AVX2)
    case Backend::Avx2:
      return avx2_table();
#endif
#if defined(DISC_HAVE_NEON)
    case Backend::Neon:
      return neon_table();
#endif
    default:
      return scalar_table();
  }
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{&table_for(best_backend())};
  return slot;
}

void check_size(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw std::invalid_argument(std::string("dimension mismatch in ") + what + ": expected " +
                                std::to_string(expected) + ", got " + std::to_string(got));
  }
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

std::vector<Backend> available_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::Scalar, Backend::Avx2, Backend::Neon}) {
    if (cpu_supports(b)) out.push_back(b);
  }
  return out;
}

Backend best_backend() {
  if (cpu_supports(Backend::Avx2)) return Backend::Avx2;
  if (cpu_supports(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_backend(Backend b) {
  if (!cpu_supports(b)) {
    throw std::invalid_argument("SIMD backend not available on this host: " +
                                std::string(backend_name(b)));
  }
  active_slot().store(&table_for(b), std::memory_order_release);
}

ScopedBackend::ScopedBackend(Backend b) : previous_(active().backend) { set_backend(b); }
ScopedBackend::~ScopedBackend() { set_backend(previous_); }

void combine1(std::span<const double> base, std::span<const double> w, std::span<const double> a,
              std::span<double> out) {
  check_size(base.size(), w.size(), "combine1");
  check_size(base.size(), a.size(), "combine1");
  check_size(base.size(), out.size(), "combine1");
  active().combine1(base.data(), w.data(), a.data(), out.data(), out.size());
}

void combine2(std::span<const double> base, std::span<const double> wp, std::span<const double> a,
              std::span<const double> wm, std::span<const double> b, std::span<double> out) {
  for (std::size_t n : {wp.size(), a.size(), wm.size(), b.size(), out.size()}) {
    check_size(base.size(), n, "combine2");
  }
  active().combine2(base.data(), wp.data(), a.data(), wm.data(), b.data(), out.data(), out.size());
}

void lerp(double alpha, std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_size(a.size(), b.size(), "lerp");
  check_size(a.size(), out.size(), "lerp");
  active().lerp(alpha, a.data(), b.data(), out.data(), out.size());
}

void sq_diff(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_size(a.size(), b.size(), "sq_diff");
  check_size(a.size(), out.size(), "sq_diff");
  active().sq_diff(a.data(), b.data(), out.data(), out.size());
}

void axpby(double a, std::span<const double> x, double b, std::span<const double> y,
           std::span<double> out) {
  check_size(x.size(), y.size(), "axpby");
  check_size(x.size(), out.size(), "axpby");
  active().axpby(a, x.data(), b, y.data(), out.data(), out.size());
}

void axpbypcz(double a, std::span<const double> x, double b, std::span<const double> y, double c,
              std::span<const double> z, std::span<double> out) {
  check_size(x.size(), y.size(), "axpbypcz");
  check_size(x.size(), z.size(), "axpbypcz");
  check_size(x.size(), out.size(), "axpbypcz");
  active().axpbypcz(a, x.data(), b, y.data(), c, z.data(), out.data(), out.size());
}

void unnoise(double a, double s, std::span<const double> x, std::span<const double> e,
             std::span<double> out) {
  check_size(x.size(), e.size(), "unnoise");
  check_size(x.size(), out.size(), "unnoise");
  active().unnoise(a, s, x.data(), e.data(), out.data(), out.size());
}

void row_sq_dist(std::span<const double> a, std::span<const double> b, std::size_t dim,
                 std::span<double> out) {
  check_size(a.size(), b.size(), "row_sq_dist");
  if (dim == 0 || a.size() != out.size() * dim) {
    throw std::invalid_argument("row_sq_dist: data size is not rows * dim");
  }
  std::vector<double> sq(a.size());
  active().sq_diff(a.data(), b.data(), sq.data(), sq.size());
  for (std::size_t r = 0; r < out.size(); ++r) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += sq[r * dim + j];
    out[r] = acc;
  }
}

void expand_rows(std::span<const double> per_row, std::size_t dim, std::span<double> out) {
  check_size(per_row.size() * dim, out.size(), "expand_rows");
  for (std::size_t r = 0; r < per_row.size(); ++r) {
    for (std::size_t j = 0; j < dim; ++j) out[r * dim + j] = per_row[r];
  }
}

}  // namespace disc::simd
