#include "ncs/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace ncs::kern {

namespace detail {

double dot_scalar(const double* x, const double* y, std::size_t n) {
  // Four accumulators so the scalar loop has the same summation tree as the
  // vector one; keeps scalar/AVX2 results close enough for tight equivalence
  // tolerances.
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += x[i] * y[i];
  return ((s0 + s1) + (s2 + s3)) + tail;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scal_scalar(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void syrk_lower_scalar(const double* G, std::size_t p, std::size_t n,
                       double* H, std::size_t ldh) {
  for (std::size_t i = 0; i < p; ++i) {
    const double* gi = G + i * n;
    for (std::size_t j = 0; j <= i; ++j) {
      H[i * ldh + j] += dot_scalar(gi, G + j * n, n);
    }
  }
}

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(const double* x, const double* y, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void scal_avx2(double a, double* x, std::size_t n);
void syrk_lower_avx2(const double* G, std::size_t p, std::size_t n, double* H,
                     std::size_t ldh);
bool avx2_supported();
#else
inline bool avx2_supported() { return false; }
inline double dot_avx2(const double* x, const double* y, std::size_t n) {
  return dot_scalar(x, y, n);
}
inline void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  axpy_scalar(a, x, y, n);
}
inline void scal_avx2(double a, double* x, std::size_t n) {
  scal_scalar(a, x, n);
}
inline void syrk_lower_avx2(const double* G, std::size_t p, std::size_t n,
                            double* H, std::size_t ldh) {
  syrk_lower_scalar(G, p, n, H, ldh);
}
#endif

Backend initial_backend() {
  if (const char* env = std::getenv("NCS_KERNEL")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::avx2;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = initial_backend();

}  // namespace detail

Backend backend() { return detail::g_backend; }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !detail::avx2_supported()) b = Backend::scalar;
  detail::g_backend = b;
}

const char* backend_name() {
  return detail::g_backend == Backend::avx2 ? "avx2" : "scalar";
}

double dot(const double* x, const double* y, std::size_t n) {
  return detail::g_backend == Backend::avx2 ? detail::dot_avx2(x, y, n)
                                            : detail::dot_scalar(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  if (detail::g_backend == Backend::avx2)
    detail::axpy_avx2(a, x, y, n);
  else
    detail::axpy_scalar(a, x, y, n);
}

void scal(double a, double* x, std::size_t n) {
  if (detail::g_backend == Backend::avx2)
    detail::scal_avx2(a, x, n);
  else
    detail::scal_scalar(a, x, n);
}

void syrk_lower(const double* G, std::size_t p, std::size_t n, double* H,
                std::size_t ldh) {
  if (detail::g_backend == Backend::avx2)
    detail::syrk_lower_avx2(G, p, n, H, ldh);
  else
    detail::syrk_lower_scalar(G, p, n, H, ldh);
}

}  // namespace ncs::kern
