#pragma once

#include <cstddef>

// ============================================================================
// Dense inner kernels.
//
// Everything numeric in the library funnels through these loops.  Each kernel
// has a scalar reference implementation and an AVX2 variant; the backend is
// picked once at startup from cpuid and can be forced for testing (the
// equivalence suite runs both and compares bit-for-bit or to tight tolerance).
// ============================================================================

namespace ncs::kern {

enum class Backend { scalar, avx2 };

// Active backend.  Defaults to the best supported one; NCS_KERNEL=scalar in
// the environment or set_backend() forces a choice.
Backend backend();
void set_backend(Backend b);
const char* backend_name();

// y . x
double dot(const double* x, const double* y, std::size_t n);

// y += a*x
void axpy(double a, const double* x, double* y, std::size_t n);

// x *= a
void scal(double a, double* x, std::size_t n);

// H[i*ldh + j] += sum_k G[i*n+k]*G[j*n+k]  for j <= i < p  (lower triangle).
// G is p rows of length n, row-major.
void syrk_lower(const double* G, std::size_t p, std::size_t n, double* H,
                std::size_t ldh);

// C[i*ldc + ...] += a * A[i*lda + ...] row-block helper used by matmul:
// row_update accumulates y += a*x over a row (alias of axpy, kept for intent).
inline void row_update(double a, const double* x, double* y, std::size_t n) {
  axpy(a, x, y, n);
}

}  // namespace ncs::kern
