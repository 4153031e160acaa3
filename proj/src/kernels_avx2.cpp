// AVX2/FMA variants.  This translation unit is the only one compiled with
// -mavx2 -mfma; it must not be entered unless cpuid reports support.

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <cstddef>

namespace ncs::kern::detail {

bool avx2_supported() {
#if defined(__GNUC__) || defined(__clang__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

static inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd();
  __m256d a3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4),
                         a1);
    a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8),
                         a2);
    a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12),
                         _mm256_loadu_pd(y + i + 12), a3);
  }
  for (; i + 4 <= n; i += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  }
  double s = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), y0);
    y1 = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i + 4), y1);
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scal_avx2(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

// 2x2 register tile over rows of G; dominant cost of the solver's Newton
// Hessian, so worth the modest unrolling.
void syrk_lower_avx2(const double* G, std::size_t p, std::size_t n, double* H,
                     std::size_t ldh) {
  std::size_t i = 0;
  for (; i + 2 <= p; i += 2) {
    const double* gi0 = G + i * n;
    const double* gi1 = G + (i + 1) * n;
    std::size_t j = 0;
    for (; j + 2 <= i + 1; j += 2) {
      const double* gj0 = G + j * n;
      const double* gj1 = G + (j + 1) * n;
      __m256d s00 = _mm256_setzero_pd(), s01 = _mm256_setzero_pd();
      __m256d s10 = _mm256_setzero_pd(), s11 = _mm256_setzero_pd();
      std::size_t k = 0;
      for (; k + 4 <= n; k += 4) {
        __m256d a0 = _mm256_loadu_pd(gi0 + k);
        __m256d a1 = _mm256_loadu_pd(gi1 + k);
        __m256d b0 = _mm256_loadu_pd(gj0 + k);
        __m256d b1 = _mm256_loadu_pd(gj1 + k);
        s00 = _mm256_fmadd_pd(a0, b0, s00);
        s01 = _mm256_fmadd_pd(a0, b1, s01);
        s10 = _mm256_fmadd_pd(a1, b0, s10);
        s11 = _mm256_fmadd_pd(a1, b1, s11);
      }
      double d00 = hsum(s00), d01 = hsum(s01), d10 = hsum(s10), d11 = hsum(s11);
      for (; k < n; ++k) {
        d00 += gi0[k] * gj0[k];
        d01 += gi0[k] * gj1[k];
        d10 += gi1[k] * gj0[k];
        d11 += gi1[k] * gj1[k];
      }
      H[i * ldh + j] += d00;
      H[i * ldh + j + 1] += d01;
      H[(i + 1) * ldh + j] += d10;
      H[(i + 1) * ldh + j + 1] += d11;
    }
    for (; j <= i; ++j) {
      const double* gj = G + j * n;
      H[i * ldh + j] += dot_avx2(gi0, gj, n);
      if (j <= i + 1) H[(i + 1) * ldh + j] += dot_avx2(gi1, gj, n);
    }
    H[(i + 1) * ldh + i + 1] += dot_avx2(gi1, gi1, n);
  }
  for (; i < p; ++i) {
    const double* gi = G + i * n;
    for (std::size_t j = 0; j <= i; ++j) {
      H[i * ldh + j] += dot_avx2(gi, G + j * n, n);
    }
  }
}

}  // namespace ncs::kern::detail

#endif  // x86_64
