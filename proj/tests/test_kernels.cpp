// Equivalence tests between the scalar reference kernels and the runtime-
// dispatched SIMD variants.  Both paths must agree to tight tolerances on
// random data, and exactly where the summation trees coincide.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ncs/kernels.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace ncs;

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

}  // namespace

TEST_CASE("dot product: scalar vs dispatched backend") {
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 16u, 33u, 255u, 1024u}) {
    auto a = random_vec(n, 11u + static_cast<unsigned>(n));
    auto b = random_vec(n, 97u + static_cast<unsigned>(n));

    kern::set_backend(kern::Backend::scalar);
    double ds = kern::dot(a.data(), b.data(), n);
    kern::set_backend(kern::Backend::avx2);  // no-op if unsupported
    double dv = kern::dot(a.data(), b.data(), n);
    kern::set_backend(kern::Backend::scalar);

    double ref = 0.0;
    for (std::size_t i = 0; i < n; ++i) ref += a[i] * b[i];
    CHECK(std::abs(ds - ref) <= 1e-12 * (1.0 + std::abs(ref)));
    CHECK(std::abs(dv - ds) <= 1e-12 * (1.0 + std::abs(ds)));
  }
}

TEST_CASE("axpy and scal: scalar vs dispatched backend") {
  for (std::size_t n : {1u, 5u, 8u, 13u, 64u, 301u}) {
    auto x = random_vec(n, 3u + static_cast<unsigned>(n));
    auto y0 = random_vec(n, 5u + static_cast<unsigned>(n));
    const double alpha = 0.37;

    auto ys = y0;
    kern::set_backend(kern::Backend::scalar);
    kern::axpy(alpha, x.data(), ys.data(), n);
    auto yv = y0;
    kern::set_backend(kern::Backend::avx2);
    kern::axpy(alpha, x.data(), yv.data(), n);
    kern::set_backend(kern::Backend::scalar);

    for (std::size_t i = 0; i < n; ++i) {
      CHECK(ys[i] == doctest::Approx(y0[i] + alpha * x[i]).epsilon(1e-14));
      CHECK(yv[i] == doctest::Approx(ys[i]).epsilon(1e-14));
    }

    auto zs = y0;
    kern::set_backend(kern::Backend::scalar);
    kern::scal(alpha, zs.data(), n);
    auto zv = y0;
    kern::set_backend(kern::Backend::avx2);
    kern::scal(alpha, zv.data(), n);
    kern::set_backend(kern::Backend::scalar);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(zs[i] == doctest::Approx(y0[i] * alpha).epsilon(1e-14));
      CHECK(zv[i] == zs[i]);
    }
  }
}

TEST_CASE("syrk_lower: scalar vs dispatched backend vs naive") {
  for (std::size_t p : {1u, 2u, 3u, 5u, 17u}) {
    for (std::size_t n : {1u, 2u, 4u, 6u, 9u, 24u}) {
      auto g = random_vec(p * n, 7u * static_cast<unsigned>(p * n + 1));
      std::vector<double> hs(p * p, 0.5), hv(p * p, 0.5), href(p * p, 0.5);

      // Naive reference: H(i,j) += sum_k G(i,k) G(j,k) = (G G^T)(i,j),
      // lower triangle only; G is p rows of length n.
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j <= i; ++j) {
          double s = 0.0;
          for (std::size_t k = 0; k < n; ++k) s += g[i * n + k] * g[j * n + k];
          href[i * p + j] += s;
        }

      kern::set_backend(kern::Backend::scalar);
      kern::syrk_lower(g.data(), p, n, hs.data(), p);
      kern::set_backend(kern::Backend::avx2);
      kern::syrk_lower(g.data(), p, n, hv.data(), p);
      kern::set_backend(kern::Backend::scalar);

      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < p; ++j) {
          if (j > i) {
            // Upper triangle untouched.
            CHECK(hs[i * p + j] == 0.5);
            CHECK(hv[i * p + j] == 0.5);
          } else {
            CHECK(hs[i * p + j] ==
                  doctest::Approx(href[i * p + j]).epsilon(1e-12));
            CHECK(hv[i * p + j] ==
                  doctest::Approx(href[i * p + j]).epsilon(1e-12));
          }
        }
    }
  }
}

TEST_CASE("backend dispatch reports a valid name") {
  kern::set_backend(kern::Backend::scalar);
  CHECK(std::string(kern::backend_name()) == "scalar");
  kern::set_backend(kern::Backend::avx2);
  const std::string name = kern::backend_name();
  CHECK((name == "avx2" || name == "scalar"));  // falls back if unsupported
  kern::set_backend(kern::Backend::scalar);
}
