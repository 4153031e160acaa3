// Average-dwell-time certification: LMI assembly is checked against
// independent straight-line transcriptions of the two-mode block matrices,
// category tallies against closed-form counts, and the certifying drivers
// against a small closed-loop plant with known-good rates.  Reference
// numbers are frozen from hand arithmetic before the implementation ran.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ncs/det_switched.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

using namespace ncs;

namespace {

Matrix random_matrix(std::mt19937& rng, std::size_t r, std::size_t c) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = d(rng);
  return m;
}

Assignment random_assignment(const VariableRegistry& reg, std::uint32_t seed) {
  std::mt19937 rng(seed);
  Assignment a;
  for (std::size_t idx = 0; idx < reg.size(); ++idx) {
    const auto& in = reg.info(VarId{idx});
    Matrix m = random_matrix(rng, in.rows, in.cols);
    if (in.kind == VarKind::symmetric) m = 0.5 * (m + m.transpose());
    a.push_back(m);
  }
  return a;
}

const Matrix& value(const ConstraintSet& cs, const Assignment& a,
                    const std::string& name) {
  VarId v = cs.registry.find(name);
  REQUIRE(v.valid());
  return a[v.index];
}

// Writes block (bi, bj) of a block matrix with n x n blocks.
void put(Matrix& G, std::size_t bi, std::size_t bj, const Matrix& blk) {
  const std::size_t n = blk.rows();
  for (std::size_t r = 0; r < blk.rows(); ++r)
    for (std::size_t c = 0; c < blk.cols(); ++c)
      G(bi * n + r, bj * n + c) = blk(r, c);
}

// Mirrors the strictly-lower blocks of a block matrix from the upper ones.
Matrix mirror_lower(Matrix G, std::size_t n) {
  const std::size_t nb = G.rows() / n;
  for (std::size_t bi = 0; bi < nb; ++bi)
    for (std::size_t bj = bi + 1; bj < nb; ++bj)
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
          G(bj * n + r, bi * n + c) = G(bi * n + c, bj * n + r);
  return G;
}

void check_close(const Matrix& got, const Matrix& want, double tol) {
  REQUIRE(got.rows() == want.rows());
  REQUIRE(got.cols() == want.cols());
  double scale = 1.0 + want.max_abs();
  for (std::size_t r = 0; r < got.rows(); ++r)
    for (std::size_t c = 0; c < got.cols(); ++c)
      CHECK(std::abs(got(r, c) - want(r, c)) <= tol * scale);
}

Plant motor_plant() {
  return Plant(Matrix{{0.0, 1.0}, {0.0, -10.0}}, Matrix{{0.0}, {0.024}});
}

// Published three-mode gain schedule for the motor plant (20/70/200/300 ms).
Gains motor_gains() {
  Gains g;
  g.K.push_back(Matrix{{-1421.0, -138.9}});
  g.K.push_back(Matrix{{-1035.9, -101.5}});
  g.K.push_back(Matrix{{-757.09, -72.71}});
  return g;
}

DelayGrid motor_grid() { return DelayGrid({0.020, 0.070, 0.200, 0.300}); }

}  // namespace

// ---------------------------------------------------------------------------
// dwell_time_bound
// ---------------------------------------------------------------------------

TEST_CASE("dwell time bound matches hand-computed references") {
  // ln(1.4) = 0.33647223662121289; frozen quotients:
  CHECK(dwell_time_bound(1.4, 2.78) == doctest::Approx(0.1210331786).epsilon(1e-8));
  CHECK(dwell_time_bound(1.4, 0.9) == doctest::Approx(0.3738580407).epsilon(1e-8));
  // Two-decimal and four-decimal roundings used in reports.
  CHECK(std::round(dwell_time_bound(1.4, 2.78) * 100.0) / 100.0 == doctest::Approx(0.12));
  CHECK(std::round(dwell_time_bound(1.4, 0.9) * 10000.0) / 10000.0 == doctest::Approx(0.3739));
  // mu = 1: no jump penalty, zero dwell time required.
  CHECK(dwell_time_bound(1.0, 0.3) == 0.0);
  CHECK(dwell_time_bound(1.0, 7.0) == 0.0);
}

TEST_CASE("dwell time bound is monotone in both arguments") {
  double prev = dwell_time_bound(1.4, 0.5);
  for (double a : {0.75, 1.0, 2.0, 4.0, 9.0}) {
    double cur = dwell_time_bound(1.4, a);
    CHECK(cur < prev);
    prev = cur;
  }
  prev = dwell_time_bound(1.0, 2.0);
  for (double mu : {1.1, 1.4, 2.0, 5.0}) {
    double cur = dwell_time_bound(mu, 2.0);
    CHECK(cur > prev);
    prev = cur;
  }
}

TEST_CASE("dwell time bound rejects bad arguments") {
  CHECK_THROWS_AS(dwell_time_bound(0.99, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(dwell_time_bound(1.4, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dwell_time_bound(1.4, -1.0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Category tallies and dimensions
// ---------------------------------------------------------------------------

namespace {

SwitchedDelaySystem toy_system(std::size_t M, std::size_t n,
                               std::uint32_t seed) {
  std::mt19937 rng(seed);
  Matrix A = random_matrix(rng, n, n);
  std::vector<Matrix> delayed;
  for (std::size_t i = 0; i < M; ++i) delayed.push_back(random_matrix(rng, n, n));
  std::vector<double> bounds;
  for (std::size_t k = 0; k <= M; ++k) bounds.push_back(0.02 + 0.05 * k);
  return SwitchedDelaySystem(A, delayed, DelayGrid(bounds));
}

}  // namespace

TEST_CASE("analysis program tallies follow the closed-form counts") {
  for (std::size_t M : {1u, 2u, 3u}) {
    for (std::size_t n : {1u, 2u, 6u}) {
      auto sys = toy_system(M, n, 1000 + 10 * M + n);
      auto prob = build_analysis_lmis(sys, 0.7, 1.4);
      const auto& c = prob.counts;
      CHECK(c.main == 2 * M);
      CHECK(c.main_dim == 2 * (2 * M + 1) * n);
      CHECK(c.reciprocal == M * M);
      CHECK(c.positivity == M * (4 * M + 1));
      CHECK(c.coupling == M * (4 * M * M - 3 * M - 1));
      CHECK(c.variables == M * (5 * M + 1));
      CHECK(prob.cs.lmis.size() ==
            c.main + c.reciprocal + c.positivity + c.coupling);
      for (std::size_t idx = 0; idx < c.main; ++idx)
        CHECK(prob.cs.lmis[idx].dim() == c.main_dim);
    }
  }
}

TEST_CASE("design program tallies follow the closed-form counts") {
  for (std::size_t M : {1u, 2u, 3u}) {
    for (std::size_t n : {1u, 2u, 6u}) {
      std::mt19937 rng(77 + M + n);
      Plant plant(random_matrix(rng, n, n), random_matrix(rng, n, 1));
      std::vector<double> bounds;
      for (std::size_t k = 0; k <= M; ++k) bounds.push_back(0.02 + 0.05 * k);
      DelayGrid grid(bounds);

      auto prob = build_synthesis_lmis(plant, grid, 0.7, 1.4);
      const auto& c = prob.counts;
      CHECK(c.main == 2 * M);
      CHECK(c.main_dim == 2 * (2 * M + 2) * n);
      CHECK(c.reciprocal == M * M);
      CHECK(c.positivity == M * (4 * M + 1));
      // With the skew family coupled, links + convexity blocks meet the
      // documented total M(5M^2 - 3M - 1).
      CHECK(c.coupling + c.reciprocal == M * (5 * M * M - 3 * M - 1));
      CHECK(c.variables == M * (5 * M + 3));
      CHECK(prob.cs.lmis.size() ==
            c.main + c.reciprocal + c.positivity + c.coupling);

      SynthesisStructure plain;
      plain.couple_z_family = false;
      auto prob2 = build_synthesis_lmis(plant, grid, 0.7, 1.4, plain);
      CHECK(prob2.counts.coupling == M * (M - 1) * (4 * M + 1));
    }
  }
}

TEST_CASE("two-mode tallies match the worked examples") {
  auto sys = toy_system(2, 2, 42);
  auto prob = build_analysis_lmis(sys, 1.0, 1.4);
  CHECK(prob.counts.main == 4);
  CHECK(prob.counts.main_dim == 20);
  CHECK(prob.counts.reciprocal == 4);
  CHECK(prob.counts.coupling == 18);
  CHECK(prob.counts.variables == 22);

  auto sys3 = toy_system(3, 2, 43);
  CHECK(build_analysis_lmis(sys3, 1.0, 1.4).counts.main == 6);
  CHECK(build_analysis_lmis(sys3, 1.0, 1.4).counts.main_dim == 28);

  std::mt19937 rng(7);
  Plant p2(random_matrix(rng, 2, 2), random_matrix(rng, 2, 1));
  DelayGrid g2({0.02, 0.07, 0.30});
  CHECK(build_synthesis_lmis(p2, g2, 1.0, 1.4).counts.main_dim == 24);

  Plant p6(random_matrix(rng, 6, 6), random_matrix(rng, 6, 1));
  auto prob6 = build_synthesis_lmis(p6, g2, 1.0, 1.4);
  CHECK(prob6.counts.main_dim == 72);
  CHECK(prob6.counts.variables == 26);
}

TEST_CASE("builders reject invalid rates") {
  auto sys = toy_system(2, 2, 5);
  CHECK_THROWS_AS(build_analysis_lmis(sys, -0.1, 1.4), std::invalid_argument);
  CHECK_THROWS_AS(build_analysis_lmis(sys, 1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(build_analysis_lmis(sys, 1.0, 0.5), std::invalid_argument);
  Plant plant = motor_plant();
  DelayGrid grid({0.02, 0.07, 0.30});
  CHECK_THROWS_AS(build_synthesis_lmis(plant, grid, -1.0, 1.4),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_synthesis_lmis(plant, grid, 1.0, 1.0),
                  std::invalid_argument);
}

// ---------------------------------------------------------------------------
// Golden transcription: two-mode analysis program, written out block by
// block with no shared code, evaluated at a seeded random assignment.
// ---------------------------------------------------------------------------

TEST_CASE("two-mode analysis vertex matrices match a straight-line build") {
  const std::size_t n = 2;
  const double alpha = 1.3, mu = 1.7;
  const double h1 = 0.02, h2 = 0.07, h3 = 0.30;
  const double d1 = h2 - h1, d2 = h3 - h2;

  std::mt19937 rng(2024);
  Matrix A = random_matrix(rng, n, n);
  Matrix A1 = random_matrix(rng, n, n);
  Matrix A2 = random_matrix(rng, n, n);
  SwitchedDelaySystem sys(A, {A1, A2}, DelayGrid({h1, h2, h3}));

  auto prob = build_analysis_lmis(sys, alpha, mu);
  const ConstraintSet& cs = prob.cs;
  Assignment a = random_assignment(cs.registry, 99);

  const Matrix I = Matrix::identity(n);
  const Matrix Aa = alpha * I + A;
  const Matrix Aat = Aa.transpose();
  const Matrix Z2(n, n);  // zero block

  // Per-mode ingredient fetch.
  auto P = [&](int i) { return value(cs, a, "P_" + std::to_string(i)); };
  auto Q = [&](int i, int k) {
    return value(cs, a, "Q_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto R = [&](int i, int k) {
    return value(cs, a, "R_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto S = [&](int i, int k) {
    return value(cs, a, "S_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto T = [&](int i, int k) {
    return value(cs, a, "T_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto Z = [&](int i, int k) {
    return value(cs, a, "Z_" + std::to_string(i) + "_" + std::to_string(k));
  };

  for (int i = 1; i <= 2; ++i) {
    for (int j = 1; j <= 2; ++j) {
      // Vertex scaling: interval i, endpoint j -> boundary index i + j - 1.
      const double bounds[4] = {0.0, h1, h2, h3};
      const double rho = std::exp(alpha * bounds[i + j - 1]);
      const Matrix Av = rho * (i == 1 ? A1 : A2);
      const Matrix Avt = Av.transpose();

      Matrix Phi = P(i) * Aa + Aat * P(i);
      for (int k = 1; k <= 2; ++k) Phi = Phi + Q(i, k) + R(i, k) - S(i, k);
      Matrix U1 = T(i, 1) - Z(i, 1);
      Matrix U2 = T(i, 2) - Z(i, 2);
      Matrix Xi1 = Q(i, 1) + T(i, 1) + S(i, 1);
      Matrix Xi2 = Q(i, 2) + S(i, 2) + T(i, 1) + T(i, 2) + R(i, 1);
      Matrix Xi3 = R(i, 2) + T(i, 2);

      Matrix G(10 * n, 10 * n);
      put(G, 0, 0, Phi);
      put(G, 0, i, P(i) * Av);  // active delayed channel (column 1 or 2)
      put(G, 0, 3, S(i, 1));
      put(G, 0, 4, S(i, 2));
      put(G, 0, 6, h1 * Aat * S(i, 1));
      put(G, 0, 7, d1 * Aat * T(i, 1));
      put(G, 0, 8, h2 * Aat * S(i, 2));
      put(G, 0, 9, d2 * Aat * T(i, 2));
      // tau rows
      put(G, 1, 1, Z2 - (U1 + U1.transpose()));
      put(G, 1, 3, U1.transpose());
      put(G, 1, 4, U1);
      put(G, 2, 2, Z2 - (U2 + U2.transpose()));
      put(G, 2, 4, U2.transpose());
      put(G, 2, 5, U2);
      // Schur entries sit on the active tau row only.
      put(G, i, 6, h1 * Avt * S(i, 1));
      put(G, i, 7, d1 * Avt * T(i, 1));
      put(G, i, 8, h2 * Avt * S(i, 2));
      put(G, i, 9, d2 * Avt * T(i, 2));
      // boundary ladder
      put(G, 3, 3, Z2 - Xi1);
      put(G, 3, 4, Z(i, 1));
      put(G, 4, 4, Z2 - Xi2);
      put(G, 4, 5, Z(i, 2));
      put(G, 5, 5, Z2 - Xi3);
      // Schur diagonal
      put(G, 6, 6, Z2 - S(i, 1));
      put(G, 7, 7, Z2 - T(i, 1));
      put(G, 8, 8, Z2 - S(i, 2));
      put(G, 9, 9, Z2 - T(i, 2));
      G = mirror_lower(G, n);

      const LmiExpr& e = cs.lmis[2 * (i - 1) + (j - 1)];
      CHECK(e.label() == "main:m" + std::to_string(i) + "v" + std::to_string(j));
      CHECK(e.mode == i - 1);
      CHECK(e.vertex == j - 1);
      CHECK(e.sense() == Sense::strict_neg);
      check_close(evaluate(cs.registry, e, a).mat(), G, 1e-12);
    }
  }

  // Convexity blocks and one coupling, same assignment.
  const LmiExpr& rec = cs.lmis[4];  // mode 1, interval 1
  Matrix W(2 * n, 2 * n);
  put(W, 0, 0, T(1, 1));
  put(W, 0, 1, Z(1, 1));
  put(W, 1, 1, T(1, 1));
  W = mirror_lower(W, n);
  CHECK(rec.sense() == Sense::nonneg);
  check_close(evaluate(cs.registry, rec, a).mat(), W, 1e-12);

  bool found = false;
  for (const auto& e : cs.lmis) {
    if (e.label() == "couple:P_1<=mu*P_2") {
      found = true;
      check_close(evaluate(cs.registry, e, a).mat(), mu * P(2) - P(1), 1e-12);
      CHECK(e.sense() == Sense::nonneg);
    }
  }
  CHECK(found);
}

// ---------------------------------------------------------------------------
// Golden transcription: two-mode design program.
// ---------------------------------------------------------------------------

TEST_CASE("two-mode design vertex matrices match a straight-line build") {
  const std::size_t n = 2, m = 1;
  const double alpha = 0.9, mu = 1.5;
  const double h1 = 0.02, h2 = 0.07, h3 = 0.30;
  const double d1 = h2 - h1, d2 = h3 - h2;

  std::mt19937 rng(31);
  Plant plant(random_matrix(rng, n, n), random_matrix(rng, n, m));
  DelayGrid grid({h1, h2, h3});

  auto prob = build_synthesis_lmis(plant, grid, alpha, mu);
  const ConstraintSet& cs = prob.cs;
  Assignment a = random_assignment(cs.registry, 7);

  const Matrix I = Matrix::identity(n);
  const Matrix Aa = alpha * I + plant.A;
  const Matrix Z2(n, n);

  auto P = [&](int i) { return value(cs, a, "Pt_" + std::to_string(i)); };
  auto X = [&](int i) { return value(cs, a, "Xt_" + std::to_string(i)); };
  auto Y = [&](int i) { return value(cs, a, "Yt_" + std::to_string(i)); };
  auto Q = [&](int i, int k) {
    return value(cs, a, "Qt_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto R = [&](int i, int k) {
    return value(cs, a, "Rt_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto S = [&](int i, int k) {
    return value(cs, a, "St_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto T = [&](int i, int k) {
    return value(cs, a, "Tt_" + std::to_string(i) + "_" + std::to_string(k));
  };
  auto Z = [&](int i, int k) {
    return value(cs, a, "Zt_" + std::to_string(i) + "_" + std::to_string(k));
  };

  for (int i = 1; i <= 2; ++i) {
    for (int j = 1; j <= 2; ++j) {
      const double bounds[4] = {0.0, h1, h2, h3};
      const double rho = std::exp(alpha * bounds[i + j - 1]);

      Matrix Sig = Z2 - P(i);
      for (int k = 1; k <= 2; ++k) Sig = Sig + Q(i, k) + R(i, k) - S(i, k);
      Matrix U1 = T(i, 1) - Z(i, 1);
      Matrix U2 = T(i, 2) - Z(i, 2);
      Matrix Xi1 = Q(i, 1) + T(i, 1) + S(i, 1);
      Matrix Xi2 = Q(i, 2) + S(i, 2) + T(i, 1) + T(i, 2) + R(i, 1);
      Matrix Xi3 = R(i, 2) + T(i, 2);

      Matrix G(12 * n, 12 * n);
      put(G, 0, 0, Z2 - (X(i) + X(i).transpose()));
      put(G, 0, 1, Aa * X(i) + P(i));
      put(G, 0, 1 + i, rho * plant.B * Y(i));  // active channel: column 2 or 3
      put(G, 0, 7, X(i));
      put(G, 0, 8, h1 * S(i, 1));
      put(G, 0, 9, d1 * T(i, 1));
      put(G, 0, 10, h2 * S(i, 2));
      put(G, 0, 11, d2 * T(i, 2));
      put(G, 1, 1, Sig);
      put(G, 1, 4, S(i, 1));
      put(G, 1, 5, S(i, 2));
      put(G, 2, 2, Z2 - (U1 + U1.transpose()));
      put(G, 2, 4, U1.transpose());
      put(G, 2, 5, U1);
      put(G, 3, 3, Z2 - (U2 + U2.transpose()));
      put(G, 3, 5, U2.transpose());
      put(G, 3, 6, U2);
      put(G, 4, 4, Z2 - Xi1);
      put(G, 4, 5, Z(i, 1));
      put(G, 5, 5, Z2 - Xi2);
      put(G, 5, 6, Z(i, 2));
      put(G, 6, 6, Z2 - Xi3);
      put(G, 7, 7, Z2 - P(i));
      put(G, 7, 8, -h1 * S(i, 1));
      put(G, 7, 9, -d1 * T(i, 1));
      put(G, 7, 10, -h2 * S(i, 2));
      put(G, 7, 11, -d2 * T(i, 2));
      put(G, 8, 8, Z2 - S(i, 1));
      put(G, 9, 9, Z2 - T(i, 1));
      put(G, 10, 10, Z2 - S(i, 2));
      put(G, 11, 11, Z2 - T(i, 2));
      G = mirror_lower(G, n);

      const LmiExpr& e = cs.lmis[2 * (i - 1) + (j - 1)];
      CHECK(e.dim() == 12 * n);
      check_close(evaluate(cs.registry, e, a).mat(), G, 1e-12);
    }
  }

  // Skew-family coupling links symmetric parts.
  bool found = false;
  for (const auto& e : cs.lmis) {
    if (e.label() == "couple:Zt_1_1<=mu*Zt_2_1") {
      found = true;
      Matrix sym1 = 0.5 * (Z(1, 1) + Z(1, 1).transpose());
      Matrix sym2 = 0.5 * (Z(2, 1) + Z(2, 1).transpose());
      check_close(evaluate(cs.registry, e, a).mat(), mu * sym2 - sym1, 1e-12);
    }
  }
  CHECK(found);
}

// ---------------------------------------------------------------------------
// Structural properties
// ---------------------------------------------------------------------------

TEST_CASE("at alpha zero the two vertex programs of a mode coincide") {
  auto sys = toy_system(2, 2, 11);
  auto prob = build_analysis_lmis(sys, 0.0, 1.3);
  Assignment a = random_assignment(prob.cs.registry, 3);
  for (std::size_t i = 0; i < 2; ++i) {
    Matrix v0 = evaluate(prob.cs.registry, prob.cs.lmis[2 * i], a).mat();
    Matrix v1 = evaluate(prob.cs.registry, prob.cs.lmis[2 * i + 1], a).mat();
    check_close(v0, v1, 1e-15);
  }

  Plant plant = motor_plant();
  auto sprob = build_synthesis_lmis(plant, DelayGrid({0.02, 0.07, 0.3}), 0.0, 1.3);
  Assignment sa = random_assignment(sprob.cs.registry, 4);
  for (std::size_t i = 0; i < 2; ++i) {
    Matrix v0 = evaluate(sprob.cs.registry, sprob.cs.lmis[2 * i], sa).mat();
    Matrix v1 = evaluate(sprob.cs.registry, sprob.cs.lmis[2 * i + 1], sa).mat();
    check_close(v0, v1, 1e-15);
  }
}

// ---------------------------------------------------------------------------
// Certifying drivers (solver-backed)
// ---------------------------------------------------------------------------

TEST_CASE("single stable mode with no delayed term certifies a small rate") {
  Matrix A{{-1.0}};
  Matrix A1{{0.0}};
  SwitchedDelaySystem sys(A, {A1}, DelayGrid({0.02, 0.30}));
  auto out = analyze(sys, 0.05, 1.4);
  REQUIRE(out.status == SolveStatus::feasible);
  REQUIRE(out.certificate.has_value());
  CHECK(out.certificate->margins.pass);
  CHECK(out.certificate->tau_a() ==
        doctest::Approx(std::log(1.4) / 0.05).epsilon(1e-12));
}

TEST_CASE("motor schedule certifies a high rate and fails just past the boundary") {
  // Cross-checked against two independent convex solvers: this gain schedule
  // on this grid certifies decay rates up to ~2.09 and no further.
  auto sys = closed_loop(motor_plant(), motor_gains(), motor_grid());
  SolveOptions opts;
  opts.max_iterations = 2000;
  opts.time_limit_s = 120.0;
  auto ok = analyze(sys, 2.0, 1.4, opts);
  REQUIRE(ok.status == SolveStatus::feasible);
  CHECK(ok.certificate->margins.pass);
  CHECK(ok.certificate->margins.worst_margin < 0.0);
  // Blend of the two vertex evaluations stays negative definite per mode.
  auto prob = build_analysis_lmis(sys, 2.0, 1.4);
  const Assignment& a = ok.certificate->variables;
  for (std::size_t i = 0; i < sys.modes(); ++i) {
    Matrix v0 = evaluate(prob.cs.registry, prob.cs.lmis[2 * i], a).mat();
    Matrix v1 = evaluate(prob.cs.registry, prob.cs.lmis[2 * i + 1], a).mat();
    for (double lam : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      Matrix blend = lam * v0 + (1.0 - lam) * v1;
      CHECK(max_eig(SymMatrix(blend)) < 0.0);
    }
  }

  auto just_past = analyze(sys, 2.3, 1.4, opts);
  CHECK(just_past.status == SolveStatus::infeasible);
  auto far_past = analyze(sys, 10.0, 1.4, opts);
  CHECK(far_past.status == SolveStatus::infeasible);
}

TEST_CASE("decay-rate search brackets the single-mode stability limit") {
  Matrix A{{-1.0}};
  Matrix A1{{0.0}};
  SwitchedDelaySystem sys(A, {A1}, DelayGrid({0.02, 0.30}));
  BisectOptions opts;
  opts.alpha_lo = 0.05;
  opts.alpha_hi = 4.0;
  auto res = max_decay_rate(sys, 1.4, opts);
  CHECK(res.alpha_star > 0.05);
  CHECK(res.alpha_star < 1.0);  // open-loop rate of xdot = -x caps the search
  CHECK(res.tau_a_star ==
        doctest::Approx(std::log(1.4) / res.alpha_star).epsilon(1e-12));
  CHECK(res.certificate.alpha == doctest::Approx(res.alpha_star));
  CHECK(res.certificate.margins.pass);
  CHECK(!res.trace.upper_bracket_feasible);
  // Last probe bracket is tighter than the tolerance.
  CHECK(res.trace.probes.size() >= 3);

  // A floor above the certifiable range is an error.
  BisectOptions high;
  high.alpha_lo = 2.0;
  high.alpha_hi = 4.0;
  CHECK_THROWS_AS(max_decay_rate(sys, 1.4, high), std::runtime_error);
}

TEST_CASE("design round-trip: gains re-certify at the design rate") {
  Plant plant = motor_plant();
  DelayGrid grid = motor_grid();
  SolveOptions opts;
  opts.max_iterations = 2000;
  opts.time_limit_s = 120.0;
  auto out = synthesize(plant, grid, 2.0, 1.4, opts);
  REQUIRE(out.status == SolveStatus::feasible);
  REQUIRE(out.certificate.has_value());
  const auto& cert = *out.certificate;
  REQUIRE(cert.gains.K.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(cert.gains.K[i].rows() == 1);
    CHECK(cert.gains.K[i].cols() == 2);
    // Recovery identity K X = Y.
    const Matrix& X = cert.variables[cert.registry.find("Xt_" + std::to_string(i + 1)).index];
    const Matrix& Y = cert.variables[cert.registry.find("Yt_" + std::to_string(i + 1)).index];
    Matrix resid = cert.gains.K[i] * X - Y;
    CHECK(resid.frobenius_norm() <= 1e-8 * Y.frobenius_norm());
    CHECK(cert.gains.recovery_cond[i] < 1e8);
  }
  CHECK(cert.margins.pass);
  CHECK(cert.reanalysis.status == SolveStatus::feasible);
  CHECK(cert.reanalysis.certificate->margins.pass);
}

TEST_CASE("design far beyond the actuator authority is infeasible") {
  Plant plant = motor_plant();
  SolveOptions opts;
  opts.max_iterations = 2000;
  opts.time_limit_s = 120.0;
  auto out = synthesize(plant, DelayGrid({0.02, 0.07, 0.30}), 50.0, 1.4, opts);
  CHECK(out.status == SolveStatus::infeasible);
}
