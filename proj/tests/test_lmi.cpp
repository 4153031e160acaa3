// Symbolic LMI model: variable registry bookkeeping, packing, affine
// evaluation semantics, and generated coupling constraints.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ncs/lmi.hpp"

#include <random>
#include <stdexcept>

using namespace ncs;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = dist(rng);
  return m;
}

Assignment random_assignment(const VariableRegistry& reg, unsigned seed) {
  Assignment a;
  for (std::size_t v = 0; v < reg.size(); ++v) {
    const auto& info = reg.info(VarId{v});
    Matrix m =
        random_matrix(info.rows, info.cols, seed + 13u * static_cast<unsigned>(v));
    if (info.kind == VarKind::symmetric) m = (m + m.transpose()) * 0.5;
    a.push_back(m);
  }
  return a;
}

}  // namespace

TEST_CASE("registry: scalar counts and offsets") {
  VariableRegistry reg;
  VarId p = reg.add_symmetric("P", 3);   // 6 scalars
  VarId y = reg.add_square("Y", 1, 3);   // 3 scalars
  VarId q = reg.add_symmetric("Q", 2);   // 3 scalars
  CHECK(reg.scalar_count(p) == 6);
  CHECK(reg.scalar_count(y) == 3);
  CHECK(reg.scalar_count(q) == 3);
  CHECK(reg.scalar_offset(p) == 0);
  CHECK(reg.scalar_offset(y) == 6);
  CHECK(reg.scalar_offset(q) == 9);
  CHECK(reg.total_scalars() == 12);
  CHECK(reg.find("Y").index == y.index);
  CHECK_FALSE(reg.find("nope").valid());
  CHECK_THROWS_AS(reg.add_symmetric("P", 2), std::invalid_argument);
}

TEST_CASE("pack/unpack round-trips any structured assignment") {
  VariableRegistry reg;
  reg.add_symmetric("P", 4);
  reg.add_square("Y", 2, 4);
  reg.add_symmetric("S", 1);
  Assignment a = random_assignment(reg, 321u);
  std::vector<double> x = pack_scalars(reg, a);
  CHECK(x.size() == reg.total_scalars());
  Assignment b = unpack_scalars(reg, x);
  REQUIRE(b.size() == a.size());
  for (std::size_t v = 0; v < a.size(); ++v)
    CHECK((a[v] - b[v]).max_abs() == 0.0);
}

TEST_CASE("identity_assignment: identity for symmetric, zero for square") {
  VariableRegistry reg;
  reg.add_symmetric("P", 3);
  reg.add_square("Y", 2, 3);
  Assignment a = identity_assignment(reg);
  CHECK((a[0] - Matrix::identity(3)).max_abs() == 0.0);
  CHECK(a[1].max_abs() == 0.0);
}

TEST_CASE("evaluate: single-block expression with transpose terms") {
  VariableRegistry reg;
  VarId p = reg.add_symmetric("P", 2);
  LmiExpr e("demo", Sense::strict_neg, {2});
  Matrix a{{0.0, 1.0}, {-2.0, -3.0}};
  // P*A + A^T*P  (classic Lyapunov operator)
  e.add_term(0, 0, Matrix::identity(2), p, a);
  e.add_term(0, 0, a.transpose(), p, Matrix::identity(2));

  Assignment asg{Matrix{{1.0, 0.0}, {0.0, 1.0}}};
  SymMatrix v = evaluate(reg, e, asg);
  Matrix expect = a + a.transpose();
  CHECK((v.mat() - expect).max_abs() <= 1e-14);
}

TEST_CASE("evaluate: transpose_var uses Y^T in place of Y") {
  VariableRegistry reg;
  VarId y = reg.add_square("Y", 1, 2);
  LmiExpr e("demo", Sense::strict_neg, {2});
  Matrix b{{0.5}, {1.5}};
  // block += B*Y + Y^T*B^T, the second written via transpose_var.
  e.add_term(0, 0, b, y, Matrix::identity(2));
  e.add_term(0, 0, Matrix::identity(2), y, b.transpose(), true);

  Matrix yv{{2.0, -1.0}};
  Assignment asg{yv};
  Matrix by = b * yv;
  Matrix expect = by + by.transpose();
  SymMatrix v = evaluate(reg, e, asg);
  CHECK((v.mat() - expect).max_abs() <= 1e-14);
}

TEST_CASE("evaluate is affine in the assignment") {
  VariableRegistry reg;
  VarId p = reg.add_symmetric("P", 2);
  VarId q = reg.add_symmetric("Q", 2);
  VarId y = reg.add_square("Y", 1, 2);

  LmiExpr e("aff", Sense::strict_neg, {2, 1});
  Matrix a = random_matrix(2, 2, 1u);
  Matrix c01 = random_matrix(2, 1, 2u);
  e.add_term(0, 0, Matrix::identity(2), p, a);
  e.add_term(0, 0, a.transpose(), p, Matrix::identity(2));
  e.add_var(0, 0, q, 0.75);
  e.add_const(0, 0, Matrix::identity(2) * 0.1);
  e.add_term(0, 1, Matrix::identity(2), y, Matrix::identity(1), true);
  e.add_const(0, 1, c01);
  e.add_const(1, 1, Matrix{{-1.0}});

  Assignment a1 = random_assignment(reg, 5u);
  Assignment a2 = random_assignment(reg, 6u);
  Assignment zero;
  for (std::size_t v = 0; v < reg.size(); ++v) {
    const auto& info = reg.info(VarId{v});
    zero.push_back(Matrix(info.rows, info.cols));
  }

  Assignment sum;
  for (std::size_t v = 0; v < a1.size(); ++v) sum.push_back(a1[v] + a2[v]);

  Matrix f0 = evaluate(reg, e, zero).mat();
  Matrix f1 = evaluate(reg, e, a1).mat() - f0;
  Matrix f2 = evaluate(reg, e, a2).mat() - f0;
  Matrix fs = evaluate(reg, e, sum).mat() - f0;
  CHECK((fs - (f1 + f2)).max_abs() <= 1e-12);

  // And the constant part is recovered at zero.
  CHECK(f0(0, 0) == doctest::Approx(0.1));
  CHECK(f0(2, 2) == doctest::Approx(-1.0));
  CHECK(f0(0, 2) == doctest::Approx(c01(0, 0)));
  CHECK(f0(2, 0) == doctest::Approx(c01(0, 0)));
}

TEST_CASE("coupling constraints encode mu*V_j - V_i >= 0") {
  VariableRegistry reg;
  VarId p1 = reg.add_symmetric("P1", 2);
  VarId p2 = reg.add_symmetric("P2", 2);
  auto lmis = coupling_constraints(reg, {{p1, p2}}, 1.4);
  REQUIRE(lmis.size() == 1);
  CHECK(lmis[0].sense() == Sense::nonneg);

  Matrix v1{{1.0, 0.0}, {0.0, 1.0}};
  Matrix v2{{2.0, 0.0}, {0.0, 2.0}};
  Assignment asg{v1, v2};
  SymMatrix val = evaluate(reg, lmis[0], asg);
  // 1.4 * v2 - v1 = diag(1.8).
  CHECK((val.mat() - Matrix::identity(2) * 1.8).max_abs() <= 1e-14);

  CHECK_THROWS_AS(coupling_constraints(reg, {{p1, p2}}, 1.0),
                  std::invalid_argument);
}

TEST_CASE("dump_json mentions every variable and block") {
  VariableRegistry reg;
  VarId p = reg.add_symmetric("P", 2);
  ConstraintSet cs;
  cs.registry = reg;
  LmiExpr e("lyap", Sense::strict_neg, {2});
  Matrix a{{-1.0, 0.0}, {0.0, -2.0}};
  e.add_term(0, 0, Matrix::identity(2), p, a);
  e.add_term(0, 0, a.transpose(), p, Matrix::identity(2));
  cs.lmis.push_back(e);
  std::string js = dump_json(cs);
  CHECK(js.find("\"P\"") != std::string::npos);
  CHECK(js.find("lyap") != std::string::npos);
  CHECK(js.find("strict_neg") != std::string::npos);
}
