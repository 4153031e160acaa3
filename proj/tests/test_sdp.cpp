// Feasibility engine tests.  The scalar cases below have hand-computable
// answers; larger cases are validated through the independent certificate
// checker (plain eigensolves of the evaluated constraints).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ncs/sdp.hpp"

#include <cstdlib>
#include <string>

#include "json.hpp"

using namespace ncs;

namespace {

// Constraint set: P > 0 (as -P < 0) and P*A + A^T*P < 0 for given square A.
ConstraintSet lyapunov_set(const Matrix& a) {
  const std::size_t n = a.rows();
  ConstraintSet cs;
  VarId p = cs.registry.add_symmetric("P", n);

  LmiExpr pos("P_pos", Sense::strict_neg, {n});
  pos.add_var(0, 0, p, -1.0);
  cs.lmis.push_back(pos);

  LmiExpr lyap("lyap", Sense::strict_neg, {n});
  lyap.add_term(0, 0, Matrix::identity(n), p, a);
  lyap.add_term(0, 0, a.transpose(), p, Matrix::identity(n));
  cs.lmis.push_back(lyap);
  return cs;
}

}  // namespace

TEST_CASE("scalar stable system is feasible with a verified certificate") {
  ConstraintSet cs = lyapunov_set(Matrix{{-1.0}});
  FeasibilityResult r = solve_feasibility(cs);
  REQUIRE(r.status == SolveStatus::feasible);
  REQUIRE(r.assignment.size() == 1);
  CHECK(r.assignment[0](0, 0) > 0.0);
  auto chk = check_certificate(cs, r.assignment);
  CHECK(chk.pass);
  CHECK(chk.worst_margin < 0.0);
}

TEST_CASE("scalar unstable system is certified infeasible") {
  ConstraintSet cs = lyapunov_set(Matrix{{1.0}});
  FeasibilityResult r = solve_feasibility(cs);
  CHECK(r.status == SolveStatus::infeasible);
}

TEST_CASE("hand-checked margins for the unit certificate") {
  // P = 1, A = [[-1]]:  -P evaluates to -1, P*A+A^T*P evaluates to -2.
  ConstraintSet cs = lyapunov_set(Matrix{{-1.0}});
  Assignment unit{Matrix{{1.0}}};
  auto chk = check_certificate(cs, unit);
  REQUIRE(chk.entries.size() == 2);
  CHECK(chk.entries[0].margin == doctest::Approx(-1.0));
  CHECK(chk.entries[1].margin == doctest::Approx(-2.0));
  CHECK(chk.worst_margin == doctest::Approx(-1.0));
  CHECK(chk.pass);
}

TEST_CASE("2x2 Lyapunov: solution verified independently") {
  Matrix a{{0.0, 1.0}, {-2.0, -3.0}};  // eigenvalues -1, -2
  ConstraintSet cs = lyapunov_set(a);
  FeasibilityResult r = solve_feasibility(cs);
  REQUIRE(r.status == SolveStatus::feasible);
  const Matrix& p = r.assignment[0];
  CHECK(min_eig(SymMatrix(p)) > 0.0);
  Matrix lyap = p * a + a.transpose() * p;
  CHECK(max_eig(SymMatrix(lyap)) < 0.0);
}

TEST_CASE("solver is deterministic") {
  Matrix a{{0.0, 1.0}, {-2.0, -3.0}};
  ConstraintSet cs = lyapunov_set(a);
  FeasibilityResult r1 = solve_feasibility(cs);
  FeasibilityResult r2 = solve_feasibility(cs);
  REQUIRE(r1.status == SolveStatus::feasible);
  REQUIRE(r2.status == SolveStatus::feasible);
  CHECK(r1.iterations == r2.iterations);
  REQUIRE(r1.assignment.size() == r2.assignment.size());
  for (std::size_t v = 0; v < r1.assignment.size(); ++v)
    CHECK((r1.assignment[v] - r2.assignment[v]).max_abs() == 0.0);
}

TEST_CASE("redundant duplicate constraints do not flip the verdict") {
  Matrix a{{0.0, 1.0}, {-2.0, -3.0}};
  ConstraintSet cs = lyapunov_set(a);
  ConstraintSet dup = cs;
  for (const auto& e : cs.lmis) dup.lmis.push_back(e);
  FeasibilityResult r = solve_feasibility(dup);
  CHECK(r.status == SolveStatus::feasible);
  auto chk = check_certificate(dup, r.assignment);
  CHECK(chk.pass);
}

TEST_CASE("nonneg blocks: coupling plus positivity is feasible") {
  ConstraintSet cs;
  VarId p1 = cs.registry.add_symmetric("P1", 2);
  VarId p2 = cs.registry.add_symmetric("P2", 2);
  for (VarId v : {p1, p2}) {
    LmiExpr pos(std::string("pos") + std::to_string(v.index),
                Sense::strict_neg, {2});
    pos.add_var(0, 0, v, -1.0);
    cs.lmis.push_back(pos);
  }
  auto couple = coupling_constraints(cs.registry, {{p1, p2}, {p2, p1}}, 1.4);
  for (auto& e : couple) cs.lmis.push_back(e);

  FeasibilityResult r = solve_feasibility(cs);
  REQUIRE(r.status == SolveStatus::feasible);
  auto chk = check_certificate(cs, r.assignment);
  CHECK(chk.pass);
  // Coupling holds numerically: 1.4*P2 - P1 >= 0.
  Matrix g = r.assignment[1] * 1.4 - r.assignment[0];
  CHECK(min_eig(SymMatrix(g)) > -1e-9);
}

TEST_CASE("exhausted budget reports inconclusive, never a false verdict") {
  Matrix a{{0.0, 1.0}, {-2.0, -3.0}};
  ConstraintSet cs = lyapunov_set(a);
  SolveOptions opts;
  opts.max_iterations = 0;  // no Newton steps permitted
  FeasibilityResult r = solve_feasibility(cs, opts);
  CHECK(r.status == SolveStatus::inconclusive);
  CHECK(r.detail == "iteration budget exhausted");
}

TEST_CASE("empty constraint set is trivially feasible") {
  ConstraintSet cs;
  cs.registry.add_symmetric("P", 2);
  FeasibilityResult r = solve_feasibility(cs);
  CHECK(r.status == SolveStatus::feasible);
  REQUIRE(r.assignment.size() == 1);
}

TEST_CASE("options read the tolerance override from the environment") {
  ::setenv("NCS_SOLVER_TOL", "3e-6", 1);
  SolveOptions o = SolveOptions::from_env();
  CHECK(o.tol == doctest::Approx(3e-6));
  ::unsetenv("NCS_SOLVER_TOL");
  SolveOptions d = SolveOptions::from_env();
  CHECK(d.tol == doctest::Approx(1e-7));
}

TEST_CASE("standard-form dump is valid JSON with documented keys") {
  ConstraintSet cs = lyapunov_set(Matrix{{-1.0}});
  std::string js = dump_standard_form(cs);
  auto doc = nlohmann::json::parse(js);
  CHECK(doc.contains("scalars"));
  CHECK(doc.contains("blocks"));
  CHECK(doc.contains("col_scale"));
  REQUIRE(doc["blocks"].is_array());
  REQUIRE(doc["blocks"].size() == 2);
  CHECK(doc["blocks"][0].contains("label"));
  CHECK(doc["blocks"][0].contains("sense"));
  CHECK(doc["blocks"][0].contains("coeffs"));
}

TEST_CASE("mildly larger random-stable problem stays verified") {
  // Companion-form stable matrix, n = 4.
  Matrix a(4, 4);
  a(0, 1) = 1.0;
  a(1, 2) = 1.0;
  a(2, 3) = 1.0;
  // x^4 + 10x^3 + 35x^2 + 50x + 24 = (x+1)(x+2)(x+3)(x+4)
  a(3, 0) = -24.0;
  a(3, 1) = -50.0;
  a(3, 2) = -35.0;
  a(3, 3) = -10.0;
  ConstraintSet cs = lyapunov_set(a);
  FeasibilityResult r = solve_feasibility(cs);
  REQUIRE(r.status == SolveStatus::feasible);
  CHECK(check_certificate(cs, r.assignment).pass);
}
