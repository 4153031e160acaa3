#pragma once

#include <string>
#include <vector>

#include "ncs/lmi.hpp"

// ============================================================================
// LMI feasibility engine.
//
// Interior-point method on the margin-augmented problem
//
//     maximize t   s.t.   -Gamma_c(x) - eps_c*I - t*I >= 0   (strict blocks)
//                          V_c(x)                     >= 0   (nonneg blocks)
//                          |x_s| <= R,  t <= t_cap
//
// via a log-det barrier with an annealed weight on t.  Strict blocks carry a
// fixed definiteness shift eps_c = 1e-7 * (1 + ||constant||_F); the margin
// variable rides on strict blocks (and on any nonneg block that is not
// strictly interior at the start point).  Outcomes are three-valued:
//
//   feasible:      a centered iterate reached t > tol and the returned
//                  assignment passes check_certificate
//   infeasible:    the barrier duality bound certifies max-margin t* < 0
//   inconclusive:  iteration/time budget exhausted first
//
// The solver is deterministic: identical inputs and options produce identical
// iterates.  It is also single-threaded by design.
// ============================================================================

namespace ncs {

enum class SolveStatus { feasible, infeasible, inconclusive };

const char* to_string(SolveStatus s);

struct SolveOptions {
  double tol = 1e-7;           // feasibility margin threshold (scaled units)
  int max_iterations = 200;    // total Newton steps
  double time_limit_s = 60.0;
  double var_bound = 1e6;      // box half-width on scaled decision scalars
  double margin_cap = 1e3;     // upper cap on the margin variable

  // Reads NCS_SOLVER_TOL (when set and positive) into tol.
  static SolveOptions from_env();
};

struct FeasibilityResult {
  SolveStatus status = SolveStatus::inconclusive;
  Assignment assignment;       // meaningful when status == feasible
  double worst_margin = 0.0;   // see check_certificate margin convention
  int iterations = 0;
  double wall_time_s = 0.0;
  double margin_value = 0.0;   // best centered t (scaled units)
  double margin_bound = 0.0;   // duality upper bound on achievable t
  std::string detail;
};

FeasibilityResult solve_feasibility(const ConstraintSet& cs,
                                    const SolveOptions& opts =
                                        SolveOptions::from_env());

// Independent certificate verification: evaluates every LMI with matrix-core
// eigensolves, no solver state involved.
//
// Margin convention per constraint:
//   strict_neg: margin = lambda_max(value)   (pass iff  < -tol*scale)
//   nonneg:     margin = lambda_min(value)   (pass iff  > -tol*scale)
// with scale = 1 + ||constant part||_F of that constraint.
// worst_margin aggregates max over {lambda_max for strict, -lambda_min for
// nonneg}; negative means every constraint holds.
struct CertificateCheck {
  struct Entry {
    std::string label;
    Sense sense = Sense::nonneg;
    double margin = 0.0;
    double scale = 1.0;
    bool pass = false;
  };
  std::vector<Entry> entries;
  double worst_margin = 0.0;
  bool pass = false;
};

CertificateCheck check_certificate(const ConstraintSet& cs,
                                   const Assignment& a, double tol = 1e-7);

// Compiled standard form as JSON, for debugging.  Key set:
//   {"scalars", "blocks": [{"label","sense","dim","margin","cone",
//                           "constant":[[i,j,v]...],
//                           "coeffs": {"<scalar index>": [[i,j,v]...]}}],
//    "col_scale", "row_scale", "lp_rows"}
std::string dump_standard_form(const ConstraintSet& cs);

}  // namespace ncs
