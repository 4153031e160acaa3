#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ncs/det_switched.hpp"
#include "ncs/lmi.hpp"
#include "ncs/sdp.hpp"
#include "ncs/system.hpp"

// ============================================================================
// Certification of delay systems whose mode evolves as a continuous-time
// Markov chain: mean-square exponential stability analysis, mode-dependent
// state-feedback design with one shared slack variable, and decay-rate
// bisection.
//
// Differences from the dwell-time family (det_switched):
//  * one rate matrix Pi replaces the jump factor mu; cross-mode coupling
//    enters the state block as sum_j Pi(i,j) P_j plus two rate-bound caps;
//  * the interval variables S, T, Z and the caps are shared across modes,
//    so each vertex LMI has 6 (analysis) or 8 (design) blocks of size n
//    regardless of the mode count;
//  * the delayed-channel quadrature is carried by per-mode scalar weights
//    eps1/eps2 (seconds^2) computed from the grid and the rate matrix.
//
// Variable names: analysis P_i, Q_i, R_i per mode plus shared S, T, Qc, Rc,
// Z; design is the same family with a `t` suffix plus the shared slack Xt
// and per-mode gain blocks Yt_i.
// ============================================================================

namespace ncs {

// Scalar data entering the stochastic vertex LMIs.
struct MjlsConstants {
  double eta = 0.0;        // largest |Pi(i,i)|, 1/seconds
  std::size_t kappa = 0;   // 0-based mode attaining eta (ties: smallest index)
  double delta_max = 0.0;  // widest delay interval, seconds
  std::vector<double> eps1;  // per-mode weight on the S channel, seconds^2
  std::vector<double> eps2;  // per-mode weight on the T channel, seconds^2
};

// Evaluate the constants for a delay grid and rate matrix.  Pi must be
// M x M for an M-mode grid, with nonnegative off-diagonal rates and rows
// summing to zero (within rounding); throws std::invalid_argument otherwise.
MjlsConstants compute_constants(const DelayGrid& grid, const Matrix& Pi);

// Feasibility program certifying mean-square decay rate alpha.  Accepts the
// degenerate alpha = 0 (each mode's two vertex LMIs then coincide); the
// certifying drivers below require alpha > 0.
AssembledProblem build_mjls_analysis_lmis(const MjlsDelaySystem& sys,
                                          double alpha);

// Feasibility program for mode-dependent state feedback u = K_i x(t - tau)
// under Markov-modulated delays: slack relaxation of the analysis program
// with a single shared slack Xt and per-mode gain blocks Yt_i.
AssembledProblem build_mjls_synthesis_lmis(const Plant& plant,
                                           const DelayGrid& grid,
                                           const Matrix& Pi, double alpha);

struct MjlsAnalysisCertificate {
  double alpha = 0.0;
  Matrix Pi;
  MjlsConstants constants;
  VariableRegistry registry;  // names/order for `variables`
  Assignment variables;
  CertificateCheck margins;  // independent eigenvalue re-check
};

struct MjlsAnalysisOutcome {
  SolveStatus status = SolveStatus::inconclusive;
  FeasibilityResult solve;
  ProblemCounts counts;
  std::optional<MjlsAnalysisCertificate> certificate;  // iff feasible
};

// Certify mean-square decay rate alpha for a Markov-modulated delay system.
// A "feasible" outcome always carries a certificate that passed the
// independent eigenvalue margin check; solver-feasible assignments failing
// that check are downgraded to inconclusive.
MjlsAnalysisOutcome analyze_mjls(const MjlsDelaySystem& sys, double alpha,
                                 const SolveOptions& opts =
                                     SolveOptions::from_env());

struct MjlsSynthesisCertificate {
  double alpha = 0.0;
  Matrix Pi;
  MjlsConstants constants;
  VariableRegistry registry;
  Assignment variables;
  CertificateCheck margins;
  Gains gains;  // K_i = Yt_i * Xt^{-1}; recovery_cond repeats cond(Xt)
  MjlsAnalysisOutcome reanalysis;  // closed loop re-certified at alpha
};

struct MjlsSynthesisOutcome {
  SolveStatus status = SolveStatus::inconclusive;
  FeasibilityResult solve;
  ProblemCounts counts;
  std::optional<MjlsSynthesisCertificate> certificate;
};

// Design mode-dependent gains certifying mean-square decay rate alpha.
// Gains are recovered from the shared slack (K_i Xt = Yt_i); a recovery
// with cond(Xt) > 1e8 throws std::runtime_error("ill-conditioned recovery
// ...").  The closed loop is re-analyzed at the same alpha.
MjlsSynthesisOutcome synthesize_mjls(const Plant& plant, const DelayGrid& grid,
                                     const Matrix& Pi, double alpha,
                                     const SolveOptions& opts =
                                         SolveOptions::from_env());

struct MjlsDecaySearchResult {
  double alpha_star = 0.0;
  MjlsAnalysisCertificate certificate;  // at the last certified rate
  BisectTrace trace;
};

// Largest certifiable mean-square decay rate for a fixed closed loop,
// by bisection (see bisect_decay_rate for bracket semantics).
MjlsDecaySearchResult max_decay_rate_mjls(const MjlsDelaySystem& sys,
                                          const BisectOptions& opts = {});

struct MjlsDesignSearchResult {
  double alpha_star = 0.0;
  MjlsSynthesisCertificate certificate;
  BisectTrace trace;
};

// Largest mean-square decay rate for which the design program stays
// feasible; the returned certificate carries the gains at that rate.
MjlsDesignSearchResult max_mjls_synthesis_rate(const Plant& plant,
                                               const DelayGrid& grid,
                                               const Matrix& Pi,
                                               const BisectOptions& opts = {});

}  // namespace ncs
