#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ncs/lmi.hpp"
#include "ncs/sdp.hpp"
#include "ncs/system.hpp"

// ============================================================================
// Certification of switched delay systems under average-dwell-time switching.
//
// Three entry points, all built on the same mode/vertex LMI family:
//  * analyze         - certify a given decay rate for a switched system;
//  * synthesize      - design mode-dependent state-feedback gains;
//  * max_*_rate      - bisection for the largest certifiable decay rate.
//
// Conventions shared by the builders:
//  * modes are indexed 0..M-1; the delay interval of mode i is
//    [grid.lower(i), grid.upper(i)) over the boundary ladder b_0 < .. < b_M;
//  * each mode contributes two vertex LMIs obtained by freezing the
//    delay-dependent exponential scaling at the interval endpoints;
//  * decision variables are registered per mode with 1-based name suffixes:
//    analysis P_i, Q_i_k, R_i_k, S_i_k, T_i_k, Z_i_k; design (tilde family)
//    Pt_i, Xt_i, Yt_i, Qt_i_k, Rt_i_k, St_i_k, Tt_i_k, Zt_i_k.
// ============================================================================

namespace ncs {

// ln(mu)/alpha: the smallest average dwell time certified by a (mu, alpha)
// pair.  Requires mu >= 1 and alpha > 0; mu == 1 gives 0 (a common Lyapunov
// function needs no dwell time).
double dwell_time_bound(double mu, double alpha);

// Tallies of an assembled feasibility program, by constraint category.
struct ProblemCounts {
  std::size_t main = 0;        // full-size vertex LMIs (strict)
  std::size_t main_dim = 0;    // side length of each main LMI
  std::size_t reciprocal = 0;  // 2x2-block convexity couplings, semidefinite
  std::size_t positivity = 0;  // strict positive-definiteness constraints
  std::size_t coupling = 0;    // mu-scaled links across mode variables
  std::size_t variables = 0;   // matrix variables registered
};

struct AssembledProblem {
  ConstraintSet cs;
  ProblemCounts counts;
};

// Feasibility program certifying decay rate alpha for the switched system
// under mu-jump multiple Lyapunov-Krasovskii functionals.
// Throws std::invalid_argument unless alpha >= 0 and mu > 1 (at alpha = 0 the
// two vertex LMIs of each mode coincide).
AssembledProblem build_analysis_lmis(const SwitchedDelaySystem& sys,
                                     double alpha, double mu);

struct SynthesisStructure {
  // Also link the skew interval variables Zt across modes (through their
  // symmetric parts), making the mu-coupling family uniform over all
  // per-interval variables.  On by default.
  bool couple_z_family = true;
};

// Feasibility program for mode-dependent state feedback u = K_i x(t - tau):
// slack-variable relaxation of the analysis program in tilde variables.
// Throws std::invalid_argument unless alpha >= 0 and mu > 1.
AssembledProblem build_synthesis_lmis(const Plant& plant, const DelayGrid& grid,
                                      double alpha, double mu,
                                      const SynthesisStructure& structure = {});

struct AnalysisCertificate {
  double alpha = 0.0;
  double mu = 1.0;
  VariableRegistry registry;  // names/order for `variables`
  Assignment variables;
  CertificateCheck margins;   // independent eigenvalue re-check
  double tau_a() const { return dwell_time_bound(mu, alpha); }
};

struct AnalysisOutcome {
  SolveStatus status = SolveStatus::inconclusive;
  FeasibilityResult solve;  // solver telemetry (iterations, detail, ...)
  ProblemCounts counts;
  std::optional<AnalysisCertificate> certificate;  // iff status == feasible
};

// Certify decay rate alpha under average-dwell-time switching with jump
// factor mu.  A "feasible" outcome always carries a certificate that passed
// the independent eigenvalue margin check; a solver-feasible assignment that
// fails that check is downgraded to inconclusive.
AnalysisOutcome analyze(const SwitchedDelaySystem& sys, double alpha, double mu,
                        const SolveOptions& opts = SolveOptions::from_env());

struct SynthesisCertificate {
  double alpha = 0.0;
  double mu = 1.0;
  VariableRegistry registry;
  Assignment variables;
  CertificateCheck margins;
  Gains gains;                 // K_i recovered from Yt_i, Xt_i
  AnalysisOutcome reanalysis;  // closed loop re-certified at (alpha, mu)
  double tau_a() const { return dwell_time_bound(mu, alpha); }
};

struct SynthesisOutcome {
  SolveStatus status = SolveStatus::inconclusive;
  FeasibilityResult solve;
  ProblemCounts counts;
  std::optional<SynthesisCertificate> certificate;
};

// Design mode-dependent gains certifying decay rate alpha.  Gains are
// recovered by solving K_i Xt_i = Yt_i; a recovery with cond(Xt_i) > 1e8
// throws std::runtime_error("ill-conditioned recovery ...").  The closed
// loop is re-analyzed at the same (alpha, mu) and the outcome attached.
SynthesisOutcome synthesize(const Plant& plant, const DelayGrid& grid,
                            double alpha, double mu,
                            const SolveOptions& opts = SolveOptions::from_env(),
                            const SynthesisStructure& structure = {});

// ----------------------------------------------------------------------------
// Decay-rate maximization by bisection. The feasible set in alpha is treated
// as an interval anchored at alpha_lo (quasi-convexity); inconclusive probes
// shrink the bracket conservatively (treated as not certified) and are
// flagged.
// ----------------------------------------------------------------------------

struct BisectOptions {
  double alpha_lo = 1e-3;  // must certify here, else error
  double alpha_hi = 8.0;   // upper bracket
  double tol = 1e-3;       // stop when the bracket is narrower than this
  std::size_t max_probes = 40;
  // Per-probe solver budget: probes near the feasibility boundary need more
  // Newton steps than the bare-solve default, and a starved probe reads as
  // infeasible, which would bias the bracket downward.
  SolveOptions solver = [] {
    SolveOptions o = SolveOptions::from_env();
    o.max_iterations = 2000;
    o.time_limit_s = 120.0;
    return o;
  }();
};

struct ProbeRecord {
  double alpha = 0.0;
  SolveStatus status = SolveStatus::inconclusive;
  double worst_margin = 0.0;
};

struct BisectTrace {
  double alpha_star = 0.0;
  std::vector<ProbeRecord> probes;
  bool upper_bracket_feasible = false;  // alpha_hi itself certified
  bool inconclusive_probe = false;      // some probe returned inconclusive
};

// Generic driver shared by the deterministic and stochastic certifiers.
// `certify(alpha, rec)` runs one feasibility program, fills `rec`, returns
// true when a certificate was obtained (the callee keeps its best artifacts).
// Throws std::runtime_error("no certified decay rate above floor") when the
// alpha_lo probe fails.
BisectTrace bisect_decay_rate(
    const BisectOptions& opts,
    const std::function<bool(double, ProbeRecord&)>& certify);

struct DecaySearchResult {
  double alpha_star = 0.0;
  double tau_a_star = 0.0;  // dwell_time_bound(mu, alpha_star)
  AnalysisCertificate certificate;  // at the last certified rate
  BisectTrace trace;
};

DecaySearchResult max_decay_rate(const SwitchedDelaySystem& sys, double mu,
                                 const BisectOptions& opts = {});

struct DesignSearchResult {
  double alpha_star = 0.0;
  double tau_a_star = 0.0;
  SynthesisCertificate certificate;
  BisectTrace trace;
};

DesignSearchResult max_synthesis_rate(const Plant& plant, const DelayGrid& grid,
                                      double mu, const BisectOptions& opts = {},
                                      const SynthesisStructure& structure = {});

}  // namespace ncs
