#include "ncs/det_switched.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ncs {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("det_switched: " + what);
}

std::string tag(const char* base, std::size_t i1) {
  return std::string(base) + "_" + std::to_string(i1);
}
std::string tag(const char* base, std::size_t i1, std::size_t k1) {
  return std::string(base) + "_" + std::to_string(i1) + "_" +
         std::to_string(k1);
}

// Builders admit the degenerate alpha = 0 (both vertices of a mode then
// coincide); the certifying drivers require a strictly positive rate.
void check_build_rates(double alpha, double mu) {
  if (!(alpha >= 0.0)) fail("decay rate alpha must be nonnegative");
  if (!(mu > 1.0)) fail("jump factor mu must exceed 1");
}

void check_rates(double alpha, double mu) {
  if (!(alpha > 0.0)) fail("decay rate alpha must be positive");
  if (!(mu > 1.0)) fail("jump factor mu must exceed 1");
}

// Boundary ladder in 1-based interval notation: bound[k], k = 1..M+1, and
// interval widths width[k] = bound[k+1] - bound[k], k = 1..M.
struct Ladder {
  std::vector<double> bound;  // index 0 unused
  std::vector<double> width;  // index 0 unused
};

Ladder make_ladder(const DelayGrid& grid) {
  const std::size_t M = grid.modes();
  Ladder lad;
  lad.bound.assign(M + 2, 0.0);
  lad.width.assign(M + 1, 0.0);
  for (std::size_t k = 1; k <= M; ++k) lad.bound[k] = grid.lower(k - 1);
  lad.bound[M + 1] = grid.upper(M - 1);
  for (std::size_t k = 1; k <= M; ++k)
    lad.width[k] = lad.bound[k + 1] - lad.bound[k];
  return lad;
}

// Per-mode variable handles for one family layout (analysis or design).
struct ModeVars {
  VarId P;                                // sym n
  VarId X, Y;                             // design only (square n, gain m x n)
  std::vector<VarId> Q, R, S, T, Z;       // per interval k = 0..M-1
};

// mu-couplings over all ordered mode pairs: P family plus the per-interval
// families (Q, R, S, T and optionally Z).
std::vector<std::pair<VarId, VarId>> coupling_pairs(
    const std::vector<ModeVars>& mv, bool include_z) {
  const std::size_t M = mv.size();
  std::vector<std::pair<VarId, VarId>> pairs;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < M; ++j) {
      if (i == j) continue;
      pairs.emplace_back(mv[i].P, mv[j].P);
      for (std::size_t k = 0; k < M; ++k) {
        pairs.emplace_back(mv[i].Q[k], mv[j].Q[k]);
        pairs.emplace_back(mv[i].R[k], mv[j].R[k]);
        pairs.emplace_back(mv[i].S[k], mv[j].S[k]);
        pairs.emplace_back(mv[i].T[k], mv[j].T[k]);
        if (include_z) pairs.emplace_back(mv[i].Z[k], mv[j].Z[k]);
      }
    }
  }
  return pairs;
}

// [[T, Z], [Z^T, T]] >= 0 per mode/interval.
void append_reciprocal(ConstraintSet& cs, const std::vector<ModeVars>& mv,
                       std::size_t n) {
  const std::size_t M = mv.size();
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < M; ++k) {
      LmiExpr e("recip:m" + std::to_string(i + 1) + "k" + std::to_string(k + 1),
                Sense::nonneg, {n, n});
      e.mode = static_cast<int>(i);
      e.add_var(0, 0, mv[i].T[k]);
      e.add_var(0, 1, mv[i].Z[k]);
      e.add_var(1, 1, mv[i].T[k]);
      cs.lmis.push_back(std::move(e));
    }
  }
}

// Strict positive definiteness, encoded as -V < 0.
std::size_t append_positivity(ConstraintSet& cs,
                              const std::vector<ModeVars>& mv, std::size_t n) {
  std::size_t count = 0;
  auto add = [&](VarId v) {
    LmiExpr e("pos:" + cs.registry.info(v).name, Sense::strict_neg, {n});
    e.add_var(0, 0, v, -1.0);
    cs.lmis.push_back(std::move(e));
    ++count;
  };
  for (const ModeVars& m : mv) {
    add(m.P);
    for (std::size_t k = 0; k < m.Q.size(); ++k) {
      add(m.Q[k]);
      add(m.R[k]);
      add(m.S[k]);
      add(m.T[k]);
    }
  }
  return count;
}

// Shared skeleton of one vertex LMI: the tau/h-block couplings and the
// Schur diagonal, identical (up to variable family) in analysis and design.
// `off` is the block index of the central state column; tau blocks start at
// off + 1. Layout:
//   [.. state | tau_1..tau_M | h_1..h_{M+1} | (extra) | Schur pairs ..]
struct BlockMap {
  std::size_t state = 0;                   // central state column
  std::size_t tau0 = 0;                    // first tau block
  std::size_t h0 = 0;                      // first boundary block
  std::size_t schur0 = 0;                  // first Schur block
  std::size_t tau(std::size_t k1) const { return tau0 + (k1 - 1); }
  std::size_t h(std::size_t k1) const { return h0 + (k1 - 1); }
  std::size_t schur_s(std::size_t k1) const { return schur0 + 2 * (k1 - 1); }
  std::size_t schur_t(std::size_t k1) const {
    return schur0 + 2 * (k1 - 1) + 1;
  }
};

void fill_interval_core(LmiExpr& e, const BlockMap& bm, const ModeVars& m,
                        std::size_t M) {
  for (std::size_t k = 1; k <= M; ++k) {
    const VarId Q = m.Q[k - 1], S = m.S[k - 1], T = m.T[k - 1], Z = m.Z[k - 1];
    // tau_k diagonal: -(2T - Z - Z^T)
    e.add_var(bm.tau(k), bm.tau(k), T, -2.0);
    e.add_var(bm.tau(k), bm.tau(k), Z, 1.0);
    e.add_var(bm.tau(k), bm.tau(k), Z, 1.0, /*transpose_var=*/true);
    // tau_k with its interval endpoints: Upsilon^T = T - Z^T, Upsilon = T - Z
    e.add_var(bm.tau(k), bm.h(k), T, 1.0);
    e.add_var(bm.tau(k), bm.h(k), Z, -1.0, /*transpose_var=*/true);
    e.add_var(bm.tau(k), bm.h(k + 1), T, 1.0);
    e.add_var(bm.tau(k), bm.h(k + 1), Z, -1.0);
    // state coupling to the lower endpoint of interval k
    e.add_var(bm.state, bm.h(k), S, 1.0);
    // boundary diagonal -Xi_k, built as the interval ladder telescopes:
    //   k = 1:        Q_1 + S_1 + T_1
    //   1 < k <= M:   Q_k + S_k + T_k + R_{k-1} + T_{k-1}
    // (the closing block -Xi_{M+1} = -(R_M + T_M) is added after the loop)
    e.add_var(bm.h(k), bm.h(k), Q, -1.0);
    e.add_var(bm.h(k), bm.h(k), S, -1.0);
    e.add_var(bm.h(k), bm.h(k), T, -1.0);
    if (k > 1) {
      e.add_var(bm.h(k), bm.h(k), m.R[k - 2], -1.0);
      e.add_var(bm.h(k), bm.h(k), m.T[k - 2], -1.0);
    }
    // consecutive boundary coupling
    e.add_var(bm.h(k), bm.h(k + 1), Z, 1.0);
    // Schur diagonal
    e.add_var(bm.schur_s(k), bm.schur_s(k), S, -1.0);
    e.add_var(bm.schur_t(k), bm.schur_t(k), T, -1.0);
  }
  e.add_var(bm.h(M + 1), bm.h(M + 1), m.R[M - 1], -1.0);
  e.add_var(bm.h(M + 1), bm.h(M + 1), m.T[M - 1], -1.0);
}

}  // namespace

double dwell_time_bound(double mu, double alpha) {
  if (!(mu >= 1.0))
    throw std::invalid_argument("dwell_time_bound: mu must be at least 1");
  if (!(alpha > 0.0))
    throw std::invalid_argument("dwell_time_bound: alpha must be positive");
  return std::log(mu) / alpha;
}

AssembledProblem build_analysis_lmis(const SwitchedDelaySystem& sys,
                                     double alpha, double mu) {
  check_build_rates(alpha, mu);
  const std::size_t M = sys.modes();
  const std::size_t n = sys.n();
  const Ladder lad = make_ladder(sys.grid);
  const ShiftedMatrices sm = shifted_matrices(sys, alpha);

  AssembledProblem prob;
  ConstraintSet& cs = prob.cs;
  std::vector<ModeVars> mv(M);
  for (std::size_t i = 0; i < M; ++i) {
    mv[i].P = cs.registry.add_symmetric(tag("P", i + 1), n);
    for (std::size_t k = 1; k <= M; ++k) {
      mv[i].Q.push_back(cs.registry.add_symmetric(tag("Q", i + 1, k), n));
      mv[i].R.push_back(cs.registry.add_symmetric(tag("R", i + 1, k), n));
      mv[i].S.push_back(cs.registry.add_symmetric(tag("S", i + 1, k), n));
      mv[i].T.push_back(cs.registry.add_symmetric(tag("T", i + 1, k), n));
      mv[i].Z.push_back(cs.registry.add_square(tag("Z", i + 1, k), n, n));
    }
  }

  const Matrix I = Matrix::identity(n);
  const Matrix At = sm.A_alpha.transpose();
  BlockMap bm;
  bm.state = 0;
  bm.tau0 = 1;
  bm.h0 = M + 1;
  bm.schur0 = 2 * M + 2;
  const std::size_t nblocks = 4 * M + 2;

  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      LmiExpr e("main:m" + std::to_string(i + 1) + "v" + std::to_string(j + 1),
                Sense::strict_neg, std::vector<std::size_t>(nblocks, n));
      e.mode = static_cast<int>(i);
      e.vertex = static_cast<int>(j);
      const Matrix& Av = sm.vertices[i][j];
      const Matrix Avt = Av.transpose();

      // state diagonal: P A_a + A_a^T P + sum_k (Q_k + R_k - S_k)
      e.add_term(0, 0, I, mv[i].P, sm.A_alpha);
      e.add_term(0, 0, At, mv[i].P, I);
      for (std::size_t k = 0; k < M; ++k) {
        e.add_var(0, 0, mv[i].Q[k]);
        e.add_var(0, 0, mv[i].R[k]);
        e.add_var(0, 0, mv[i].S[k], -1.0);
      }
      // state to the active delayed channel
      e.add_term(0, bm.tau(i + 1), I, mv[i].P, Av);
      // state and active-channel rows of the Schur columns
      for (std::size_t k = 1; k <= M; ++k) {
        e.add_term(0, bm.schur_s(k), lad.bound[k] * At, mv[i].S[k - 1], I);
        e.add_term(0, bm.schur_t(k), lad.width[k] * At, mv[i].T[k - 1], I);
        e.add_term(bm.tau(i + 1), bm.schur_s(k), lad.bound[k] * Avt,
                   mv[i].S[k - 1], I);
        e.add_term(bm.tau(i + 1), bm.schur_t(k), lad.width[k] * Avt,
                   mv[i].T[k - 1], I);
      }
      fill_interval_core(e, bm, mv[i], M);
      cs.lmis.push_back(std::move(e));
    }
  }

  append_reciprocal(cs, mv, n);
  const std::size_t pos = append_positivity(cs, mv, n);
  const auto pairs = coupling_pairs(mv, /*include_z=*/false);
  auto couples = coupling_constraints(cs.registry, pairs, mu);
  for (auto& c : couples) cs.lmis.push_back(std::move(c));

  prob.counts.main = 2 * M;
  prob.counts.main_dim = nblocks * n;
  prob.counts.reciprocal = M * M;
  prob.counts.positivity = pos;
  prob.counts.coupling = pairs.size();
  prob.counts.variables = cs.registry.size();
  return prob;
}

AssembledProblem build_synthesis_lmis(const Plant& plant, const DelayGrid& grid,
                                      double alpha, double mu,
                                      const SynthesisStructure& structure) {
  check_build_rates(alpha, mu);
  const std::size_t M = grid.modes();
  const std::size_t n = plant.n();
  const std::size_t m = plant.m();
  const Ladder lad = make_ladder(grid);
  const Matrix A_alpha = alpha * Matrix::identity(n) + plant.A;

  AssembledProblem prob;
  ConstraintSet& cs = prob.cs;
  std::vector<ModeVars> mv(M);
  for (std::size_t i = 0; i < M; ++i) {
    mv[i].P = cs.registry.add_symmetric(tag("Pt", i + 1), n);
    mv[i].X = cs.registry.add_square(tag("Xt", i + 1), n, n);
    mv[i].Y = cs.registry.add_square(tag("Yt", i + 1), m, n);
    for (std::size_t k = 1; k <= M; ++k) {
      mv[i].Q.push_back(cs.registry.add_symmetric(tag("Qt", i + 1, k), n));
      mv[i].R.push_back(cs.registry.add_symmetric(tag("Rt", i + 1, k), n));
      mv[i].S.push_back(cs.registry.add_symmetric(tag("St", i + 1, k), n));
      mv[i].T.push_back(cs.registry.add_symmetric(tag("Tt", i + 1, k), n));
      mv[i].Z.push_back(cs.registry.add_square(tag("Zt", i + 1, k), n, n));
    }
  }

  const Matrix I = Matrix::identity(n);
  BlockMap bm;
  bm.state = 1;  // block 0 is the slack row
  bm.tau0 = 2;
  bm.h0 = M + 2;
  const std::size_t bX = 2 * M + 3;  // recovered-variable column
  bm.schur0 = 2 * M + 4;
  const std::size_t nblocks = 4 * M + 4;

  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      const double rho = std::exp(alpha * lad.bound[i + j + 1]);
      LmiExpr e("main:m" + std::to_string(i + 1) + "v" + std::to_string(j + 1),
                Sense::strict_neg, std::vector<std::size_t>(nblocks, n));
      e.mode = static_cast<int>(i);
      e.vertex = static_cast<int>(j);

      // slack diagonal: -(X + X^T)
      e.add_var(0, 0, mv[i].X, -1.0);
      e.add_var(0, 0, mv[i].X, -1.0, /*transpose_var=*/true);
      // slack row: A_a X + P | rho B Y (active channel) | X | h_k S_k, w_k T_k
      e.add_term(0, 1, A_alpha, mv[i].X, I);
      e.add_var(0, 1, mv[i].P);
      e.add_term(0, bm.tau(i + 1), rho * plant.B, mv[i].Y, I);
      e.add_var(0, bX, mv[i].X);
      for (std::size_t k = 1; k <= M; ++k) {
        e.add_var(0, bm.schur_s(k), mv[i].S[k - 1], lad.bound[k]);
        e.add_var(0, bm.schur_t(k), mv[i].T[k - 1], lad.width[k]);
      }
      // state diagonal: sum_k (Q_k + R_k - S_k) - P
      for (std::size_t k = 0; k < M; ++k) {
        e.add_var(1, 1, mv[i].Q[k]);
        e.add_var(1, 1, mv[i].R[k]);
        e.add_var(1, 1, mv[i].S[k], -1.0);
      }
      e.add_var(1, 1, mv[i].P, -1.0);
      // recovered-variable column: -P on the diagonal, cancelling Schur row
      e.add_var(bX, bX, mv[i].P, -1.0);
      for (std::size_t k = 1; k <= M; ++k) {
        e.add_var(bX, bm.schur_s(k), mv[i].S[k - 1], -lad.bound[k]);
        e.add_var(bX, bm.schur_t(k), mv[i].T[k - 1], -lad.width[k]);
      }
      fill_interval_core(e, bm, mv[i], M);
      cs.lmis.push_back(std::move(e));
    }
  }

  append_reciprocal(cs, mv, n);
  const std::size_t pos = append_positivity(cs, mv, n);
  const auto pairs = coupling_pairs(mv, structure.couple_z_family);
  auto couples = coupling_constraints(cs.registry, pairs, mu);
  for (auto& c : couples) cs.lmis.push_back(std::move(c));

  prob.counts.main = 2 * M;
  prob.counts.main_dim = nblocks * n;
  prob.counts.reciprocal = M * M;
  prob.counts.positivity = pos;
  prob.counts.coupling = pairs.size();
  prob.counts.variables = cs.registry.size();
  return prob;
}

AnalysisOutcome analyze(const SwitchedDelaySystem& sys, double alpha, double mu,
                        const SolveOptions& opts) {
  check_rates(alpha, mu);
  AssembledProblem prob = build_analysis_lmis(sys, alpha, mu);
  AnalysisOutcome out;
  out.counts = prob.counts;
  out.solve = solve_feasibility(prob.cs, opts);
  out.status = out.solve.status;
  if (out.status != SolveStatus::feasible) return out;

  CertificateCheck check =
      check_certificate(prob.cs, out.solve.assignment, opts.tol);
  if (!check.pass) {
    out.status = SolveStatus::inconclusive;
    out.solve.status = SolveStatus::inconclusive;
    out.solve.detail = "independent certificate check failed";
    return out;
  }
  AnalysisCertificate cert;
  cert.alpha = alpha;
  cert.mu = mu;
  cert.registry = prob.cs.registry;
  cert.variables = out.solve.assignment;
  cert.margins = std::move(check);
  out.certificate = std::move(cert);
  return out;
}

SynthesisOutcome synthesize(const Plant& plant, const DelayGrid& grid,
                            double alpha, double mu, const SolveOptions& opts,
                            const SynthesisStructure& structure) {
  check_rates(alpha, mu);
  AssembledProblem prob =
      build_synthesis_lmis(plant, grid, alpha, mu, structure);
  SynthesisOutcome out;
  out.counts = prob.counts;
  out.solve = solve_feasibility(prob.cs, opts);
  out.status = out.solve.status;
  if (out.status != SolveStatus::feasible) return out;

  CertificateCheck check =
      check_certificate(prob.cs, out.solve.assignment, opts.tol);
  if (!check.pass) {
    out.status = SolveStatus::inconclusive;
    out.solve.status = SolveStatus::inconclusive;
    out.solve.detail = "independent certificate check failed";
    return out;
  }

  const std::size_t M = grid.modes();
  Gains gains;
  for (std::size_t i = 0; i < M; ++i) {
    const VarId xv = prob.cs.registry.find(tag("Xt", i + 1));
    const VarId yv = prob.cs.registry.find(tag("Yt", i + 1));
    const Matrix& X = out.solve.assignment[xv.index];
    const Matrix& Y = out.solve.assignment[yv.index];
    const double cond = cond_2(X);
    if (!(cond <= 1e8)) {
      throw std::runtime_error(
          "ill-conditioned recovery: cond(Xt_" + std::to_string(i + 1) +
          ") = " + std::to_string(cond));
    }
    // K X = Y  =>  X^T K^T = Y^T
    Matrix Kt = lu_solve(X.transpose(), Y.transpose());
    gains.K.push_back(Kt.transpose());
    gains.recovery_cond.push_back(cond);
  }

  SynthesisCertificate cert;
  cert.alpha = alpha;
  cert.mu = mu;
  cert.registry = prob.cs.registry;
  cert.variables = out.solve.assignment;
  cert.margins = std::move(check);
  cert.gains = std::move(gains);
  cert.reanalysis = analyze(closed_loop(plant, cert.gains, grid), alpha, mu,
                            opts);
  out.certificate = std::move(cert);
  return out;
}

BisectTrace bisect_decay_rate(
    const BisectOptions& opts,
    const std::function<bool(double, ProbeRecord&)>& certify) {
  if (!(opts.alpha_lo > 0.0) || !(opts.alpha_hi > opts.alpha_lo))
    throw std::invalid_argument(
        "bisect_decay_rate: need 0 < alpha_lo < alpha_hi");
  BisectTrace trace;
  auto probe = [&](double a) {
    ProbeRecord rec;
    const bool ok = certify(a, rec);
    if (rec.status == SolveStatus::inconclusive) trace.inconclusive_probe = true;
    trace.probes.push_back(rec);
    return ok;
  };

  if (!probe(opts.alpha_lo))
    throw std::runtime_error("no certified decay rate above floor");
  if (probe(opts.alpha_hi)) {
    trace.alpha_star = opts.alpha_hi;
    trace.upper_bracket_feasible = true;
    return trace;
  }
  double lo = opts.alpha_lo;
  double hi = opts.alpha_hi;
  while (hi - lo > opts.tol && trace.probes.size() < opts.max_probes) {
    const double mid = 0.5 * (lo + hi);
    if (probe(mid))
      lo = mid;
    else
      hi = mid;
  }
  trace.alpha_star = lo;
  return trace;
}

DecaySearchResult max_decay_rate(const SwitchedDelaySystem& sys, double mu,
                                 const BisectOptions& opts) {
  DecaySearchResult res;
  std::optional<AnalysisCertificate> best;
  res.trace = bisect_decay_rate(opts, [&](double a, ProbeRecord& rec) {
    AnalysisOutcome out = analyze(sys, a, mu, opts.solver);
    rec.alpha = a;
    rec.status = out.status;
    rec.worst_margin = out.solve.worst_margin;
    if (out.status != SolveStatus::feasible) return false;
    if (!best || a >= best->alpha) best = std::move(out.certificate);
    return true;
  });
  res.alpha_star = res.trace.alpha_star;
  res.tau_a_star = dwell_time_bound(mu, res.alpha_star);
  res.certificate = std::move(*best);
  return res;
}

DesignSearchResult max_synthesis_rate(const Plant& plant, const DelayGrid& grid,
                                      double mu, const BisectOptions& opts,
                                      const SynthesisStructure& structure) {
  DesignSearchResult res;
  std::optional<SynthesisCertificate> best;
  res.trace = bisect_decay_rate(opts, [&](double a, ProbeRecord& rec) {
    SynthesisOutcome out = synthesize(plant, grid, a, mu, opts.solver,
                                      structure);
    rec.alpha = a;
    rec.status = out.status;
    rec.worst_margin = out.solve.worst_margin;
    if (out.status != SolveStatus::feasible) return false;
    if (!best || a >= best->alpha) best = std::move(out.certificate);
    return true;
  });
  res.alpha_star = res.trace.alpha_star;
  res.tau_a_star = dwell_time_bound(mu, res.alpha_star);
  res.certificate = std::move(*best);
  return res;
}

}  // namespace ncs
