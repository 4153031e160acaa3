#include "ncs/mjls.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ncs {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("mjls: " + what);
}

std::string tag(const char* base, std::size_t i1) {
  return std::string(base) + "_" + std::to_string(i1);
}

void check_rate_matrix(const DelayGrid& grid, const Matrix& Pi) {
  const std::size_t M = grid.modes();
  if (M == 0) fail("grid has no modes");
  if (Pi.rows() != M || Pi.cols() != M)
    fail("rate matrix must be " + std::to_string(M) + "x" + std::to_string(M));
  double scale = 1.0 + Pi.max_abs();
  for (std::size_t i = 0; i < M; ++i) {
    double row_sum = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      if (i != j && Pi(i, j) < 0.0)
        fail("off-diagonal rates must be nonnegative");
      row_sum += Pi(i, j);
    }
    if (std::abs(row_sum) > 1e-9 * scale)
      fail("rate matrix rows must sum to zero");
  }
}

// Per-mode variable handles.  S, T, Z and the rate-bound caps are shared.
struct Vars {
  std::vector<VarId> P, Q, R;  // per mode
  VarId S, T, Qc, Rc, Z;
  VarId X;                 // design only: shared slack
  std::vector<VarId> Y;    // design only: per-mode gain blocks
};

Vars register_analysis(VariableRegistry& reg, std::size_t M, std::size_t n) {
  Vars v;
  for (std::size_t i = 0; i < M; ++i) {
    v.P.push_back(reg.add_symmetric(tag("P", i + 1), n));
    v.Q.push_back(reg.add_symmetric(tag("Q", i + 1), n));
    v.R.push_back(reg.add_symmetric(tag("R", i + 1), n));
  }
  v.S = reg.add_symmetric("S", n);
  v.T = reg.add_symmetric("T", n);
  v.Qc = reg.add_symmetric("Qc", n);
  v.Rc = reg.add_symmetric("Rc", n);
  v.Z = reg.add_square("Z", n, n);
  return v;
}

Vars register_design(VariableRegistry& reg, std::size_t M, std::size_t n,
                     std::size_t m) {
  Vars v;
  for (std::size_t i = 0; i < M; ++i) {
    v.P.push_back(reg.add_symmetric(tag("Pt", i + 1), n));
    v.Q.push_back(reg.add_symmetric(tag("Qt", i + 1), n));
    v.R.push_back(reg.add_symmetric(tag("Rt", i + 1), n));
  }
  v.S = reg.add_symmetric("St", n);
  v.T = reg.add_symmetric("Tt", n);
  v.Qc = reg.add_symmetric("Qtc", n);
  v.Rc = reg.add_symmetric("Rtc", n);
  v.Z = reg.add_square("Zt", n, n);
  v.X = reg.add_square("Xt", n, n);
  for (std::size_t i = 0; i < M; ++i)
    v.Y.push_back(reg.add_square(tag("Yt", i + 1), m, n));
  return v;
}

// The four delay blocks shared verbatim by analysis and design:
// tau diagonal, its endpoint couplings, endpoint diagonals, and the
// consecutive-boundary link.  `b` maps [tau, h_lo, h_hi] block indices.
void fill_delay_core(LmiExpr& e, const Vars& v, std::size_t mode,
                     std::size_t btau, std::size_t blo, std::size_t bhi) {
  e.add_var(btau, btau, v.T, -2.0);
  e.add_var(btau, btau, v.Z, 1.0);
  e.add_var(btau, btau, v.Z, 1.0, /*transpose_var=*/true);
  e.add_var(btau, blo, v.T, 1.0);
  e.add_var(btau, blo, v.Z, -1.0, /*transpose_var=*/true);
  e.add_var(btau, bhi, v.T, 1.0);
  e.add_var(btau, bhi, v.Z, -1.0);
  e.add_var(blo, blo, v.Q[mode], -1.0);
  e.add_var(blo, blo, v.S, -1.0);
  e.add_var(blo, blo, v.T, -1.0);
  e.add_var(blo, bhi, v.Z, 1.0);
  e.add_var(bhi, bhi, v.R[mode], -1.0);
  e.add_var(bhi, bhi, v.T, -1.0);
}

void append_small_lmis(ConstraintSet& cs, const Vars& v, const Matrix& Pi,
                       std::size_t n) {
  const std::size_t M = v.P.size();
  {
    LmiExpr e("recip", Sense::nonneg, {n, n});
    e.add_var(0, 0, v.T);
    e.add_var(0, 1, v.Z);
    e.add_var(1, 1, v.T);
    cs.lmis.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < M; ++i) {
    LmiExpr q("qbound:m" + std::to_string(i + 1), Sense::nonneg, {n});
    q.mode = static_cast<int>(i);
    q.add_var(0, 0, v.Qc);
    for (std::size_t j = 0; j < M; ++j)
      if (Pi(i, j) != 0.0) q.add_var(0, 0, v.Q[j], -Pi(i, j));
    cs.lmis.push_back(std::move(q));

    LmiExpr r("rbound:m" + std::to_string(i + 1), Sense::nonneg, {n});
    r.mode = static_cast<int>(i);
    r.add_var(0, 0, v.Rc);
    for (std::size_t j = 0; j < M; ++j)
      if (Pi(i, j) != 0.0) r.add_var(0, 0, v.R[j], -Pi(i, j));
    cs.lmis.push_back(std::move(r));
  }
}

std::size_t append_positivity(ConstraintSet& cs, const Vars& v,
                              std::size_t n) {
  std::size_t count = 0;
  auto add = [&](VarId id) {
    LmiExpr e("pos:" + cs.registry.info(id).name, Sense::strict_neg, {n});
    e.add_var(0, 0, id, -1.0);
    cs.lmis.push_back(std::move(e));
    ++count;
  };
  for (std::size_t i = 0; i < v.P.size(); ++i) {
    add(v.P[i]);
    add(v.Q[i]);
    add(v.R[i]);
  }
  add(v.S);
  add(v.T);
  add(v.Qc);
  add(v.Rc);
  return count;
}

void check_driver_rate(double alpha) {
  if (!(alpha > 0.0)) fail("decay rate alpha must be positive");
}

}  // namespace

MjlsConstants compute_constants(const DelayGrid& grid, const Matrix& Pi) {
  check_rate_matrix(grid, Pi);
  const std::size_t M = grid.modes();
  const std::vector<double>& h = grid.boundaries();  // h[0..M]

  MjlsConstants c;
  c.kappa = 0;
  for (std::size_t i = 0; i < M; ++i) {
    const double d = std::abs(Pi(i, i));
    if (d > c.eta) {
      c.eta = d;
      c.kappa = i;
    }
    c.delta_max = std::max(c.delta_max, grid.width(i));
  }
  const double cubic_span = (h[M - 1] * h[M - 1] * h[M - 1] -
                             h[0] * h[0] * h[0]) / 2.0;
  const double square_span = (h[M] * h[M] - h[0] * h[0]) / 2.0;
  for (std::size_t i = 0; i < M; ++i) {
    c.eps1.push_back(h[i] * h[i] + c.eta * cubic_span);
    const double w = grid.width(i);
    c.eps2.push_back(w * w + c.eta * c.delta_max * square_span);
  }
  return c;
}

AssembledProblem build_mjls_analysis_lmis(const MjlsDelaySystem& sys,
                                          double alpha) {
  if (!(alpha >= 0.0)) fail("decay rate alpha must be nonnegative");
  const std::size_t M = sys.base.modes();
  const std::size_t n = sys.base.n();
  const MjlsConstants kc = compute_constants(sys.base.grid, sys.Pi);
  const ShiftedMatrices sm = shifted_matrices(sys.base, alpha);
  const std::vector<double>& h = sys.base.grid.boundaries();
  const double h_mid = h[M - 1];  // second-highest boundary
  const double h_top = h[M];

  AssembledProblem prob;
  ConstraintSet& cs = prob.cs;
  Vars v = register_analysis(cs.registry, M, n);

  const Matrix I = Matrix::identity(n);
  const Matrix At = sm.A_alpha.transpose();
  // Blocks: [ state | delayed | h_lo | h_hi | schur_S | schur_T ]
  for (std::size_t i = 0; i < M; ++i) {
    const double w1 = std::sqrt(kc.eps1[i]);
    const double w2 = std::sqrt(kc.eps2[i]);
    for (std::size_t j = 0; j < 2; ++j) {
      LmiExpr e("main:m" + std::to_string(i + 1) + "v" + std::to_string(j + 1),
                Sense::strict_neg, std::vector<std::size_t>(6, n));
      e.mode = static_cast<int>(i);
      e.vertex = static_cast<int>(j);
      const Matrix& Av = sm.vertices[i][j];
      const Matrix Avt = Av.transpose();

      // state diagonal: P A_a + A_a^T P + rate coupling + storage - S
      e.add_term(0, 0, I, v.P[i], sm.A_alpha);
      e.add_term(0, 0, At, v.P[i], I);
      for (std::size_t k = 0; k < M; ++k)
        if (sys.Pi(i, k) != 0.0) e.add_var(0, 0, v.P[k], sys.Pi(i, k));
      e.add_var(0, 0, v.Q[i]);
      e.add_var(0, 0, v.Qc, h_mid);
      if (h_mid - h[0] != 0.0) e.add_var(0, 0, v.Q[kc.kappa], h_mid - h[0]);
      e.add_var(0, 0, v.R[i]);
      e.add_var(0, 0, v.Rc, h_top);
      if (h_top - h_mid != 0.0) e.add_var(0, 0, v.R[kc.kappa], h_top - h_mid);
      e.add_var(0, 0, v.S, -1.0);

      // state row: delayed channel, lower endpoint, quadrature columns
      e.add_term(0, 1, I, v.P[i], Av);
      e.add_var(0, 2, v.S);
      e.add_term(0, 4, w1 * At, v.S, I);
      e.add_term(0, 5, w2 * At, v.T, I);

      // delayed-channel quadrature columns
      e.add_term(1, 4, w1 * Avt, v.S, I);
      e.add_term(1, 5, w2 * Avt, v.T, I);

      fill_delay_core(e, v, i, 1, 2, 3);

      e.add_var(4, 4, v.S, -1.0);
      e.add_var(5, 5, v.T, -1.0);
      cs.lmis.push_back(std::move(e));
    }
  }

  append_small_lmis(cs, v, sys.Pi, n);
  const std::size_t pos = append_positivity(cs, v, n);

  prob.counts.main = 2 * M;
  prob.counts.main_dim = 6 * n;
  prob.counts.reciprocal = 1;
  prob.counts.positivity = pos;
  prob.counts.coupling = 2 * M;
  prob.counts.variables = cs.registry.size();
  return prob;
}

AssembledProblem build_mjls_synthesis_lmis(const Plant& plant,
                                           const DelayGrid& grid,
                                           const Matrix& Pi, double alpha) {
  if (!(alpha >= 0.0)) fail("decay rate alpha must be nonnegative");
  const std::size_t M = grid.modes();
  const std::size_t n = plant.n();
  const std::size_t m = plant.m();
  const MjlsConstants kc = compute_constants(grid, Pi);
  const Matrix A_alpha = alpha * Matrix::identity(n) + plant.A;
  const std::vector<double>& h = grid.boundaries();
  const double h_mid = h[M - 1];
  const double h_top = h[M];

  AssembledProblem prob;
  ConstraintSet& cs = prob.cs;
  Vars v = register_design(cs.registry, M, n, m);

  const Matrix I = Matrix::identity(n);
  // Blocks: [ slack | state | delayed | h_lo | h_hi | slack col | schur_S |
  //           schur_T ]
  for (std::size_t i = 0; i < M; ++i) {
    const double w1 = std::sqrt(kc.eps1[i]);
    const double w2 = std::sqrt(kc.eps2[i]);
    for (std::size_t j = 0; j < 2; ++j) {
      const double rho = std::exp(alpha * h[i + j]);
      LmiExpr e("main:m" + std::to_string(i + 1) + "v" + std::to_string(j + 1),
                Sense::strict_neg, std::vector<std::size_t>(8, n));
      e.mode = static_cast<int>(i);
      e.vertex = static_cast<int>(j);

      // slack diagonal and row
      e.add_var(0, 0, v.X, -1.0);
      e.add_var(0, 0, v.X, -1.0, /*transpose_var=*/true);
      e.add_term(0, 1, A_alpha, v.X, I);
      e.add_var(0, 1, v.P[i]);
      e.add_term(0, 2, rho * plant.B, v.Y[i], I);
      e.add_var(0, 5, v.X);
      e.add_var(0, 6, v.S, w1);
      e.add_var(0, 7, v.T, w2);

      // state diagonal: rate coupling + storage - P - S
      for (std::size_t k = 0; k < M; ++k)
        if (Pi(i, k) != 0.0) e.add_var(1, 1, v.P[k], Pi(i, k));
      e.add_var(1, 1, v.Q[i]);
      e.add_var(1, 1, v.Qc, h_mid);
      if (h_mid - h[0] != 0.0) e.add_var(1, 1, v.Q[kc.kappa], h_mid - h[0]);
      e.add_var(1, 1, v.R[i]);
      e.add_var(1, 1, v.Rc, h_top);
      if (h_top - h_mid != 0.0) e.add_var(1, 1, v.R[kc.kappa], h_top - h_mid);
      e.add_var(1, 1, v.P[i], -1.0);
      e.add_var(1, 1, v.S, -1.0);
      e.add_var(1, 3, v.S);

      fill_delay_core(e, v, i, 2, 3, 4);

      // slack column cancels the quadrature row
      e.add_var(5, 5, v.P[i], -1.0);
      e.add_var(5, 6, v.S, -w1);
      e.add_var(5, 7, v.T, -w2);
      e.add_var(6, 6, v.S, -1.0);
      e.add_var(7, 7, v.T, -1.0);
      cs.lmis.push_back(std::move(e));
    }
  }

  append_small_lmis(cs, v, Pi, n);
  const std::size_t pos = append_positivity(cs, v, n);

  prob.counts.main = 2 * M;
  prob.counts.main_dim = 8 * n;
  prob.counts.reciprocal = 1;
  prob.counts.positivity = pos;
  prob.counts.coupling = 2 * M;
  prob.counts.variables = cs.registry.size();
  return prob;
}

MjlsAnalysisOutcome analyze_mjls(const MjlsDelaySystem& sys, double alpha,
                                 const SolveOptions& opts) {
  check_driver_rate(alpha);
  AssembledProblem prob = build_mjls_analysis_lmis(sys, alpha);
  MjlsAnalysisOutcome out;
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
  MjlsAnalysisCertificate cert;
  cert.alpha = alpha;
  cert.Pi = sys.Pi;
  cert.constants = compute_constants(sys.base.grid, sys.Pi);
  cert.registry = prob.cs.registry;
  cert.variables = out.solve.assignment;
  cert.margins = std::move(check);
  out.certificate = std::move(cert);
  return out;
}

MjlsSynthesisOutcome synthesize_mjls(const Plant& plant, const DelayGrid& grid,
                                     const Matrix& Pi, double alpha,
                                     const SolveOptions& opts) {
  check_driver_rate(alpha);
  AssembledProblem prob = build_mjls_synthesis_lmis(plant, grid, Pi, alpha);
  MjlsSynthesisOutcome out;
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
  const VarId xv = prob.cs.registry.find("Xt");
  const Matrix& X = out.solve.assignment[xv.index];
  const double cond = cond_2(X);
  if (!(cond <= 1e8))
    throw std::runtime_error("ill-conditioned recovery: cond(Xt) = " +
                             std::to_string(cond));
  Gains gains;
  for (std::size_t i = 0; i < M; ++i) {
    const VarId yv = prob.cs.registry.find(tag("Yt", i + 1));
    const Matrix& Y = out.solve.assignment[yv.index];
    // K X = Y  =>  X^T K^T = Y^T
    Matrix Kt = lu_solve(X.transpose(), Y.transpose());
    gains.K.push_back(Kt.transpose());
    gains.recovery_cond.push_back(cond);
  }

  MjlsSynthesisCertificate cert;
  cert.alpha = alpha;
  cert.Pi = Pi;
  cert.constants = compute_constants(grid, Pi);
  cert.registry = prob.cs.registry;
  cert.variables = out.solve.assignment;
  cert.margins = std::move(check);
  cert.gains = std::move(gains);
  cert.reanalysis = analyze_mjls(
      MjlsDelaySystem(closed_loop(plant, cert.gains, grid), Pi), alpha, opts);
  out.certificate = std::move(cert);
  return out;
}

MjlsDecaySearchResult max_decay_rate_mjls(const MjlsDelaySystem& sys,
                                          const BisectOptions& opts) {
  MjlsDecaySearchResult res;
  std::optional<MjlsAnalysisCertificate> best;
  res.trace = bisect_decay_rate(opts, [&](double a, ProbeRecord& rec) {
    MjlsAnalysisOutcome out = analyze_mjls(sys, a, opts.solver);
    rec.alpha = a;
    rec.status = out.status;
    rec.worst_margin = out.solve.worst_margin;
    if (out.status != SolveStatus::feasible) return false;
    best = std::move(out.certificate);
    return true;
  });
  if (!best) throw std::runtime_error("mjls: bisection kept no certificate");
  res.alpha_star = res.trace.alpha_star;
  res.certificate = std::move(*best);
  return res;
}

MjlsDesignSearchResult max_mjls_synthesis_rate(const Plant& plant,
                                               const DelayGrid& grid,
                                               const Matrix& Pi,
                                               const BisectOptions& opts) {
  MjlsDesignSearchResult res;
  std::optional<MjlsSynthesisCertificate> best;
  res.trace = bisect_decay_rate(opts, [&](double a, ProbeRecord& rec) {
    MjlsSynthesisOutcome out = synthesize_mjls(plant, grid, Pi, a, opts.solver);
    rec.alpha = a;
    rec.status = out.status;
    rec.worst_margin = out.solve.worst_margin;
    if (out.status != SolveStatus::feasible) return false;
    best = std::move(out.certificate);
    return true;
  });
  if (!best) throw std::runtime_error("mjls: bisection kept no certificate");
  res.alpha_star = res.trace.alpha_star;
  res.certificate = std::move(*best);
  return res;
}

}  // namespace ncs
