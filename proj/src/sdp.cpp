#include "ncs/sdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <nlohmann/json.hpp>

#include "ncs/kernels.hpp"

namespace ncs {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::feasible: return "feasible";
    case SolveStatus::infeasible: return "infeasible";
    default: return "inconclusive";
  }
}

SolveOptions SolveOptions::from_env() {
  SolveOptions o;
  if (const char* env = std::getenv("NCS_SOLVER_TOL")) {
    char* end = nullptr;
    const double v = std::strtod(env, &end);
    if (end != env && v > 0.0 && std::isfinite(v)) o.tol = v;
  }
  return o;
}

namespace {

constexpr double kEpsShiftRel = 1e-7;    // strict-block definiteness shift
constexpr double kInfeasTol = 1e-9;      // certified max-margin threshold
constexpr double kKappaGrowth = 8.0;
constexpr double kCenterTol = 0.25;      // Newton decrement target per stage

struct SparseSym {
  // Triplets of the full symmetric coefficient matrix (both triangles).
  std::vector<int> row, col;
  std::vector<double> val;
  void add(int i, int j, double v) {
    if (v == 0.0) return;
    row.push_back(i);
    col.push_back(j);
    val.push_back(v);
  }
  double frobenius() const {
    double s = 0.0;
    for (double v : val) s += v * v;
    return std::sqrt(s);
  }
  void scale(double a) {
    for (double& v : val) v *= a;
  }
};

struct CompiledBlock {
  std::string label;
  Sense sense = Sense::nonneg;
  int dim = 0;
  bool margin = false;           // margin variable attached
  Matrix constant;               // oriented so the block demand is F >= 0
  std::vector<int> scalars;      // global scalar ids, ascending
  std::vector<SparseSym> coeffs; // aligned with scalars
  double row_scale = 1.0;
  double eps = 0.0;              // shift actually applied (strict blocks)
};

struct Compiled {
  std::size_t nscalars = 0;      // decision scalars (margin excluded)
  std::vector<CompiledBlock> blocks;
  std::vector<double> col_scale; // x = col_scale .* x_solver
};

// Accumulates L * E_s * R contributions for every scalar coordinate of one
// term into per-scalar dense block buffers.
void accumulate_term(const VariableRegistry& reg, const Term& t,
                     std::size_t row_off, std::size_t col_off, double sign,
                     std::vector<std::vector<double>>& dense,
                     std::vector<bool>& touched, std::size_t lmi_dim) {
  const auto& in = reg.info(t.var);
  const std::size_t base = reg.scalar_offset(t.var);
  const Matrix& L = t.left;
  const Matrix& R = t.right;
  const std::size_t lr = L.rows(), rc = R.cols();

  auto add_outer = [&](std::size_t s, std::size_t k, std::size_t l) {
    // contribution L[:,k] * R[l,:]
    auto& buf = dense[s];
    if (buf.empty()) buf.assign(lmi_dim * lmi_dim, 0.0);
    touched[s] = true;
    for (std::size_t i = 0; i < lr; ++i) {
      const double lik = L(i, k);
      if (lik == 0.0) continue;
      double* out = buf.data() + (row_off + i) * lmi_dim + col_off;
      const double f = sign * lik;
      for (std::size_t j = 0; j < rc; ++j) out[j] += f * R(l, j);
    }
  };

  if (in.kind == VarKind::symmetric) {
    std::size_t s = base;
    for (std::size_t k = 0; k < in.rows; ++k)
      for (std::size_t l = k; l < in.cols; ++l, ++s) {
        add_outer(s, k, l);
        if (l != k) add_outer(s, l, k);
      }
  } else {
    std::size_t s = base;
    for (std::size_t k = 0; k < in.rows; ++k)
      for (std::size_t l = 0; l < in.cols; ++l, ++s) {
        if (t.transpose_var)
          add_outer(s, l, k);
        else
          add_outer(s, k, l);
      }
  }
}

// Flattens one LmiExpr into a constant matrix plus per-scalar coefficient
// matrices of the full symmetric evaluation (upper blocks mirrored, diagonal
// blocks averaged), matching evaluate() exactly.
void flatten_lmi(const VariableRegistry& reg, const LmiExpr& expr,
                 Matrix& constant, std::vector<SparseSym>& coeffs,
                 std::vector<int>& scalars) {
  const std::size_t nb = expr.block_count();
  const std::size_t n = expr.dim();
  std::vector<std::size_t> off(nb + 1, 0);
  for (std::size_t i = 0; i < nb; ++i)
    off[i + 1] = off[i] + expr.block_dims()[i];

  const std::size_t p = reg.total_scalars();
  std::vector<std::vector<double>> dense(p);
  std::vector<bool> touched(p, false);
  Matrix raw(n, n);

  for (const auto& [key, e] : expr.entries()) {
    const auto [bi, bj] = key;
    if (!e.constant.empty()) {
      for (std::size_t i = 0; i < e.rows; ++i)
        for (std::size_t j = 0; j < e.cols; ++j)
          raw(off[bi] + i, off[bj] + j) += e.constant(i, j);
    }
    for (const Term& t : e.terms) {
      const auto& in = reg.info(t.var);
      const std::size_t vr = t.transpose_var ? in.cols : in.rows;
      const std::size_t vc = t.transpose_var ? in.rows : in.cols;
      if (t.left.cols() != vr || t.right.rows() != vc ||
          t.left.rows() != e.rows || t.right.cols() != e.cols)
        throw std::invalid_argument("compile: term shape mismatch in " +
                                    expr.label());
      // For symmetric variables the transpose flag is a no-op handled by the
      // coordinate basis; for square ones accumulate_term honors it.
      Term tt = t;
      if (in.kind == VarKind::symmetric) tt.transpose_var = false;
      accumulate_term(reg, tt, off[bi], off[bj], 1.0, dense, touched, n);
    }
  }

  // Symmetrize exactly like assemble_blocks: the upper-triangle block grid is
  // mirrored (full = raw + raw^T), except inside diagonal blocks where the
  // two contributions overlap and must be averaged.
  std::vector<std::size_t> blk_of(n);
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t i = off[b]; i < off[b + 1]; ++i) blk_of[i] = b;
  auto mirror_weight = [&](std::size_t i, std::size_t j) {
    return blk_of[i] == blk_of[j] ? 0.5 : 1.0;
  };

  auto symmetrize = [&](const std::vector<double>& buf, SparseSym& out) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const double v =
            mirror_weight(i, j) * (buf[i * n + j] + buf[j * n + i]);
        if (v != 0.0) {
          out.add((int)i, (int)j, v);
          if (j != i) out.add((int)j, (int)i, v);
        }
      }
  };

  Matrix csym(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      const double v = mirror_weight(i, j) * (raw(i, j) + raw(j, i));
      csym(i, j) = v;
      csym(j, i) = v;
    }
  constant = std::move(csym);

  scalars.clear();
  coeffs.clear();
  for (std::size_t s = 0; s < p; ++s) {
    if (!touched[s]) continue;
    SparseSym sp;
    symmetrize(dense[s], sp);
    if (sp.val.empty()) continue;
    scalars.push_back((int)s);
    coeffs.push_back(std::move(sp));
  }
}

Compiled compile(const ConstraintSet& cs) {
  Compiled out;
  out.nscalars = cs.registry.total_scalars();
  out.col_scale.assign(out.nscalars, 1.0);

  std::vector<double> col_max(out.nscalars, 0.0);
  for (const LmiExpr& l : cs.lmis) {
    CompiledBlock b;
    b.label = l.label();
    b.sense = l.sense();
    b.dim = (int)l.dim();
    flatten_lmi(cs.registry, l, b.constant, b.coeffs, b.scalars);
    if (b.sense == Sense::strict_neg) {
      // Orient to F >= 0 and apply the definiteness shift.
      b.eps = kEpsShiftRel * (1.0 + b.constant.frobenius_norm());
      b.constant *= -1.0;
      for (std::size_t i = 0; i < (std::size_t)b.dim; ++i)
        b.constant(i, i) -= b.eps;
      for (auto& c : b.coeffs) c.scale(-1.0);
      b.margin = true;
    }
    for (std::size_t k = 0; k < b.scalars.size(); ++k)
      col_max[b.scalars[k]] =
          std::max(col_max[b.scalars[k]], b.coeffs[k].frobenius());
    out.blocks.push_back(std::move(b));
  }

  for (std::size_t s = 0; s < out.nscalars; ++s)
    out.col_scale[s] = col_max[s] > 0.0 ? 1.0 / col_max[s] : 1.0;

  for (CompiledBlock& b : out.blocks) {
    b.row_scale = std::max(1.0, b.constant.frobenius_norm());
    const double inv = 1.0 / b.row_scale;
    b.constant *= inv;
    b.eps *= inv;
    for (std::size_t k = 0; k < b.scalars.size(); ++k)
      b.coeffs[k].scale(inv * out.col_scale[b.scalars[k]]);
  }
  return out;
}

// F = constant + sum_s y_s A_s (+ margin ? -t I : 0), dense symmetric.
void eval_block(const CompiledBlock& b, const std::vector<double>& y, double t,
                Matrix& f) {
  f = b.constant;
  for (std::size_t k = 0; k < b.scalars.size(); ++k) {
    const double ys = y[b.scalars[k]];
    if (ys == 0.0) continue;
    const SparseSym& sp = b.coeffs[k];
    for (std::size_t e = 0; e < sp.val.size(); ++e)
      f(sp.row[e], sp.col[e]) += ys * sp.val[e];
  }
  if (b.margin)
    for (int i = 0; i < b.dim; ++i) f(i, i) -= t;
}

double logdet_from_chol(const Matrix& l) {
  double s = 0.0;
  for (std::size_t i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

struct Workspace {
  std::vector<Matrix> F, L;      // per block value and Cholesky factor
  Matrix scratch;
  std::vector<double> G;         // row-major [active x dim^2]
  Matrix H;
  std::vector<double> grad;
};

// Barrier value at (y, t); +inf when outside the domain.
double barrier_value(const Compiled& pc, const std::vector<double>& y,
                     double t, double kappa, double R, double tcap,
                     Workspace& w) {
  double phi = -kappa * t;
  for (std::size_t c = 0; c < pc.blocks.size(); ++c) {
    eval_block(pc.blocks[c], y, t, w.F[c]);
    if (!cholesky(w.F[c], w.L[c]))
      return std::numeric_limits<double>::infinity();
    phi -= logdet_from_chol(w.L[c]);
  }
  for (double ys : y) {
    const double wm = R - ys, wp = R + ys;
    if (wm <= 0.0 || wp <= 0.0) return std::numeric_limits<double>::infinity();
    phi -= std::log(wm) + std::log(wp);
  }
  const double wc = tcap - t;
  if (wc <= 0.0) return std::numeric_limits<double>::infinity();
  phi -= std::log(wc);
  return phi;
}

}  // namespace

FeasibilityResult solve_feasibility(const ConstraintSet& cs,
                                    const SolveOptions& opts) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(clock::now() - t0).count();
  };

  FeasibilityResult res;
  Compiled pc = compile(cs);
  const std::size_t p = pc.nscalars;

  if (pc.blocks.empty()) {
    res.status = SolveStatus::feasible;
    res.assignment = identity_assignment(cs.registry);
    res.worst_margin = -std::numeric_limits<double>::infinity();
    res.detail = "no constraints";
    return res;
  }

  // Start point: identity assignment in solver coordinates.
  std::vector<double> y = pack_scalars(cs.registry,
                                       identity_assignment(cs.registry));
  for (std::size_t s = 0; s < p; ++s) y[s] /= pc.col_scale[s];

  Workspace w;
  w.F.resize(pc.blocks.size());
  w.L.resize(pc.blocks.size());

  // Attach the margin variable to nonneg blocks that are not strictly
  // interior at the start, then pick t0 below every margin block's minimum
  // eigenvalue so the initial point is strictly inside the barrier domain.
  double tmin = 0.0;
  for (CompiledBlock& b : pc.blocks) {
    eval_block(b, y, 0.0, w.scratch);
    const double lmin = min_eig(SymMatrix(w.scratch));
    if (!b.margin && lmin <= 1e-12) b.margin = true;
    if (b.margin) tmin = std::min(tmin, lmin);
  }
  double t = tmin - 1.0;

  double nu = 1.0;  // t-cap barrier
  for (const CompiledBlock& b : pc.blocks) nu += b.dim;
  nu += 2.0 * (double)p;

  const double R = opts.var_bound;
  const double tcap = opts.margin_cap;
  double kappa = 1.0;
  const double kappa_max = 2.0 * nu / 1e-10;

  auto build_assignment = [&](const std::vector<double>& yy) {
    std::vector<double> orig(p);
    for (std::size_t s = 0; s < p; ++s) orig[s] = yy[s] * pc.col_scale[s];
    return unpack_scalars(cs.registry, orig);
  };

  auto finish_feasible = [&](const std::vector<double>& yy, double tt) {
    Assignment a = build_assignment(yy);
    CertificateCheck chk = check_certificate(cs, a, opts.tol);
    if (!chk.pass) return false;
    res.status = SolveStatus::feasible;
    res.assignment = std::move(a);
    res.worst_margin = chk.worst_margin;
    res.margin_value = tt;
    return true;
  };

  int iters = 0;
  std::string stall;
  const std::size_t pt = p;  // index of t in the Newton variable vector

  while (kappa <= kappa_max) {
    // --- center at this kappa ---
    bool centered = false;
    for (int inner = 0; inner < 100; ++inner) {
      if (iters >= opts.max_iterations || elapsed() > opts.time_limit_s) {
        res.status = SolveStatus::inconclusive;
        res.iterations = iters;
        res.wall_time_s = elapsed();
        res.margin_value = t;
        res.detail = iters >= opts.max_iterations ? "iteration budget exhausted"
                                                  : "time budget exhausted";
        return res;
      }
      ++iters;

      // Factor all blocks at the current point.
      for (std::size_t c = 0; c < pc.blocks.size(); ++c) {
        eval_block(pc.blocks[c], y, t, w.F[c]);
        if (!cholesky(w.F[c], w.L[c])) {
          res.status = SolveStatus::inconclusive;
          res.iterations = iters;
          res.wall_time_s = elapsed();
          res.detail = "lost interior point";
          return res;
        }
      }

      // Assemble gradient and Hessian.
      const std::size_t nv = p + 1;
      w.H = Matrix(nv, nv);
      w.grad.assign(nv, 0.0);
      w.grad[pt] = -kappa;

      for (std::size_t c = 0; c < pc.blocks.size(); ++c) {
        const CompiledBlock& b = pc.blocks[c];
        const std::size_t n = (std::size_t)b.dim;
        const std::size_t nact = b.scalars.size() + (b.margin ? 1 : 0);
        if (nact == 0) continue;
        w.G.assign(nact * n * n, 0.0);

        std::vector<int> act(nact);
        for (std::size_t k = 0; k < b.scalars.size(); ++k) {
          act[k] = b.scalars[k];
          Matrix a(n, n);
          const SparseSym& sp = b.coeffs[k];
          for (std::size_t e = 0; e < sp.val.size(); ++e)
            a(sp.row[e], sp.col[e]) = sp.val[e];
          solve_lower_left(w.L[c], a);
          solve_lowerT_right(w.L[c], a);
          double tr = 0.0;
          for (std::size_t i = 0; i < n; ++i) tr += a(i, i);
          w.grad[act[k]] -= tr;
          std::copy(a.data(), a.data() + n * n, w.G.begin() + k * n * n);
        }
        if (b.margin) {
          act[nact - 1] = (int)pt;
          Matrix a = -1.0 * Matrix::identity(n);
          solve_lower_left(w.L[c], a);
          solve_lowerT_right(w.L[c], a);
          double tr = 0.0;
          for (std::size_t i = 0; i < n; ++i) tr += a(i, i);
          w.grad[pt] -= tr;
          std::copy(a.data(), a.data() + n * n,
                    w.G.begin() + (nact - 1) * n * n);
        }

        Matrix hloc(nact, nact);
        kern::syrk_lower(w.G.data(), nact, n * n, hloc.data(), nact);
        for (std::size_t i = 0; i < nact; ++i)
          for (std::size_t j = 0; j <= i; ++j)
            w.H(act[i], act[j]) += hloc(i, j);
      }

      for (std::size_t s = 0; s < p; ++s) {
        const double wm = R - y[s], wp = R + y[s];
        w.grad[s] += 1.0 / wm - 1.0 / wp;
        w.H(s, s) += 1.0 / (wm * wm) + 1.0 / (wp * wp);
      }
      {
        const double wc = tcap - t;
        w.grad[pt] += 1.0 / wc;
        w.H(pt, pt) += 1.0 / (wc * wc);
      }
      for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = i + 1; j < nv; ++j) w.H(i, j) = w.H(j, i);

      // Newton direction on the Jacobi-scaled system D H D z = -D grad,
      // direction = D z; the scaling keeps the factorization well conditioned
      // under the wildly mixed magnitudes these problems produce. Escalating
      // ridge remains as a backstop for genuinely indefinite rounding.
      std::vector<double> dj(nv);
      for (std::size_t i = 0; i < nv; ++i)
        dj[i] = 1.0 / std::sqrt(std::max(w.H(i, i), 1e-300));
      Matrix Hs(nv, nv);
      for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < nv; ++j)
          Hs(i, j) = dj[i] * w.H(i, j) * dj[j];
      Matrix Lh;
      double ridge = 0.0;
      while (!cholesky(Hs, Lh)) {
        ridge = ridge == 0.0 ? 1e-14 : ridge * 100.0;
        if (!(ridge < 1e40)) break;
        for (std::size_t i = 0; i < nv; ++i) Hs(i, i) += ridge;
      }
      Matrix rhs(nv, 1);
      for (std::size_t i = 0; i < nv; ++i) rhs(i, 0) = -dj[i] * w.grad[i];
      solve_lower_left(Lh, rhs);
      // Back substitution against L^T.
      for (std::size_t ii = nv; ii-- > 0;) {
        double sum = rhs(ii, 0);
        for (std::size_t k = ii + 1; k < nv; ++k) sum -= Lh(k, ii) * rhs(k, 0);
        rhs(ii, 0) = sum / Lh(ii, ii);
      }
      for (std::size_t i = 0; i < nv; ++i) rhs(i, 0) *= dj[i];

      double dec2 = 0.0;
      for (std::size_t i = 0; i < nv; ++i) dec2 -= w.grad[i] * rhs(i, 0);
      const double lambda_nt = std::sqrt(std::max(0.0, dec2));

      if (lambda_nt <= kCenterTol) {
        centered = true;
        break;
      }

      // Max feasible step against the LP rows, then backtracking with an
      // Armijo condition on the barrier value. The damped-Newton initial step
      // 1/(1+lambda) is guaranteed to decrease a self-concordant barrier, so
      // backtracking terminates quickly even far from the central path.
      double smax = 1.0;
      for (std::size_t s = 0; s < p; ++s) {
        const double d = rhs(s, 0);
        if (d > 0.0) smax = std::min(smax, 0.99 * (R - y[s]) / d);
        if (d < 0.0) smax = std::min(smax, 0.99 * (R + y[s]) / -d);
      }
      if (rhs(pt, 0) > 0.0)
        smax = std::min(smax, 0.99 * (tcap - t) / rhs(pt, 0));

      const double phi0 = barrier_value(pc, y, t, kappa, R, tcap, w);
      const double slope = -dec2;  // grad . direction
      double step = std::min(smax, 1.0 / (1.0 + lambda_nt));
      bool moved = false;
      std::vector<double> ytrial(p);
      for (int ls = 0; ls < 60; ++ls) {
        for (std::size_t s = 0; s < p; ++s) ytrial[s] = y[s] + step * rhs(s, 0);
        const double ttrial = t + step * rhs(pt, 0);
        const double phi =
            barrier_value(pc, ytrial, ttrial, kappa, R, tcap, w);
        if (phi <= phi0 + 0.25 * step * slope) {
          y = ytrial;
          t = ttrial;
          moved = true;
          break;
        }
        step *= 0.5;
      }
      if (!moved) {
        stall = "line search stalled";
        break;
      }

      // Fast exit for clearly feasible problems.
      if (t > std::max(1e-3, 1e3 * opts.tol) && finish_feasible(y, t)) {
        res.iterations = iters;
        res.wall_time_s = elapsed();
        res.margin_bound = t + 2.0 * nu / kappa;
        return res;
      }
    }
    const double gap = 2.0 * nu / kappa;
    res.margin_value = t;
    res.margin_bound = t + gap;

    if (t > opts.tol && finish_feasible(y, t)) {
      res.iterations = iters;
      res.wall_time_s = elapsed();
      return res;
    }
    // The duality bound max-margin <= t + gap is only valid at a (near-)
    // centered point; an uncentered stage proves nothing.
    if (centered && t + gap < -kInfeasTol) {
      res.status = SolveStatus::infeasible;
      res.iterations = iters;
      res.wall_time_s = elapsed();
      res.worst_margin = -(t + gap);  // certified shortfall, positive
      res.detail = "duality bound certifies negative max margin";
      return res;
    }
    if (!stall.empty()) {
      res.status = SolveStatus::inconclusive;
      res.iterations = iters;
      res.wall_time_s = elapsed();
      res.detail = stall;
      return res;
    }
    // Repeat an uncentered stage at the same kappa instead of compounding the
    // difficulty; the global budget bounds total work.
    if (centered) kappa *= kKappaGrowth;
  }

  res.status = SolveStatus::inconclusive;
  res.iterations = iters;
  res.wall_time_s = elapsed();
  res.detail = "margin within resolution band";
  return res;
}

CertificateCheck check_certificate(const ConstraintSet& cs,
                                   const Assignment& a, double tol) {
  CertificateCheck out;
  out.pass = true;
  out.worst_margin = -std::numeric_limits<double>::infinity();
  Assignment zero(a.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    zero[i] = Matrix(a[i].rows(), a[i].cols());
  for (const LmiExpr& l : cs.lmis) {
    const SymMatrix v = evaluate(cs.registry, l, a);
    // Constant-part norm sets the tolerance scale, matching the solver's
    // shift convention.
    const double cnorm =
        evaluate(cs.registry, l, zero).mat().frobenius_norm();
    CertificateCheck::Entry e;
    e.label = l.label();
    e.sense = l.sense();
    e.scale = 1.0 + cnorm;
    if (l.sense() == Sense::strict_neg) {
      e.margin = max_eig(v);
      e.pass = e.margin < -tol * e.scale;
      out.worst_margin = std::max(out.worst_margin, e.margin);
    } else {
      e.margin = min_eig(v);
      e.pass = e.margin > -tol * e.scale;
      out.worst_margin = std::max(out.worst_margin, -e.margin);
    }
    out.pass = out.pass && e.pass;
    out.entries.push_back(std::move(e));
  }
  if (cs.lmis.empty())
    out.worst_margin = -std::numeric_limits<double>::infinity();
  return out;
}

std::string dump_standard_form(const ConstraintSet& cs) {
  using nlohmann::json;
  Compiled pc = compile(cs);
  json root;
  root["scalars"] = pc.nscalars;
  root["col_scale"] = pc.col_scale;
  root["lp_rows"] = 2 * pc.nscalars + 1;
  root["blocks"] = json::array();
  for (const CompiledBlock& b : pc.blocks) {
    json jb;
    jb["label"] = b.label;
    jb["sense"] = b.sense == Sense::strict_neg ? "strict_neg" : "nonneg";
    jb["dim"] = b.dim;
    jb["cone"] = "sdp";
    jb["margin"] = b.margin;
    jb["row_scale"] = b.row_scale;
    jb["eps"] = b.eps;
    json ct = json::array();
    for (int i = 0; i < b.dim; ++i)
      for (int j = 0; j < b.dim; ++j)
        if (b.constant(i, j) != 0.0)
          ct.push_back({i, j, b.constant(i, j)});
    jb["constant"] = std::move(ct);
    json coeffs;
    for (std::size_t k = 0; k < b.scalars.size(); ++k) {
      json tr = json::array();
      const SparseSym& sp = b.coeffs[k];
      for (std::size_t e = 0; e < sp.val.size(); ++e)
        tr.push_back({sp.row[e], sp.col[e], sp.val[e]});
      coeffs[std::to_string(b.scalars[k])] = std::move(tr);
    }
    jb["coeffs"] = std::move(coeffs);
    root["blocks"].push_back(std::move(jb));
  }
  return root.dump(2);
}

}  // namespace ncs
