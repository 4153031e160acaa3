#include "ncs/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ncs/kernels.hpp"

namespace ncs {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_)
      throw std::invalid_argument("Matrix: ragged initializer rows");
    data_.insert(data_.end(), r.begin(), r.end());
  }
  require_finite("Matrix initializer");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::diag(const std::vector<double>& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  m.require_finite("Matrix::diag");
  return m;
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix& Matrix::operator+=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_)
    throw std::invalid_argument("Matrix += shape mismatch");
  kern::axpy(1.0, o.data(), data(), data_.size());
  return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
  if (rows_ != o.rows_ || cols_ != o.cols_)
    throw std::invalid_argument("Matrix -= shape mismatch");
  kern::axpy(-1.0, o.data(), data(), data_.size());
  return *this;
}

Matrix& Matrix::operator*=(double a) {
  kern::scal(a, data(), data_.size());
  return *this;
}

double Matrix::frobenius_norm() const {
  return std::sqrt(kern::dot(data(), data(), data_.size()));
}

double Matrix::max_abs() const {
  double m = 0.0;
  for (double v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Matrix::is_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void Matrix::require_finite(const char* what) const {
  if (!is_finite())
    throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double a, Matrix m) { return m *= a; }
Matrix operator-(const Matrix& m) { return -1.0 * m; }

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("Matrix *: inner dimension mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik != 0.0) kern::row_update(aik, b.row(k), ci, b.cols());
    }
  }
  return c;
}

bool operator==(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

SymMatrix::SymMatrix(const Matrix& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("SymMatrix: input not square");
  m.require_finite("SymMatrix");
  const std::size_t n = m.rows();
  double asym2 = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = m(i, j) - m(j, i);
      asym2 += 2.0 * d * d;
    }
  const double tol = kAsymmetryRelTol * m.frobenius_norm();
  if (std::sqrt(asym2) > tol && std::sqrt(asym2) > 0.0)
    throw std::invalid_argument("SymMatrix: asymmetry above tolerance");
  m_ = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    m_(i, i) = m(i, i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (m(i, j) + m(j, i));
      m_(i, j) = avg;
      m_(j, i) = avg;
    }
  }
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      if (aij == 0.0) continue;
      for (std::size_t p = 0; p < b.rows(); ++p)
        for (std::size_t q = 0; q < b.cols(); ++q)
          k(i * b.rows() + p, j * b.cols() + q) = aij * b(p, q);
    }
  return k;
}

// --- Jacobi eigensolver -----------------------------------------------------

namespace {

// Cyclic Jacobi with the standard stable rotation; converges quadratically
// and keeps symmetric pairs exact, which is all the certificate checks need.
void jacobi_eig(Matrix a, std::vector<double>& evals, Matrix* evecs) {
  const std::size_t n = a.rows();
  if (evecs) *evecs = Matrix::identity(n);
  if (n == 0) {
    evals.clear();
    return;
  }
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += a(i, i) * a(i, i);
    if (off <= 1e-30 * (diag + off) || off == 0.0) break;

    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p), aqq = a(q, q);
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0)
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        if (evecs) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = (*evecs)(k, p), vkq = (*evecs)(k, q);
            (*evecs)(k, p) = c * vkp - s * vkq;
            (*evecs)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  evals.resize(n);
  for (std::size_t i = 0; i < n; ++i) evals[i] = a(i, i);
  // Sort ascending, carrying eigenvectors along.
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t x, std::size_t y) { return evals[x] < evals[y]; });
  std::vector<double> sorted(n);
  for (std::size_t i = 0; i < n; ++i) sorted[i] = evals[idx[i]];
  evals = std::move(sorted);
  if (evecs) {
    Matrix v(n, n);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) v(i, j) = (*evecs)(i, idx[j]);
    *evecs = std::move(v);
  }
}

}  // namespace

std::vector<double> sym_eigenvalues(const SymMatrix& a, Matrix* evecs) {
  a.mat().require_finite("sym_eigenvalues");
  std::vector<double> evals;
  jacobi_eig(a.mat(), evals, evecs);
  return evals;
}

double min_eig(const SymMatrix& a) {
  if (a.dim() == 0) throw std::invalid_argument("min_eig: empty matrix");
  return sym_eigenvalues(a).front();
}

double max_eig(const SymMatrix& a) {
  if (a.dim() == 0) throw std::invalid_argument("max_eig: empty matrix");
  return sym_eigenvalues(a).back();
}

SymMatrix assemble_blocks(const std::vector<std::vector<Matrix>>& blocks) {
  const std::size_t nb = blocks.size();
  for (const auto& row : blocks)
    if (row.size() != nb)
      throw std::invalid_argument("assemble_blocks: grid not square");

  // Block sizes come from the diagonal; every upper block must agree.
  std::vector<std::size_t> dim(nb), off(nb + 1, 0);
  for (std::size_t i = 0; i < nb; ++i) {
    if (blocks[i][i].empty())
      throw std::invalid_argument("assemble_blocks: missing diagonal block");
    if (blocks[i][i].rows() != blocks[i][i].cols())
      throw std::invalid_argument("assemble_blocks: diagonal block not square");
    dim[i] = blocks[i][i].rows();
    off[i + 1] = off[i] + dim[i];
  }
  for (std::size_t i = 0; i < nb; ++i)
    for (std::size_t j = 0; j < nb; ++j) {
      const Matrix& b = blocks[i][j];
      if (j < i) {
        if (!b.empty())
          throw std::invalid_argument(
              "assemble_blocks: blocks below the diagonal must be empty");
        continue;
      }
      if (b.empty()) continue;
      if (b.rows() != dim[i] || b.cols() != dim[j])
        throw std::invalid_argument("assemble_blocks: block shape mismatch");
    }

  Matrix m(off[nb], off[nb]);
  for (std::size_t i = 0; i < nb; ++i) {
    // Diagonal block, averaged so m is exactly symmetric.
    const Matrix& d = blocks[i][i];
    for (std::size_t r = 0; r < dim[i]; ++r) {
      m(off[i] + r, off[i] + r) = d(r, r);
      for (std::size_t c = r + 1; c < dim[i]; ++c) {
        const double avg = 0.5 * (d(r, c) + d(c, r));
        m(off[i] + r, off[i] + c) = avg;
        m(off[i] + c, off[i] + r) = avg;
      }
    }
    for (std::size_t j = i + 1; j < nb; ++j) {
      const Matrix& b = blocks[i][j];
      if (b.empty()) continue;
      for (std::size_t r = 0; r < dim[i]; ++r)
        for (std::size_t c = 0; c < dim[j]; ++c) {
          m(off[i] + r, off[j] + c) = b(r, c);
          m(off[j] + c, off[i] + r) = b(r, c);
        }
    }
  }
  return SymMatrix(m);
}

// --- factorizations ---------------------------------------------------------

bool cholesky(const Matrix& a, Matrix& l) {
  if (a.rows() != a.cols()) return false;
  const std::size_t n = a.rows();
  l = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j) - kern::dot(l.row(j), l.row(j), j);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      const double s = a(i, j) - kern::dot(l.row(i), l.row(j), j);
      l(i, j) = s / ljj;
    }
  }
  return true;
}

void solve_lower_left(const Matrix& l, Matrix& x) {
  const std::size_t n = l.rows();
  if (x.rows() != n) throw std::invalid_argument("solve_lower_left: shape");
  const std::size_t m = x.cols();
  for (std::size_t i = 0; i < n; ++i) {
    double* xi = x.row(i);
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      if (lik != 0.0) kern::axpy(-lik, x.row(k), xi, m);
    }
    kern::scal(1.0 / l(i, i), xi, m);
  }
}

void solve_lowerT_right(const Matrix& l, Matrix& x) {
  // X <- X L^-T  ==  for each row r of X: solve r L^T = r' row-wise, i.e.
  // standard back-substitution against L^T from the left applied to x^T; done
  // in place by iterating columns in order (L^T is upper triangular).
  const std::size_t n = l.rows();
  if (x.cols() != n) throw std::invalid_argument("solve_lowerT_right: shape");
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* xr = x.row(r);
    for (std::size_t j = 0; j < n; ++j) {
      double s = xr[j];
      for (std::size_t k = 0; k < j; ++k) s -= xr[k] * l(j, k);
      xr[j] = s / l(j, j);
    }
  }
}

Matrix lu_solve(Matrix a, Matrix b) {
  if (a.rows() != a.cols() || a.rows() != b.rows())
    throw std::invalid_argument("lu_solve: shape mismatch");
  const std::size_t n = a.rows();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double pmax = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > pmax) pmax = std::abs(a(piv = i, k));
    if (pmax == 0.0 || !std::isfinite(pmax))
      throw std::runtime_error("lu_solve: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(piv, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      if (f == 0.0) continue;
      a(i, k) = 0.0;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      kern::axpy(-f, b.row(k), b.row(i), b.cols());
    }
  }
  for (std::size_t ki = n; ki-- > 0;) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = b(ki, j);
      for (std::size_t c = ki + 1; c < n; ++c) s -= a(ki, c) * b(c, j);
      b(ki, j) = s / a(ki, ki);
    }
  }
  return b;
}

double cond_2(const Matrix& a) {
  if (a.rows() != a.cols() || a.rows() == 0)
    throw std::invalid_argument("cond_2: square matrix required");
  const Matrix ata = a.transpose() * a;
  const auto ev = sym_eigenvalues(SymMatrix(ata));
  const double lmin = ev.front(), lmax = ev.back();
  if (lmin <= 0.0) return std::numeric_limits<double>::infinity();
  return std::sqrt(lmax / lmin);
}

std::string to_string(const Matrix& m, int precision) {
  std::ostringstream os;
  os.precision(precision);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    os << (i == 0 ? "[" : " ");
    for (std::size_t j = 0; j < m.cols(); ++j)
      os << m(i, j) << (j + 1 < m.cols() ? ", " : "");
    os << (i + 1 < m.rows() ? ";\n" : "]");
  }
  return os.str();
}

}  // namespace ncs
