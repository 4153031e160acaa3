#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

// ============================================================================
// Dense matrix core.
//
// Desk-scale dense linear algebra: the certification problems top out around
// a few hundred decision scalars and constraint blocks of dimension ~100, so
// everything is plain row-major storage over the runtime-dispatched kernels.
// No view types, no expression templates.
// ============================================================================

namespace ncs {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-initialized
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);
  static Matrix diag(const std::vector<double>& d);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  Matrix transpose() const;
  Matrix& operator+=(const Matrix& o);
  Matrix& operator-=(const Matrix& o);
  Matrix& operator*=(double a);

  double frobenius_norm() const;
  double max_abs() const;
  bool is_finite() const;

  // Throws std::invalid_argument when any entry is NaN/Inf.  Constructors
  // taking external data call this; internal arithmetic trusts its inputs.
  void require_finite(const char* what) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(double a, Matrix m);
inline Matrix operator*(Matrix m, double a) {
  m *= a;
  return m;
}
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& m);
bool operator==(const Matrix& a, const Matrix& b);

// Symmetric view with a guarded constructor: input is averaged with its
// transpose, and anything asymmetric beyond 1e-10 * ||M||_F is rejected
// outright rather than silently repaired.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(const Matrix& m);

  std::size_t dim() const { return m_.rows(); }
  const Matrix& mat() const { return m_; }
  double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }

  static constexpr double kAsymmetryRelTol = 1e-10;

 private:
  Matrix m_;
};

Matrix kron(const Matrix& a, const Matrix& b);

// Smallest/largest eigenvalue of a symmetric matrix (cyclic Jacobi).
double min_eig(const SymMatrix& a);
double max_eig(const SymMatrix& a);

// All eigenvalues, ascending.  evecs (optional) gets the orthonormal
// eigenvector columns in matching order.
std::vector<double> sym_eigenvalues(const SymMatrix& a, Matrix* evecs = nullptr);

// Assemble a block matrix from its upper triangle (blocks[i][j] for j >= i;
// entries below the diagonal must be empty) and mirror it so the result is
// bit-exactly symmetric.  Diagonal blocks are symmetrized by averaging.
// Throws on inconsistent block dimensions.
SymMatrix assemble_blocks(const std::vector<std::vector<Matrix>>& blocks);

// --- factorizations -------------------------------------------------------

// A = L L^T, lower triangular L.  Returns false when A is not positive
// definite (or a pivot is not finite); contents of L are then unspecified.
bool cholesky(const Matrix& a, Matrix& l);

// In-place triangular ops against a lower factor L (unit stride, row-major):
//   X <- L^-1 X      (solve_lower_left)
//   X <- X L^-T      (solve_lowerT_right)
void solve_lower_left(const Matrix& l, Matrix& x);
void solve_lowerT_right(const Matrix& l, Matrix& x);

// Solve A X = B via LU with partial pivoting.  Throws on singular A.
Matrix lu_solve(Matrix a, Matrix b);

// 2-norm condition number of a square matrix (via eigenvalues of A^T A).
double cond_2(const Matrix& a);

std::string to_string(const Matrix& m, int precision = 6);

}  // namespace ncs
