#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ncs/matrix.hpp"

// ============================================================================
// LMI modeling layer.
//
// A constraint set is a list of symmetric block expressions, affine in a
// registry of matrix decision variables:
//
//   F(x) = C + sum_t  L_t * V_t (or V_t^T) * R_t
//
// stored per upper-triangle block.  Evaluation mirrors the upper triangle, so
// the value is symmetric for every assignment by construction.  Senses are
// "strictly negative definite" and "positive semidefinite"; strictness policy
// is the solver's business, not the model's.
// ============================================================================

namespace ncs {

enum class VarKind { symmetric, square };

struct VarId {
  std::size_t index = SIZE_MAX;
  bool valid() const { return index != SIZE_MAX; }
  friend bool operator==(VarId a, VarId b) { return a.index == b.index; }
  friend bool operator<(VarId a, VarId b) { return a.index < b.index; }
};

class VariableRegistry {
 public:
  struct Info {
    std::string name;
    VarKind kind = VarKind::symmetric;
    std::size_t rows = 0;
    std::size_t cols = 0;
  };

  VarId add_symmetric(const std::string& name, std::size_t dim);
  VarId add_square(const std::string& name, std::size_t rows, std::size_t cols);

  std::size_t size() const { return vars_.size(); }
  const Info& info(VarId v) const;
  VarId find(const std::string& name) const;  // invalid VarId when absent

  // Scalar coordinates: symmetric d x d contributes d(d+1)/2 (upper triangle,
  // row-major), square r x c contributes r*c (row-major).
  std::size_t scalar_count(VarId v) const;
  std::size_t scalar_offset(VarId v) const;
  std::size_t total_scalars() const;

 private:
  std::vector<Info> vars_;
  std::vector<std::size_t> offsets_;
};

// One matrix value per registry variable, indexed by VarId::index.
using Assignment = std::vector<Matrix>;

Assignment identity_assignment(const VariableRegistry& reg);
std::vector<double> pack_scalars(const VariableRegistry& reg,
                                 const Assignment& a);
Assignment unpack_scalars(const VariableRegistry& reg,
                          const std::vector<double>& x);

struct Term {
  Matrix left;
  VarId var;
  Matrix right;
  bool transpose_var = false;
};

struct AffineEntry {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix constant;  // empty == zero
  std::vector<Term> terms;
};

enum class Sense { strict_neg, nonneg };

class LmiExpr {
 public:
  LmiExpr() = default;
  LmiExpr(std::string label, Sense sense, std::vector<std::size_t> block_dims);

  const std::string& label() const { return label_; }
  Sense sense() const { return sense_; }
  std::size_t block_count() const { return dims_.size(); }
  const std::vector<std::size_t>& block_dims() const { return dims_; }
  std::size_t dim() const;

  // Optional provenance tag (mode index, embedding vertex), -1 when unset.
  int mode = -1;
  int vertex = -1;

  // Access to block (i, j), j >= i only.  at() creates the entry on demand.
  AffineEntry& at(std::size_t i, std::size_t j);
  const AffineEntry* find(std::size_t i, std::size_t j) const;

  // Convenience builders for block (i, j).
  void add_const(std::size_t i, std::size_t j, const Matrix& c);
  void add_term(std::size_t i, std::size_t j, const Matrix& left, VarId v,
                const Matrix& right, bool transpose_var = false);
  // left * V * I and I * V * I shorthands.
  void add_var(std::size_t i, std::size_t j, VarId v, double scale = 1.0,
               bool transpose_var = false);

  const std::map<std::pair<std::size_t, std::size_t>, AffineEntry>& entries()
      const {
    return entries_;
  }

 private:
  std::string label_;
  Sense sense_ = Sense::nonneg;
  std::vector<std::size_t> dims_;
  std::map<std::pair<std::size_t, std::size_t>, AffineEntry> entries_;
};

struct ConstraintSet {
  VariableRegistry registry;
  std::vector<LmiExpr> lmis;
};

// Evaluate one LMI at an assignment.  Throws on dimension or coverage errors.
SymMatrix evaluate(const VariableRegistry& reg, const LmiExpr& expr,
                   const Assignment& a);

// mu*V_j - V_i >= 0 for each ordered pair (i, j).  Square variables are
// coupled through their symmetric parts (V + V^T)/2.  Throws unless mu > 1.
std::vector<LmiExpr> coupling_constraints(
    const VariableRegistry& reg,
    const std::vector<std::pair<VarId, VarId>>& pairs, double mu);

// Debug dump.  Key set:
//   {"vars": [{"name","kind","rows","cols"}],
//    "lmis": [{"label","sense","dims","mode","vertex",
//              "blocks": [{"i","j","constant"?,
//                          "terms":[{"left","var","right","transpose"}]}]}]}
// Matrices are row-major nested arrays; "sense" is "strict_neg" | "nonneg".
std::string dump_json(const ConstraintSet& cs);

}  // namespace ncs
