#include "ncs/lmi.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace ncs {

using nlohmann::json;

VarId VariableRegistry::add_symmetric(const std::string& name,
                                      std::size_t dim) {
  if (dim == 0) throw std::invalid_argument("registry: zero-dim variable");
  if (find(name).valid())
    throw std::invalid_argument("registry: duplicate variable name " + name);
  offsets_.push_back(total_scalars());
  vars_.push_back({name, VarKind::symmetric, dim, dim});
  return VarId{vars_.size() - 1};
}

VarId VariableRegistry::add_square(const std::string& name, std::size_t rows,
                                   std::size_t cols) {
  if (rows == 0 || cols == 0)
    throw std::invalid_argument("registry: zero-dim variable");
  if (find(name).valid())
    throw std::invalid_argument("registry: duplicate variable name " + name);
  offsets_.push_back(total_scalars());
  vars_.push_back({name, VarKind::square, rows, cols});
  return VarId{vars_.size() - 1};
}

const VariableRegistry::Info& VariableRegistry::info(VarId v) const {
  if (!v.valid() || v.index >= vars_.size())
    throw std::invalid_argument("registry: bad VarId");
  return vars_[v.index];
}

VarId VariableRegistry::find(const std::string& name) const {
  for (std::size_t i = 0; i < vars_.size(); ++i)
    if (vars_[i].name == name) return VarId{i};
  return VarId{};
}

std::size_t VariableRegistry::scalar_count(VarId v) const {
  const Info& in = info(v);
  return in.kind == VarKind::symmetric ? in.rows * (in.rows + 1) / 2
                                       : in.rows * in.cols;
}

std::size_t VariableRegistry::scalar_offset(VarId v) const {
  info(v);
  return offsets_[v.index];
}

std::size_t VariableRegistry::total_scalars() const {
  if (vars_.empty()) return 0;
  return offsets_.back() + scalar_count(VarId{vars_.size() - 1});
}

Assignment identity_assignment(const VariableRegistry& reg) {
  Assignment a(reg.size());
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& in = reg.info(VarId{i});
    a[i] = in.kind == VarKind::symmetric ? Matrix::identity(in.rows)
                                         : Matrix(in.rows, in.cols);
  }
  return a;
}

std::vector<double> pack_scalars(const VariableRegistry& reg,
                                 const Assignment& a) {
  if (a.size() != reg.size())
    throw std::invalid_argument("pack_scalars: assignment size mismatch");
  std::vector<double> x(reg.total_scalars());
  for (std::size_t v = 0; v < reg.size(); ++v) {
    const auto& in = reg.info(VarId{v});
    const Matrix& m = a[v];
    if (m.rows() != in.rows || m.cols() != in.cols)
      throw std::invalid_argument("pack_scalars: value shape mismatch for " +
                                  in.name);
    std::size_t s = reg.scalar_offset(VarId{v});
    if (in.kind == VarKind::symmetric) {
      for (std::size_t i = 0; i < in.rows; ++i)
        for (std::size_t j = i; j < in.cols; ++j) x[s++] = m(i, j);
    } else {
      for (std::size_t i = 0; i < in.rows; ++i)
        for (std::size_t j = 0; j < in.cols; ++j) x[s++] = m(i, j);
    }
  }
  return x;
}

Assignment unpack_scalars(const VariableRegistry& reg,
                          const std::vector<double>& x) {
  if (x.size() != reg.total_scalars())
    throw std::invalid_argument("unpack_scalars: size mismatch");
  Assignment a(reg.size());
  for (std::size_t v = 0; v < reg.size(); ++v) {
    const auto& in = reg.info(VarId{v});
    Matrix m(in.rows, in.cols);
    std::size_t s = reg.scalar_offset(VarId{v});
    if (in.kind == VarKind::symmetric) {
      for (std::size_t i = 0; i < in.rows; ++i)
        for (std::size_t j = i; j < in.cols; ++j) {
          m(i, j) = x[s];
          m(j, i) = x[s];
          ++s;
        }
    } else {
      for (std::size_t i = 0; i < in.rows; ++i)
        for (std::size_t j = 0; j < in.cols; ++j) m(i, j) = x[s++];
    }
    a[v] = std::move(m);
  }
  return a;
}

LmiExpr::LmiExpr(std::string label, Sense sense,
                 std::vector<std::size_t> block_dims)
    : label_(std::move(label)), sense_(sense), dims_(std::move(block_dims)) {
  for (std::size_t d : dims_)
    if (d == 0) throw std::invalid_argument("LmiExpr: zero block dim");
}

std::size_t LmiExpr::dim() const {
  std::size_t n = 0;
  for (std::size_t d : dims_) n += d;
  return n;
}

AffineEntry& LmiExpr::at(std::size_t i, std::size_t j) {
  if (i >= dims_.size() || j >= dims_.size() || j < i)
    throw std::invalid_argument("LmiExpr::at: need upper-triangle block");
  AffineEntry& e = entries_[{i, j}];
  if (e.rows == 0) {
    e.rows = dims_[i];
    e.cols = dims_[j];
  }
  return e;
}

const AffineEntry* LmiExpr::find(std::size_t i, std::size_t j) const {
  auto it = entries_.find({i, j});
  return it == entries_.end() ? nullptr : &it->second;
}

void LmiExpr::add_const(std::size_t i, std::size_t j, const Matrix& c) {
  AffineEntry& e = at(i, j);
  if (c.rows() != e.rows || c.cols() != e.cols)
    throw std::invalid_argument("add_const: shape mismatch in " + label_);
  if (e.constant.empty())
    e.constant = c;
  else
    e.constant += c;
}

void LmiExpr::add_term(std::size_t i, std::size_t j, const Matrix& left,
                       VarId v, const Matrix& right, bool transpose_var) {
  AffineEntry& e = at(i, j);
  if (left.rows() != e.rows || right.cols() != e.cols)
    throw std::invalid_argument("add_term: outer shape mismatch in " + label_);
  e.terms.push_back({left, v, right, transpose_var});
}

void LmiExpr::add_var(std::size_t i, std::size_t j, VarId v, double scale,
                      bool transpose_var) {
  AffineEntry& e = at(i, j);
  add_term(i, j, scale * Matrix::identity(e.rows), v,
           Matrix::identity(e.cols), transpose_var);
}

namespace {

Matrix eval_entry(const VariableRegistry& reg, const AffineEntry& e,
                  const Assignment& a, const std::string& label) {
  Matrix out(e.rows, e.cols);
  if (!e.constant.empty()) out += e.constant;
  for (const Term& t : e.terms) {
    if (!t.var.valid() || t.var.index >= a.size())
      throw std::invalid_argument("evaluate: unbound variable in " + label);
    const auto& in = reg.info(t.var);
    const Matrix& v = a[t.var.index];
    if (v.rows() != in.rows || v.cols() != in.cols)
      throw std::invalid_argument("evaluate: value shape mismatch for " +
                                  in.name);
    const Matrix vv = t.transpose_var ? v.transpose() : v;
    if (t.left.cols() != vv.rows() || vv.cols() != t.right.rows())
      throw std::invalid_argument("evaluate: term inner shape mismatch in " +
                                  label);
    out += t.left * vv * t.right;
  }
  return out;
}

}  // namespace

SymMatrix evaluate(const VariableRegistry& reg, const LmiExpr& expr,
                   const Assignment& a) {
  const std::size_t nb = expr.block_count();
  std::vector<std::vector<Matrix>> grid(nb, std::vector<Matrix>(nb));
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t j = i; j < nb; ++j) {
      const AffineEntry* e = expr.find(i, j);
      if (e)
        grid[i][j] = eval_entry(reg, *e, a, expr.label());
      else
        grid[i][j] = Matrix(expr.block_dims()[i], expr.block_dims()[j]);
    }
  }
  return assemble_blocks(grid);
}

std::vector<LmiExpr> coupling_constraints(
    const VariableRegistry& reg,
    const std::vector<std::pair<VarId, VarId>>& pairs, double mu) {
  if (!(mu > 1.0))
    throw std::invalid_argument("coupling_constraints: mu must exceed 1");
  std::vector<LmiExpr> out;
  out.reserve(pairs.size());
  for (const auto& [vi, vj] : pairs) {
    const auto& ii = reg.info(vi);
    const auto& ij = reg.info(vj);
    if (ii.rows != ii.cols || ij.rows != ij.cols || ii.rows != ij.rows)
      throw std::invalid_argument(
          "coupling_constraints: variables must be square of equal dim");
    LmiExpr e("couple:" + ii.name + "<=mu*" + ij.name, Sense::nonneg,
              {ii.rows});
    auto add_sym_part = [&e, &reg](VarId v, double w) {
      if (reg.info(v).kind == VarKind::symmetric) {
        e.add_var(0, 0, v, w);
      } else {  // square: couple the symmetric part (V + V^T)/2
        e.add_var(0, 0, v, 0.5 * w);
        e.add_var(0, 0, v, 0.5 * w, /*transpose_var=*/true);
      }
    };
    add_sym_part(vj, mu);
    add_sym_part(vi, -1.0);
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace

std::string dump_json(const ConstraintSet& cs) {
  json root;
  root["vars"] = json::array();
  for (std::size_t i = 0; i < cs.registry.size(); ++i) {
    const auto& in = cs.registry.info(VarId{i});
    root["vars"].push_back(
        {{"name", in.name},
         {"kind", in.kind == VarKind::symmetric ? "symmetric" : "square"},
         {"rows", in.rows},
         {"cols", in.cols}});
  }
  root["lmis"] = json::array();
  for (const LmiExpr& l : cs.lmis) {
    json jl;
    jl["label"] = l.label();
    jl["sense"] = l.sense() == Sense::strict_neg ? "strict_neg" : "nonneg";
    jl["dims"] = l.block_dims();
    jl["mode"] = l.mode;
    jl["vertex"] = l.vertex;
    jl["blocks"] = json::array();
    for (const auto& [key, e] : l.entries()) {
      json jb;
      jb["i"] = key.first;
      jb["j"] = key.second;
      if (!e.constant.empty()) jb["constant"] = matrix_to_json(e.constant);
      jb["terms"] = json::array();
      for (const Term& t : e.terms) {
        jb["terms"].push_back(
            {{"left", matrix_to_json(t.left)},
             {"var", cs.registry.info(t.var).name},
             {"right", matrix_to_json(t.right)},
             {"transpose", t.transpose_var}});
      }
      jl["blocks"].push_back(std::move(jb));
    }
    root["lmis"].push_back(std::move(jl));
  }
  return root.dump(2);
}

}  // namespace ncs
