#include "ncs/system.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ncs {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

// Shared rate-matrix validation: off-diagonal rates nonnegative, given
// diagonal within rounding of the negated off-diagonal row sum.  Returns the
// matrix with the diagonal recomputed so each row sums to exactly zero.
Matrix validate_rate_matrix(Matrix pi) {
  const std::size_t m = pi.rows();
  if (m == 0 || pi.cols() != m) fail("rate matrix must be square");
  pi.require_finite("rate matrix");
  const double scale = 1.0 + pi.max_abs();
  for (std::size_t i = 0; i < m; ++i) {
    double off = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      if (pi(i, j) < 0.0)
        fail("rate matrix: off-diagonal transition rates must be >= 0");
      off += pi(i, j);
    }
    if (std::abs(pi(i, i) + off) > 1e-8 * scale)
      fail("rate matrix: row does not sum to zero");
    pi(i, i) = -off;  // exact row sums from here on
  }
  return pi;
}

}  // namespace

DelayGrid::DelayGrid(std::vector<double> boundaries_seconds)
    : boundaries_(std::move(boundaries_seconds)) {
  if (boundaries_.size() < 2)
    fail("DelayGrid: need at least two boundaries (one mode)");
  if (!(boundaries_.front() >= 0.0))
    fail("DelayGrid: smallest delay bound must be >= 0");
  for (std::size_t k = 0; k + 1 < boundaries_.size(); ++k) {
    if (!(boundaries_[k] < boundaries_[k + 1]))
      fail("DelayGrid: boundaries must be strictly increasing");
  }
  for (double b : boundaries_)
    if (!std::isfinite(b)) fail("DelayGrid: non-finite boundary");
}

std::size_t DelayGrid::mode_of(double delay_seconds) const {
  if (!(delay_seconds >= min_delay()) || !(delay_seconds < max_delay()))
    throw std::out_of_range("DelayGrid::mode_of: delay outside grid range");
  // First boundary strictly greater than the delay, minus one.
  auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(),
                             delay_seconds);
  return static_cast<std::size_t>(it - boundaries_.begin()) - 1;
}

Plant::Plant(Matrix a, Matrix b) : A(std::move(a)), B(std::move(b)) {
  if (A.rows() == 0 || A.rows() != A.cols()) fail("Plant: A must be square");
  if (B.rows() != A.rows() || B.cols() == 0)
    fail("Plant: B must have as many rows as A and at least one column");
  A.require_finite("Plant.A");
  B.require_finite("Plant.B");
}

SwitchedDelaySystem::SwitchedDelaySystem(Matrix a,
                                         std::vector<Matrix> delayed_mats,
                                         DelayGrid g)
    : A(std::move(a)), delayed(std::move(delayed_mats)), grid(std::move(g)) {
  if (A.rows() == 0 || A.rows() != A.cols())
    fail("SwitchedDelaySystem: A must be square");
  if (delayed.size() != grid.modes())
    fail("SwitchedDelaySystem: need exactly one delayed matrix per mode");
  for (const Matrix& ai : delayed) {
    if (ai.rows() != A.rows() || ai.cols() != A.cols())
      fail("SwitchedDelaySystem: delayed matrix dimension mismatch");
    ai.require_finite("SwitchedDelaySystem.delayed");
  }
  A.require_finite("SwitchedDelaySystem.A");
}

MjlsDelaySystem::MjlsDelaySystem(SwitchedDelaySystem sys, Matrix pi)
    : base(std::move(sys)), Pi(validate_rate_matrix(std::move(pi))) {
  if (Pi.rows() != base.modes())
    fail("MjlsDelaySystem: Pi must be modes x modes");
}

SwitchedDelaySystem closed_loop(const Plant& plant, const Gains& gains,
                                const DelayGrid& grid) {
  if (gains.K.size() != grid.modes())
    fail("closed_loop: need exactly one gain per delay mode");
  std::vector<Matrix> delayed;
  delayed.reserve(gains.K.size());
  for (const Matrix& k : gains.K) {
    if (k.rows() != plant.m() || k.cols() != plant.n())
      fail("closed_loop: gain dimensions must be m x n");
    k.require_finite("closed_loop gain");
    delayed.push_back(plant.B * k);
  }
  return SwitchedDelaySystem(plant.A, std::move(delayed), grid);
}

ShiftedMatrices shifted_matrices(const SwitchedDelaySystem& sys,
                                 double alpha) {
  if (!(alpha >= 0.0)) fail("shifted_matrices: alpha must be >= 0");
  ShiftedMatrices out;
  out.A_alpha = sys.A + alpha * Matrix::identity(sys.n());
  out.rho.resize(sys.modes());
  out.vertices.resize(sys.modes());
  for (std::size_t i = 0; i < sys.modes(); ++i) {
    out.rho[i] = {std::exp(alpha * sys.grid.lower(i)),
                  std::exp(alpha * sys.grid.upper(i))};
    out.vertices[i] = {out.rho[i][0] * sys.delayed[i],
                       out.rho[i][1] * sys.delayed[i]};
  }
  return out;
}

std::vector<double> invariant_distribution(const Matrix& pi) {
  const std::size_t m = pi.rows();
  Matrix validated = validate_rate_matrix(pi);

  // Irreducibility: the directed graph of positive off-diagonal rates must
  // be strongly connected.  Two breadth-first sweeps (forward and reverse)
  // from vertex 0 suffice.
  auto reachable = [&](bool forward) {
    std::vector<char> seen(m, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      std::size_t v = stack.back();
      stack.pop_back();
      for (std::size_t w = 0; w < m; ++w) {
        if (w == v || seen[w]) continue;
        const double rate = forward ? validated(v, w) : validated(w, v);
        if (rate > 0.0) {
          seen[w] = 1;
          stack.push_back(w);
        }
      }
    }
    return seen;
  };
  for (bool dir : {true, false}) {
    auto seen = reachable(dir);
    for (char s : seen)
      if (!s) fail("invariant_distribution: chain is not irreducible");
  }

  // Solve pi_inf * Pi = 0, sum(pi_inf) = 1: transpose the system and replace
  // the last equation by the normalization row.
  Matrix a = validated.transpose();
  Matrix rhs(m, 1);
  for (std::size_t j = 0; j < m; ++j) a(m - 1, j) = 1.0;
  rhs(m - 1, 0) = 1.0;
  Matrix x = lu_solve(a, rhs);

  std::vector<double> dist(m);
  for (std::size_t i = 0; i < m; ++i) dist[i] = x(i, 0);
  // Postcondition check: residual of the stationarity equation.
  for (std::size_t j = 0; j < m; ++j) {
    double r = 0.0;
    for (std::size_t i = 0; i < m; ++i) r += dist[i] * validated(i, j);
    if (std::abs(r) >= 1e-10)
      throw std::runtime_error(
          "invariant_distribution: stationarity residual too large");
  }
  return dist;
}

// --- configuration ---------------------------------------------------------

namespace {

using nlohmann::json;

Matrix parse_matrix(const json& node, const std::string& where) {
  if (!node.is_array() || node.empty())
    fail(where + ": expected a non-empty nested array");
  std::size_t rows = node.size();
  if (!node[0].is_array() || node[0].empty())
    fail(where + ": expected a non-empty nested array");
  std::size_t cols = node[0].size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const json& row = node[i];
    if (!row.is_array() || row.size() != cols)
      fail(where + ": ragged rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!row[j].is_number()) fail(where + ": non-numeric entry");
      m(i, j) = row[j].get<double>();
    }
  }
  m.require_finite(where.c_str());
  return m;
}

}  // namespace

SystemConfig parse_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("config: invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) fail("config: top level must be an object");
  if (!doc.contains("plant") || !doc["plant"].is_object())
    fail("config: missing \"plant\" object");
  if (!doc.contains("grid") || !doc["grid"].is_object())
    fail("config: missing \"grid\" object");

  const json& pl = doc["plant"];
  if (!pl.contains("A") || !pl.contains("B"))
    fail("config: plant needs \"A\" and \"B\"");
  Plant plant(parse_matrix(pl["A"], "config plant.A"),
              parse_matrix(pl["B"], "config plant.B"));

  const json& gr = doc["grid"];
  if (!gr.contains("boundaries") || !gr["boundaries"].is_array())
    fail("config: grid needs a \"boundaries\" array");
  if (!gr.contains("unit") || !gr["unit"].is_string())
    fail("config: grid needs a \"unit\" of \"ms\" or \"s\"");
  const std::string unit = gr["unit"].get<std::string>();
  double to_seconds = 0.0;
  if (unit == "ms")
    to_seconds = 1e-3;
  else if (unit == "s")
    to_seconds = 1.0;
  else
    fail("config: grid.unit must be \"ms\" or \"s\"");
  std::vector<double> bounds;
  for (const json& b : gr["boundaries"]) {
    if (!b.is_number()) fail("config: grid.boundaries must be numeric");
    bounds.push_back(b.get<double>() * to_seconds);
  }
  SystemConfig cfg;
  cfg.plant = plant;
  cfg.grid = DelayGrid(std::move(bounds));

  if (doc.contains("gains")) {
    if (!doc["gains"].is_array())
      fail("config: gains must be an array of matrices");
    Gains g;
    std::size_t idx = 0;
    for (const json& k : doc["gains"]) {
      g.K.push_back(
          parse_matrix(k, "config gains[" + std::to_string(idx) + "]"));
      ++idx;
    }
    if (g.K.size() != cfg.grid.modes())
      fail("config: need exactly one gain per delay mode");
    for (const Matrix& k : g.K)
      if (k.rows() != plant.m() || k.cols() != plant.n())
        fail("config: gain dimensions must be m x n");
    cfg.gains = std::move(g);
  }

  if (doc.contains("markov")) {
    if (!doc["markov"].is_object() || !doc["markov"].contains("Pi"))
      fail("config: markov needs a \"Pi\" matrix");
    Matrix pi = parse_matrix(doc["markov"]["Pi"], "config markov.Pi");
    if (pi.rows() != cfg.grid.modes() || pi.cols() != cfg.grid.modes())
      fail("config: markov.Pi must be modes x modes");
    cfg.markov_pi = std::move(pi);
  }
  return cfg;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("config: cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ncs
