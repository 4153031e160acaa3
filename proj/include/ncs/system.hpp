#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ncs/matrix.hpp"

// ============================================================================
// System descriptions shared by analysis, synthesis, and simulation:
// plants, delay grids, switching regimes, feedback gains, closed loops,
// and the JSON configuration format.  All value types are immutable after
// construction and validate their invariants up front; all internal times
// are in seconds.
// ============================================================================

namespace ncs {

// Partition of the admissible delay range into M contiguous mode intervals:
// boundaries b_0 < b_1 < ... < b_M (seconds, b_0 >= 0); mode i in [0, M)
// covers delays in [b_i, b_{i+1}).
class DelayGrid {
 public:
  DelayGrid() = default;
  explicit DelayGrid(std::vector<double> boundaries_seconds);

  std::size_t modes() const { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }
  const std::vector<double>& boundaries() const { return boundaries_; }
  double lower(std::size_t mode) const { return boundaries_[mode]; }
  double upper(std::size_t mode) const { return boundaries_[mode + 1]; }
  double width(std::size_t mode) const { return upper(mode) - lower(mode); }
  double min_delay() const { return boundaries_.front(); }
  double max_delay() const { return boundaries_.back(); }

  // Mode index for a delay in [min_delay, max_delay); throws std::out_of_range
  // outside that half-open interval.  O(log M).
  std::size_t mode_of(double delay_seconds) const;

 private:
  std::vector<double> boundaries_;
};

// Open-loop plant  xdot = A x + B u.
struct Plant {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Plant() = default;
  Plant(Matrix a, Matrix b);
  std::size_t n() const { return A.rows(); }
  std::size_t m() const { return B.cols(); }
};

// Mode-indexed state-feedback gains u = K_i x(t - tau_i(t)).  recovery_cond
// carries the slack-inversion condition numbers when the gains came out of
// synthesis; it is empty for user-supplied gains.
struct Gains {
  std::vector<Matrix> K;  // each m x n
  std::vector<double> recovery_cond;
};

// Closed loop  xdot = A x(t) + A_i x(t - tau_i(t)),  A_i = B K_i.
struct SwitchedDelaySystem {
  Matrix A;
  std::vector<Matrix> delayed;  // A_i, one per mode
  DelayGrid grid;
  SwitchedDelaySystem() = default;
  SwitchedDelaySystem(Matrix a, std::vector<Matrix> delayed_mats, DelayGrid g);
  std::size_t n() const { return A.rows(); }
  std::size_t modes() const { return grid.modes(); }
};

// Closed loop whose delay mode evolves as a continuous-time Markov chain
// with transition-rate matrix Pi (off-diagonal rates >= 0, rows sum to 0).
// The constructor recomputes each diagonal entry from the off-diagonal row
// so the row sums are exactly zero, and rejects inputs whose given diagonal
// disagrees beyond rounding.
struct MjlsDelaySystem {
  SwitchedDelaySystem base;
  Matrix Pi;  // M x M, 1/seconds
  MjlsDelaySystem() = default;
  MjlsDelaySystem(SwitchedDelaySystem sys, Matrix pi);
};

SwitchedDelaySystem closed_loop(const Plant& plant, const Gains& gains,
                                const DelayGrid& grid);

// Decay-shifted matrices for the exponential change of variables at rate
// alpha >= 0: A_alpha = alpha*I + A, and per mode the two delay-interval
// endpoint scalings rho[i] = {e^{alpha b_i}, e^{alpha b_{i+1}}} with
// vertex matrices vertices[i][j] = rho[i][j] * A_i.
struct ShiftedMatrices {
  Matrix A_alpha;
  std::vector<std::array<double, 2>> rho;
  std::vector<std::array<Matrix, 2>> vertices;
};

ShiftedMatrices shifted_matrices(const SwitchedDelaySystem& sys, double alpha);

// Stationary distribution of the rate matrix: pi_inf * Pi = 0, entries
// summing to 1.  Requires an irreducible chain (the directed graph of
// positive off-diagonal rates must be strongly connected); throws
// std::invalid_argument otherwise.
std::vector<double> invariant_distribution(const Matrix& pi);

// --- configuration --------------------------------------------------------
//
// JSON schema (matrices are row-major nested arrays):
//   {
//     "plant":  {"A": [[...]], "B": [[...]]},
//     "grid":   {"boundaries": [h1, ..., hM1], "unit": "ms" | "s"},
//     "gains":  [K_1, ..., K_M],          // optional
//     "markov": {"Pi": [[...]]}           // optional, 1/seconds
//   }
// All validation failures throw std::invalid_argument with a located message.

struct SystemConfig {
  Plant plant;
  DelayGrid grid;
  std::optional<Gains> gains;
  std::optional<Matrix> markov_pi;
};

SystemConfig parse_config(const std::string& json_text);
SystemConfig load_config(const std::string& path);

}  // namespace ncs
