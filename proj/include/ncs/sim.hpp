#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ncs/matrix.hpp"
#include "ncs/system.hpp"

// ============================================================================
// Empirical validation layer: mode/delay trace generation, fixed-step
// integration of the closed-loop delay differential equation, and decay-rate
// estimation from trajectories.
//
// Determinism: every random quantity is drawn from a std::mt19937_64 stream
// seeded by the caller, through fixed bit-to-double transforms (no
// library-defined distributions), so traces are reproducible across
// platforms.  Event generation and waveform generation use decoupled streams
// derived from the same seed.
// ============================================================================

namespace ncs {

// Within-mode delay evolution law.  All three are materialized as waveform
// nodes on a 1 ms lattice per mode segment and linearly interpolated, clipped
// to [lower(i), upper(i) - 1e-6] so the delay never exits the active mode's
// half-open interval:
//  * constant     - interval midpoint;
//  * sinusoid     - 1 Hz sine spanning the interval;
//  * random_walk  - bounded-increment walk, step std = width/50 per node.
enum class Waveform { constant, sinusoid, random_walk };

// Piecewise-constant mode signal with a delay waveform.  The first event is
// at t = 0 (initial mode); later events are switches, strictly increasing.
struct DelayTrace {
  struct Event {
    double t = 0.0;
    std::size_t mode = 0;
  };
  std::vector<Event> events;
  DelayGrid grid;
  double horizon = 0.0;
  std::uint64_t seed = 0;
  Waveform waveform = Waveform::random_walk;
  // Delay waveform nodes per mode segment (1 ms spacing from the segment
  // start); empty for hand-built traces that are never simulated.
  std::vector<std::vector<double>> delay_nodes;

  std::size_t switches() const {
    return events.empty() ? 0 : events.size() - 1;
  }
  // Active mode / delay at time t (t clamped to [0, horizon]).
  std::size_t mode_at(double t) const;
  double delay_at(double t) const;
};

// Random mode trace whose switching density respects the average-dwell-time
// budget: a switch at time s is emitted only where every window ending at s
// keeps its switch count within N0 + len/tau_a (so the output passes
// verify_adt by construction).  tau_a = +infinity gives a single-mode trace.
// Throws std::invalid_argument unless tau_a > 0, N0 >= 1, horizon > 0.
DelayTrace gen_adt_trace(const DelayGrid& grid, double tau_a, double N0,
                         double horizon, std::uint64_t seed,
                         Waveform waveform = Waveform::random_walk);

// Markov-modulated mode trace: holding time in mode i is exponential with
// rate |Pi(i,i)|, the next mode is drawn with probability Pi(i,j)/|Pi(i,i)|.
// A mode with zero exit rate is absorbing (the trace simply stays).  The
// rate matrix is validated like the certification drivers validate it.
DelayTrace gen_markov_trace(const DelayGrid& grid, const Matrix& Pi,
                            double horizon, std::uint64_t seed,
                            Waveform waveform = Waveform::random_walk);

// Exhaustive dwell-time audit over all switch-aligned windows: for switches
// i..j the tightest enclosing window has length t_j - t_i and count j-i+1.
// excess = count - N0 - len/tau_a; the report keeps the worst window.
struct AdtReport {
  bool pass = true;
  double worst_excess = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t window_count = 0;
};
AdtReport verify_adt(const DelayTrace& trace, double tau_a, double N0);

// Initial history x(t) = phi(t) on [-max_delay, 0].
struct InitialFunction {
  std::function<std::vector<double>(double)> value;
  std::string description;
};
InitialFunction constant_history(std::vector<double> x0);

struct Trajectory {
  struct Sample {
    double t = 0.0;
    std::vector<double> x;
    std::size_t mode = 0;
    double delay = 0.0;
  };
  std::vector<Sample> samples;  // uniform step from t = 0
  double step = 0.0;
  std::string initial_description;
  bool diverged = false;  // truncated at the first non-finite state
};

// Integrate  xdot(t) = A x(t) + A_{mode(t)} x(t - delay(t))  by classical
// fixed-step fourth-order Runge-Kutta.  The delayed state is read from the
// stored history by cubic Hermite interpolation (node values + derivatives),
// which keeps the overall order at four; history before t = 0 comes from phi
// directly.  Mode switches are not step-aligned and are not located — the
// step bound keeps the induced error below the verification tolerances.
//
// horizon = 0 simulates the full trace horizon.  Throws std::invalid_argument
// when step is outside (0, min_delay/4], the horizon exceeds the trace, the
// initial function size mismatches, or the trace grid disagrees with the
// system grid.
Trajectory simulate(const SwitchedDelaySystem& sys, const DelayTrace& trace,
                    const InitialFunction& phi, double step = 1e-3,
                    double horizon = 0.0);

// Empirical decay rate: least-squares slope of the log of the peak envelope
// of ||x(t)||_2, after discarding the first discard_fraction of the horizon;
// monotone or plateaued signals (no interior peaks) fall back to fitting all
// retained samples.  Positive = decaying.  Throws std::invalid_argument with
// fewer than 20 retained samples and std::runtime_error("degenerate ...") on
// an all-zero trajectory.
double estimate_decay(const Trajectory& traj, double discard_fraction = 0.1);

// CSV export: header t,x1,...,xn,mode,delay; one row per sample; 12
// significant digits; one-based mode labels.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);

// CSV import: inverse of write_trajectory_csv for the sample table.  The
// returned Trajectory carries the parsed samples, a step inferred from the
// first two rows (0 with fewer than two rows), and empty metadata (the CSV
// stores no initial-history description or divergence flag).  Throws
// std::invalid_argument on a malformed header or row.
Trajectory read_trajectory_csv(std::istream& is);

}  // namespace ncs
