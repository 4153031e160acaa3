#include "ncs/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

#include "ncs/kernels.hpp"

namespace ncs {
namespace {

constexpr double kNodeDt = 1e-3;   // waveform lattice spacing
constexpr double kEdgeGap = 1e-6;  // keep delays off the open upper boundary

[[noreturn]] void fail(const std::string& what) {
  throw std::invalid_argument("sim: " + what);
}

// Uniform [0, 1) from the top 53 bits; fixed transform so traces are
// platform-independent.
double unit(std::mt19937_64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

double exponential(std::mt19937_64& g, double rate) {
  return -std::log1p(-unit(g)) / rate;
}

std::size_t pick_index(std::mt19937_64& g, std::size_t k) {
  const auto i = static_cast<std::size_t>(unit(g) * static_cast<double>(k));
  return std::min(i, k - 1);
}

std::uint64_t waveform_stream(std::uint64_t seed) {
  return seed ^ 0x9E3779B97F4A7C15ULL;
}

void check_rate_matrix(const DelayGrid& grid, const Matrix& Pi) {
  const std::size_t M = grid.modes();
  if (Pi.rows() != M || Pi.cols() != M)
    fail("rate matrix must be " + std::to_string(M) + "x" + std::to_string(M));
  const double scale = 1.0 + Pi.max_abs();
  for (std::size_t i = 0; i < M; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      if (i != j && Pi(i, j) < 0.0) fail("off-diagonal rates must be nonnegative");
      row += Pi(i, j);
    }
    if (std::abs(row) > 1e-9 * scale) fail("rate matrix rows must sum to zero");
  }
}

// Materialize the delay waveform on the node lattice of every mode segment.
void append_waveform(DelayTrace& tr, std::mt19937_64& wg) {
  tr.delay_nodes.clear();
  tr.delay_nodes.reserve(tr.events.size());
  for (std::size_t k = 0; k < tr.events.size(); ++k) {
    const double start = tr.events[k].t;
    const double end =
        (k + 1 < tr.events.size()) ? tr.events[k + 1].t : tr.horizon;
    const std::size_t m = tr.events[k].mode;
    const double lo = tr.grid.lower(m);
    const double hi = std::max(lo, tr.grid.upper(m) - kEdgeGap);
    const double len = std::max(0.0, end - start);
    const auto count =
        static_cast<std::size_t>(std::floor(len / kNodeDt)) + 2;
    std::vector<double> nodes(count);
    switch (tr.waveform) {
      case Waveform::constant: {
        const double mid =
            std::clamp(0.5 * (tr.grid.lower(m) + tr.grid.upper(m)), lo, hi);
        std::fill(nodes.begin(), nodes.end(), mid);
        break;
      }
      case Waveform::sinusoid: {
        const double mid = 0.5 * (lo + hi);
        const double amp = 0.5 * (hi - lo);
        const double w = 2.0 * 3.14159265358979323846;  // 1 Hz
        for (std::size_t i = 0; i < count; ++i)
          nodes[i] = mid + amp * std::sin(w * static_cast<double>(i) * kNodeDt);
        break;
      }
      case Waveform::random_walk: {
        // Bounded uniform increments with std = width/50 per node.
        const double bound = std::sqrt(3.0) * tr.grid.width(m) / 50.0;
        double v = lo + unit(wg) * (hi - lo);
        for (std::size_t i = 0; i < count; ++i) {
          nodes[i] = v;
          v = std::clamp(v + (2.0 * unit(wg) - 1.0) * bound, lo, hi);
        }
        break;
      }
    }
    tr.delay_nodes.push_back(std::move(nodes));
  }
}

// Index of the segment active at time t.
std::size_t segment_at(const DelayTrace& tr, double t) {
  std::size_t lo = 0, hi = tr.events.size();
  while (hi - lo > 1) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (tr.events[mid].t <= t)
      lo = mid;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

std::size_t DelayTrace::mode_at(double t) const {
  if (events.empty()) throw std::logic_error("sim: trace has no events");
  return events[segment_at(*this, t)].mode;
}

double DelayTrace::delay_at(double t) const {
  if (events.empty()) throw std::logic_error("sim: trace has no events");
  if (delay_nodes.size() != events.size())
    throw std::logic_error("sim: trace has no delay waveform");
  const std::size_t k = segment_at(*this, t);
  const std::vector<double>& nodes = delay_nodes[k];
  const double off = std::max(0.0, t - events[k].t);
  const double pos = off / kNodeDt;
  auto j = static_cast<std::size_t>(pos);
  if (j + 1 >= nodes.size()) return nodes.back();
  const double th = pos - static_cast<double>(j);
  return (1.0 - th) * nodes[j] + th * nodes[j + 1];
}

DelayTrace gen_adt_trace(const DelayGrid& grid, double tau_a, double N0,
                         double horizon, std::uint64_t seed,
                         Waveform waveform) {
  if (grid.modes() == 0) fail("grid has no modes");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (std::isnan(tau_a) || !(tau_a > 0.0)) fail("tau_a must be positive");
  if (!(N0 >= 1.0)) fail("N0 must be at least 1");

  DelayTrace tr;
  tr.grid = grid;
  tr.horizon = horizon;
  tr.seed = seed;
  tr.waveform = waveform;

  std::mt19937_64 eg(seed);
  std::mt19937_64 wg(waveform_stream(seed));
  const std::size_t M = grid.modes();
  std::size_t mode = pick_index(eg, M);
  tr.events.push_back({0.0, mode});

  if (M > 1 && std::isfinite(tau_a)) {
    std::vector<double> sw;  // switch times so far
    double t = 0.0;
    for (;;) {
      // Propose the next switch, then push it late enough that every window
      // ending at it stays within the budget N0 + len/tau_a.
      double cand = t + std::max(exponential(eg, 1.0 / (1.2 * tau_a)), 1e-12);
      for (std::size_t q = 0; q < sw.size(); ++q) {
        const double count = static_cast<double>(sw.size() - q + 1);
        cand = std::max(cand, sw[q] + (count - N0) * tau_a);
      }
      if (cand >= horizon) break;
      const std::size_t r = pick_index(eg, M - 1);
      mode = (r >= mode) ? r + 1 : r;
      sw.push_back(cand);
      tr.events.push_back({cand, mode});
      t = cand;
    }
  }
  append_waveform(tr, wg);
  return tr;
}

DelayTrace gen_markov_trace(const DelayGrid& grid, const Matrix& Pi,
                            double horizon, std::uint64_t seed,
                            Waveform waveform) {
  if (grid.modes() == 0) fail("grid has no modes");
  if (!(horizon > 0.0)) fail("horizon must be positive");
  check_rate_matrix(grid, Pi);

  DelayTrace tr;
  tr.grid = grid;
  tr.horizon = horizon;
  tr.seed = seed;
  tr.waveform = waveform;

  std::mt19937_64 eg(seed);
  std::mt19937_64 wg(waveform_stream(seed));
  const std::size_t M = grid.modes();
  std::size_t mode = 0;  // deterministic start in the first mode
  tr.events.push_back({0.0, mode});

  double t = 0.0;
  for (;;) {
    const double rate = std::abs(Pi(mode, mode));
    if (rate <= 0.0) break;  // absorbing mode
    t += exponential(eg, rate);
    if (t >= horizon) break;
    // Embedded jump chain: next mode with probability Pi(mode, j)/rate.
    const double u = unit(eg) * rate;
    double acc = 0.0;
    std::size_t next = mode;
    for (std::size_t j = 0; j < M; ++j) {
      if (j == mode) continue;
      if (Pi(mode, j) <= 0.0) continue;
      acc += Pi(mode, j);
      next = j;
      if (u < acc) break;
    }
    mode = next;
    tr.events.push_back({t, mode});
  }
  append_waveform(tr, wg);
  return tr;
}

AdtReport verify_adt(const DelayTrace& trace, double tau_a, double N0) {
  AdtReport rep;
  const auto& ev = trace.events;
  if (ev.size() <= 1) return rep;  // no switches at all
  const double inv_tau =
      (tau_a > 0.0 && std::isfinite(tau_a)) ? 1.0 / tau_a : 0.0;

  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < ev.size(); ++i) {
    for (std::size_t j = i; j < ev.size(); ++j) {
      const double len = ev[j].t - ev[i].t;
      const double count = static_cast<double>(j - i + 1);
      const double excess = count - N0 - len * inv_tau;
      if (excess > worst) {
        worst = excess;
        rep.window_start = ev[i].t;
        rep.window_end = ev[j].t;
        rep.window_count = j - i + 1;
      }
    }
  }
  rep.worst_excess = worst;
  rep.pass = worst <= 1e-9;
  return rep;
}

InitialFunction constant_history(std::vector<double> x0) {
  InitialFunction f;
  f.description =
      "constant history, " + std::to_string(x0.size()) + " state(s)";
  f.value = [v = std::move(x0)](double) { return v; };
  return f;
}

Trajectory simulate(const SwitchedDelaySystem& sys, const DelayTrace& trace,
                    const InitialFunction& phi, double step, double horizon) {
  const std::size_t n = sys.n();
  if (n == 0) fail("system has no states");
  if (trace.events.empty()) fail("trace has no events");
  const auto& sb = sys.grid.boundaries();
  const auto& tb = trace.grid.boundaries();
  if (sb.size() != tb.size()) fail("trace grid does not match the system");
  for (std::size_t b = 0; b < sb.size(); ++b)
    if (std::abs(sb[b] - tb[b]) > 1e-12)
      fail("trace grid does not match the system");

  if (horizon == 0.0) horizon = trace.horizon;
  if (!(horizon > 0.0)) fail("horizon must be positive");
  if (horizon > trace.horizon + 1e-12) fail("horizon exceeds the trace");
  const double hmin = sys.grid.min_delay();
  if (!(step > 0.0) || step > hmin / 4.0 + 1e-15)
    fail("step must lie in (0, min_delay/4]");
  if (!phi.value) fail("initial function is empty");
  std::vector<double> x0 = phi.value(0.0);
  if (x0.size() != n) fail("initial function size does not match the system");

  const auto steps =
      static_cast<std::size_t>(std::ceil(horizon / step - 1e-9));
  std::vector<double> xs((steps + 1) * n), fs((steps + 1) * n);
  std::copy(x0.begin(), x0.end(), xs.begin());

  Trajectory out;
  out.step = step;
  out.initial_description = phi.description;
  out.samples.reserve(steps + 1);
  auto push_sample = [&](std::size_t k) {
    Trajectory::Sample s;
    s.t = static_cast<double>(k) * step;
    s.x.assign(xs.begin() + static_cast<std::ptrdiff_t>(k * n),
               xs.begin() + static_cast<std::ptrdiff_t>((k + 1) * n));
    s.mode = trace.mode_at(s.t);
    s.delay = trace.delay_at(s.t);
    out.samples.push_back(std::move(s));
  };
  push_sample(0);

  std::vector<double> xd(n), xtmp(n), k1(n), k2(n), k3(n), k4(n);
  const double max_del = trace.grid.max_delay();

  // x(tq) for tq <= t_k: initial function for tq <= 0, cubic Hermite over the
  // stored node values and derivatives otherwise.  The step bound guarantees
  // tq never reaches into the node pair currently being integrated.
  auto delayed_state = [&](double tq) {
    if (tq <= 0.0) {
      const std::vector<double> v = phi.value(std::max(tq, -max_del));
      if (v.size() != n) fail("initial function size does not match the system");
      std::copy(v.begin(), v.end(), xd.begin());
      return;
    }
    const double pos = tq / step;
    auto j = static_cast<std::size_t>(pos);
    if (j + 1 > steps) j = steps - 1;
    const double th = pos - static_cast<double>(j);
    const double th2 = th * th, th3 = th2 * th;
    const double a0 = 2.0 * th3 - 3.0 * th2 + 1.0;
    const double a1 = (th3 - 2.0 * th2 + th) * step;
    const double b0 = -2.0 * th3 + 3.0 * th2;
    const double b1 = (th3 - th2) * step;
    const double* xj = xs.data() + j * n;
    const double* fj = fs.data() + j * n;
    for (std::size_t i = 0; i < n; ++i)
      xd[i] = a0 * xj[i] + a1 * fj[i] + b0 * xj[n + i] + b1 * fj[n + i];
  };

  auto deriv = [&](double s, const double* xin, double* fout) {
    const std::size_t m = trace.mode_at(s);
    delayed_state(s - trace.delay_at(s));
    const Matrix& Ad = sys.delayed[m];
    for (std::size_t i = 0; i < n; ++i)
      fout[i] = kern::dot(sys.A.row(i), xin, n) +
                kern::dot(Ad.row(i), xd.data(), n);
  };

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * step;
    double* x = xs.data() + k * n;
    double* f = fs.data() + k * n;
    deriv(t, x, k1.data());
    std::copy(k1.begin(), k1.end(), f);

    std::copy(x, x + n, xtmp.begin());
    kern::axpy(0.5 * step, k1.data(), xtmp.data(), n);
    deriv(t + 0.5 * step, xtmp.data(), k2.data());

    std::copy(x, x + n, xtmp.begin());
    kern::axpy(0.5 * step, k2.data(), xtmp.data(), n);
    deriv(t + 0.5 * step, xtmp.data(), k3.data());

    std::copy(x, x + n, xtmp.begin());
    kern::axpy(step, k3.data(), xtmp.data(), n);
    deriv(t + step, xtmp.data(), k4.data());

    double* xn = xs.data() + (k + 1) * n;
    std::copy(x, x + n, xn);
    kern::axpy(step / 6.0, k1.data(), xn, n);
    kern::axpy(step / 3.0, k2.data(), xn, n);
    kern::axpy(step / 3.0, k3.data(), xn, n);
    kern::axpy(step / 6.0, k4.data(), xn, n);

    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) finite = finite && std::isfinite(xn[i]);
    if (!finite) {
      out.diverged = true;
      break;
    }
    push_sample(k + 1);
  }
  return out;
}

double estimate_decay(const Trajectory& traj, double discard_fraction) {
  if (!(discard_fraction >= 0.0 && discard_fraction < 1.0))
    fail("discard fraction must lie in [0, 1)");
  if (traj.samples.empty()) fail("trajectory is empty");
  const double t_begin = traj.samples.front().t;
  const double t_end = traj.samples.back().t;
  const double t0 = t_begin + discard_fraction * (t_end - t_begin);

  std::vector<double> ts, vs;
  for (const auto& s : traj.samples) {
    if (s.t < t0) continue;
    ts.push_back(s.t);
    vs.push_back(std::sqrt(
        kern::dot(s.x.data(), s.x.data(), s.x.size())));
  }
  if (ts.size() < 20)
    fail("need at least 20 samples after the discard window");
  const double vmax = *std::max_element(vs.begin(), vs.end());
  if (vmax <= 0.0)
    throw std::runtime_error("sim: degenerate trajectory (identically zero)");
  const double floor = vmax * 1e-14;

  // Envelope peaks; monotone/plateaued signals have none and fall back to a
  // fit over every retained sample.
  std::vector<std::size_t> idx;
  for (std::size_t i = 1; i + 1 < vs.size(); ++i)
    if (vs[i] > vs[i - 1] && vs[i] >= vs[i + 1] && vs[i] > floor)
      idx.push_back(i);
  if (idx.size() < 5) {
    idx.clear();
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i] > floor) idx.push_back(i);
  }
  if (idx.size() < 2)
    throw std::runtime_error("sim: degenerate trajectory (identically zero)");

  double st = 0.0, sy = 0.0;
  for (std::size_t i : idx) {
    st += ts[i];
    sy += std::log(vs[i]);
  }
  const double mt = st / static_cast<double>(idx.size());
  const double my = sy / static_cast<double>(idx.size());
  double num = 0.0, den = 0.0;
  for (std::size_t i : idx) {
    num += (ts[i] - mt) * (std::log(vs[i]) - my);
    den += (ts[i] - mt) * (ts[i] - mt);
  }
  if (den <= 0.0) fail("trajectory has no time extent");
  return -num / den;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t n =
      traj.samples.empty() ? 0 : traj.samples.front().x.size();
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << (i + 1);
  os << ",mode,delay\n";
  char buf[40];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    os << buf;
  };
  for (const auto& s : traj.samples) {
    put(s.t);
    for (double v : s.x) {
      os << ',';
      put(v);
    }
    os << ',' << (s.mode + 1) << ',';
    put(s.delay);
    os << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        out.push_back(line.substr(start));
        return out;
      }
      out.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
  };
  auto chomp = [](std::string& line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r'))
      line.pop_back();
  };

  std::string line;
  if (!std::getline(is, line)) fail("trajectory csv: missing header");
  chomp(line);
  const std::vector<std::string> head = split(line);
  if (head.size() < 3 || head.front() != "t" ||
      head[head.size() - 2] != "mode" || head.back() != "delay")
    fail("trajectory csv: header must be t,x1,...,xn,mode,delay");
  const std::size_t n = head.size() - 3;
  for (std::size_t i = 0; i < n; ++i)
    if (head[i + 1] != "x" + std::to_string(i + 1))
      fail("trajectory csv: state column " + std::to_string(i + 1) +
           " is misnamed");

  auto number = [&](const std::string& field, std::size_t row) {
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || field.empty())
      fail("trajectory csv: bad number in row " + std::to_string(row));
    return v;
  };

  Trajectory traj;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    chomp(line);
    if (line.empty()) continue;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != n + 3)
      fail("trajectory csv: row " + std::to_string(row) + " has " +
           std::to_string(fields.size()) + " fields, expected " +
           std::to_string(n + 3));
    Trajectory::Sample s;
    s.t = number(fields[0], row);
    s.x.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.x[i] = number(fields[i + 1], row);
    const double mode = number(fields[n + 1], row);
    if (mode < 1.0 || mode != std::floor(mode))
      fail("trajectory csv: row " + std::to_string(row) +
           " has a non-positive-integer mode");
    s.mode = static_cast<std::size_t>(mode) - 1;
    s.delay = number(fields[n + 2], row);
    traj.samples.push_back(std::move(s));
    ++row;
  }
  if (traj.samples.size() >= 2)
    traj.step = traj.samples[1].t - traj.samples[0].t;
  return traj;
}

}  // namespace ncs
