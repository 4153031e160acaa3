// Command-line front-end for the switched/Markov delay certification library.
//
// Subcommands (each accepts --mjls to select the stochastic path):
//   analyze     certify a decay rate for the gains bundled in the config;
//   synthesize  design mode-dependent gains at a requested decay rate;
//   bisect      maximize the certifiable decay rate (--design searches the
//               synthesis program instead of analyzing fixed gains);
//   simulate    integrate the closed loop against a generated delay trace.
//
// Exit codes are a stable contract: 0 = feasible, 1 = usage/config error,
// 2 = infeasible, 3 = inconclusive.  `simulate` returns 0 whenever the
// integration ran (a diverging trajectory is still a successful run).
//
// Outputs (all under --out-dir, fixed names): certificate.json, gains.json,
// bisect.json, sweep.json, summary.json, trajectory.csv, report.txt.  Every
// number is emitted with at least 12 significant digits, and each report
// embeds the FNV-1a hash of the raw config bytes plus the seed in use.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ncs/det_switched.hpp"
#include "ncs/mjls.hpp"
#include "ncs/sim.hpp"
#include "ncs/system.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitFeasible = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitInconclusive = 3;

// One-shot solves get the same per-probe budget the bisection uses: a starved
// run would misreport a near-boundary problem as inconclusive.
ncs::SolveOptions patient_options() {
  ncs::SolveOptions o = ncs::SolveOptions::from_env();
  o.max_iterations = 2000;
  o.time_limit_s = 120.0;
  return o;
}

int status_exit(ncs::SolveStatus s) {
  switch (s) {
    case ncs::SolveStatus::feasible:
      return kExitFeasible;
    case ncs::SolveStatus::infeasible:
      return kExitInfeasible;
    default:
      return kExitInconclusive;
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// --- config hashing --------------------------------------------------------

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write file: " + path.string());
  out << text;
}

// --- JSON serialization of library types -----------------------------------

json matrix_json(const ncs::Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json gains_array_json(const ncs::Gains& g) {
  json arr = json::array();
  for (const ncs::Matrix& k : g.K) arr.push_back(matrix_json(k));
  return arr;
}

json grid_json(const ncs::DelayGrid& grid) {
  return json{{"boundaries", grid.boundaries()}, {"unit", "s"}};
}

json counts_json(const ncs::ProblemCounts& c) {
  return json{{"main", c.main},           {"main_dim", c.main_dim},
              {"reciprocal", c.reciprocal}, {"positivity", c.positivity},
              {"coupling", c.coupling},     {"variables", c.variables}};
}

json solver_json(const ncs::FeasibilityResult& r) {
  return json{{"status", ncs::to_string(r.status)},
              {"iterations", r.iterations},
              {"wall_time_s", r.wall_time_s},
              {"worst_margin", r.worst_margin},
              {"detail", r.detail}};
}

json margins_json(const ncs::CertificateCheck& c) {
  json entries = json::array();
  for (const auto& e : c.entries)
    entries.push_back(
        json{{"label", e.label},
             {"sense", e.sense == ncs::Sense::strict_neg ? "strict_neg"
                                                         : "nonneg"},
             {"margin", e.margin},
             {"scale", e.scale},
             {"pass", e.pass}});
  return json{
      {"pass", c.pass}, {"worst_margin", c.worst_margin}, {"entries", entries}};
}

json variables_json(const ncs::VariableRegistry& reg,
                    const ncs::Assignment& values) {
  json arr = json::array();
  for (std::size_t i = 0; i < reg.size(); ++i) {
    const auto& info = reg.info(ncs::VarId{i});
    arr.push_back(
        json{{"name", info.name},
             {"kind", info.kind == ncs::VarKind::symmetric ? "symmetric"
                                                           : "square"},
             {"value", matrix_json(values[i])}});
  }
  return arr;
}

// kappa is 0-based in the library; exports label modes from 1.
json constants_json(const ncs::MjlsConstants& c) {
  return json{{"eta", c.eta},
              {"kappa", c.kappa + 1},
              {"delta_max", c.delta_max},
              {"eps1", c.eps1},
              {"eps2", c.eps2}};
}

json probes_json(const ncs::BisectTrace& tr) {
  json arr = json::array();
  for (const auto& p : tr.probes)
    arr.push_back(json{{"alpha", p.alpha},
                       {"status", ncs::to_string(p.status)},
                       {"worst_margin", p.worst_margin}});
  return json{{"alpha_star", tr.alpha_star},
              {"upper_bracket_feasible", tr.upper_bracket_feasible},
              {"probes", arr}};
}

// --- report file ------------------------------------------------------------
//
// Plain text, fixed section order: [invocation] then [result] then [outputs].

class Report {
 public:
  Report(std::string command, std::string model, const std::string& cfg_path,
         const std::string& cfg_bytes, std::string seed)
      : command_(std::move(command)), model_(std::move(model)) {
    invocation_.emplace_back("command: " + command_);
    invocation_.emplace_back("model: " + model_);
    invocation_.emplace_back("config: " + cfg_path);
    invocation_.emplace_back("config_fnv1a64: " + hex64(fnv1a64(cfg_bytes)));
    invocation_.emplace_back("seed: " + std::move(seed));
    const char* env = std::getenv("NCS_SOLVER_TOL");
    invocation_.emplace_back(std::string("solver_tol: ") +
                             (env ? env : "default"));
  }

  void param(const std::string& key, const std::string& value) {
    invocation_.emplace_back(key + ": " + value);
  }
  void result(const std::string& key, const std::string& value) {
    results_.emplace_back(key + ": " + value);
  }
  void output(const std::string& kind, const fs::path& path) {
    outputs_.emplace_back(kind + ": " + path.string());
  }

  std::string str() const {
    std::ostringstream os;
    os << "ncs_cli report\n==============\n\n[invocation]\n";
    for (const auto& l : invocation_) os << l << '\n';
    os << "\n[result]\n";
    for (const auto& l : results_) os << l << '\n';
    os << "\n[outputs]\n";
    for (const auto& l : outputs_) os << l << '\n';
    return os.str();
  }

 private:
  std::string command_;
  std::string model_;
  std::vector<std::string> invocation_;
  std::vector<std::string> results_;
  std::vector<std::string> outputs_;
};

// --- shared command state ----------------------------------------------------

struct Common {
  std::string config_path;
  std::string out_dir = ".";
  bool mjls = false;

  std::string cfg_bytes;        // raw file contents (hashed into the report)
  ncs::SystemConfig cfg;        // parsed
  fs::path out;

  void load() {
    cfg_bytes = read_file(config_path);
    cfg = ncs::parse_config(cfg_bytes);
    out = fs::path(out_dir);
    fs::create_directories(out);
  }
  const char* model() const { return mjls ? "markov" : "deterministic"; }
  const ncs::Matrix& pi() const {
    if (!cfg.markov_pi)
      throw std::invalid_argument(
          "config: --mjls needs a \"markov\" section with a rate matrix");
    return *cfg.markov_pi;
  }
  const ncs::Gains& gains() const {
    if (!cfg.gains)
      throw std::invalid_argument(
          "config: this command needs a \"gains\" entry");
    return *cfg.gains;
  }
};

void finish(const Common& c, Report& rep, const fs::path& report_path) {
  rep.output("report", report_path);
  write_file(report_path, rep.str());
  (void)c;
}

// --- analyze -----------------------------------------------------------------

int run_analyze(Common& c, double alpha, double mu) {
  c.load();
  Report rep("analyze", c.model(), c.config_path, c.cfg_bytes, "none");
  rep.param("alpha", fmt(alpha));

  json cert{{"kind", "analysis"}, {"model", c.model()}, {"alpha", alpha}};
  cert["grid"] = grid_json(c.cfg.grid);
  ncs::SolveStatus status;

  if (c.mjls) {
    ncs::MjlsDelaySystem sys(
        ncs::closed_loop(c.cfg.plant, c.gains(), c.cfg.grid), c.pi());
    const ncs::MjlsAnalysisOutcome out =
        ncs::analyze_mjls(sys, alpha, patient_options());
    status = out.status;
    cert["Pi"] = matrix_json(sys.Pi);
    cert["status"] = ncs::to_string(out.status);
    cert["counts"] = counts_json(out.counts);
    cert["solver"] = solver_json(out.solve);
    if (out.certificate) {
      cert["constants"] = constants_json(out.certificate->constants);
      cert["margins"] = margins_json(out.certificate->margins);
      cert["variables"] =
          variables_json(out.certificate->registry, out.certificate->variables);
    }
    rep.result("status", ncs::to_string(out.status));
    rep.result("worst_margin", fmt(out.solve.worst_margin));
  } else {
    rep.param("mu", fmt(mu));
    ncs::SwitchedDelaySystem sys =
        ncs::closed_loop(c.cfg.plant, c.gains(), c.cfg.grid);
    const ncs::AnalysisOutcome out =
        ncs::analyze(sys, alpha, mu, patient_options());
    status = out.status;
    cert["mu"] = mu;
    cert["tau_a"] = ncs::dwell_time_bound(mu, alpha);
    cert["status"] = ncs::to_string(out.status);
    cert["counts"] = counts_json(out.counts);
    cert["solver"] = solver_json(out.solve);
    if (out.certificate) {
      cert["margins"] = margins_json(out.certificate->margins);
      cert["variables"] =
          variables_json(out.certificate->registry, out.certificate->variables);
    }
    rep.result("status", ncs::to_string(out.status));
    rep.result("tau_a", fmt(ncs::dwell_time_bound(mu, alpha)));
    rep.result("worst_margin", fmt(out.solve.worst_margin));
  }

  const fs::path cert_path = c.out / "certificate.json";
  write_file(cert_path, cert.dump(2) + "\n");
  rep.output("certificate", cert_path);
  finish(c, rep, c.out / "report.txt");
  return status_exit(status);
}

// --- synthesize ---------------------------------------------------------------

json det_gains_json(const ncs::SynthesisCertificate& sc) {
  json g{{"kind", "gains"},
         {"model", "deterministic"},
         {"alpha", sc.alpha},
         {"mu", sc.mu},
         {"tau_a", sc.tau_a()},
         {"gains", gains_array_json(sc.gains)},
         {"recovery_cond", sc.gains.recovery_cond}};
  g["reanalysis"] = json{{"status", ncs::to_string(sc.reanalysis.status)}};
  if (sc.reanalysis.certificate)
    g["reanalysis"]["margins"] =
        margins_json(sc.reanalysis.certificate->margins);
  return g;
}

json mjls_gains_json(const ncs::MjlsSynthesisCertificate& sc) {
  json g{{"kind", "gains"},
         {"model", "markov"},
         {"alpha", sc.alpha},
         {"Pi", matrix_json(sc.Pi)},
         {"gains", gains_array_json(sc.gains)},
         {"recovery_cond", sc.gains.recovery_cond}};
  g["reanalysis"] = json{{"status", ncs::to_string(sc.reanalysis.status)}};
  if (sc.reanalysis.certificate)
    g["reanalysis"]["margins"] =
        margins_json(sc.reanalysis.certificate->margins);
  return g;
}

int run_synthesize(Common& c, double alpha, double mu) {
  c.load();
  Report rep("synthesize", c.model(), c.config_path, c.cfg_bytes, "none");
  rep.param("alpha", fmt(alpha));

  json cert{{"kind", "synthesis"}, {"model", c.model()}, {"alpha", alpha}};
  cert["grid"] = grid_json(c.cfg.grid);
  ncs::SolveStatus status;

  if (c.mjls) {
    const ncs::MjlsSynthesisOutcome out =
        ncs::synthesize_mjls(c.cfg.plant, c.cfg.grid, c.pi(), alpha,
                             patient_options());
    status = out.status;
    cert["Pi"] = matrix_json(c.pi());
    cert["status"] = ncs::to_string(out.status);
    cert["counts"] = counts_json(out.counts);
    cert["solver"] = solver_json(out.solve);
    rep.result("status", ncs::to_string(out.status));
    if (out.certificate) {
      const auto& sc = *out.certificate;
      cert["constants"] = constants_json(sc.constants);
      cert["margins"] = margins_json(sc.margins);
      cert["variables"] = variables_json(sc.registry, sc.variables);
      const json g = mjls_gains_json(sc);
      write_file(c.out / "gains.json", g.dump(2) + "\n");
      rep.output("gains", c.out / "gains.json");
      rep.result("reanalysis", ncs::to_string(sc.reanalysis.status));
      for (std::size_t i = 0; i < sc.gains.K.size(); ++i)
        rep.result("K" + std::to_string(i + 1),
                   [&] {
                     std::string s;
                     for (std::size_t j = 0; j < sc.gains.K[i].cols(); ++j)
                       s += (j ? ", " : "[") + fmt(sc.gains.K[i](0, j));
                     return s + "]";
                   }());
    }
  } else {
    rep.param("mu", fmt(mu));
    const ncs::SynthesisOutcome out =
        ncs::synthesize(c.cfg.plant, c.cfg.grid, alpha, mu, patient_options());
    status = out.status;
    cert["mu"] = mu;
    cert["tau_a"] = ncs::dwell_time_bound(mu, alpha);
    cert["status"] = ncs::to_string(out.status);
    cert["counts"] = counts_json(out.counts);
    cert["solver"] = solver_json(out.solve);
    rep.result("status", ncs::to_string(out.status));
    if (out.certificate) {
      const auto& sc = *out.certificate;
      cert["margins"] = margins_json(sc.margins);
      cert["variables"] = variables_json(sc.registry, sc.variables);
      const json g = det_gains_json(sc);
      write_file(c.out / "gains.json", g.dump(2) + "\n");
      rep.output("gains", c.out / "gains.json");
      rep.result("tau_a", fmt(sc.tau_a()));
      rep.result("reanalysis", ncs::to_string(sc.reanalysis.status));
      for (std::size_t i = 0; i < sc.gains.K.size(); ++i)
        rep.result("K" + std::to_string(i + 1),
                   [&] {
                     std::string s;
                     for (std::size_t j = 0; j < sc.gains.K[i].cols(); ++j)
                       s += (j ? ", " : "[") + fmt(sc.gains.K[i](0, j));
                     return s + "]";
                   }());
    }
  }

  const fs::path cert_path = c.out / "certificate.json";
  write_file(cert_path, cert.dump(2) + "\n");
  rep.output("certificate", cert_path);
  finish(c, rep, c.out / "report.txt");
  return status_exit(status);
}

// --- bisect -------------------------------------------------------------------

struct BisectFlags {
  double alpha_lo = 1e-3;
  double alpha_hi = 8.0;
  double tol = 1e-3;
  bool design = false;
};

int run_bisect(Common& c, double mu, const BisectFlags& f) {
  c.load();
  Report rep("bisect", c.model(), c.config_path, c.cfg_bytes, "none");
  rep.param("alpha_lo", fmt(f.alpha_lo));
  rep.param("alpha_hi", fmt(f.alpha_hi));
  rep.param("tol", fmt(f.tol));
  rep.param("design", f.design ? "yes" : "no");

  ncs::BisectOptions opts;
  opts.alpha_lo = f.alpha_lo;
  opts.alpha_hi = f.alpha_hi;
  opts.tol = f.tol;

  json out{{"kind", "bisect"},
           {"model", c.model()},
           {"design", f.design},
           {"grid", grid_json(c.cfg.grid)}};

  try {
    json cert;
    if (c.mjls) {
      if (f.design) {
        const ncs::MjlsDesignSearchResult r =
            ncs::max_mjls_synthesis_rate(c.cfg.plant, c.cfg.grid, c.pi(), opts);
        out["alpha_star"] = r.alpha_star;
        out["trace"] = probes_json(r.trace);
        cert = json{{"kind", "synthesis"},
                    {"model", "markov"},
                    {"alpha", r.certificate.alpha},
                    {"status", "feasible"},
                    {"Pi", matrix_json(r.certificate.Pi)},
                    {"constants", constants_json(r.certificate.constants)},
                    {"margins", margins_json(r.certificate.margins)},
                    {"variables", variables_json(r.certificate.registry,
                                                 r.certificate.variables)}};
        const json g = mjls_gains_json(r.certificate);
        write_file(c.out / "gains.json", g.dump(2) + "\n");
        rep.output("gains", c.out / "gains.json");
        rep.result("status", "feasible");
        rep.result("alpha_star", fmt(r.alpha_star));
      } else {
        ncs::MjlsDelaySystem sys(
            ncs::closed_loop(c.cfg.plant, c.gains(), c.cfg.grid), c.pi());
        const ncs::MjlsDecaySearchResult r = ncs::max_decay_rate_mjls(sys, opts);
        out["alpha_star"] = r.alpha_star;
        out["trace"] = probes_json(r.trace);
        cert = json{{"kind", "analysis"},
                    {"model", "markov"},
                    {"alpha", r.certificate.alpha},
                    {"status", "feasible"},
                    {"Pi", matrix_json(r.certificate.Pi)},
                    {"constants", constants_json(r.certificate.constants)},
                    {"margins", margins_json(r.certificate.margins)},
                    {"variables", variables_json(r.certificate.registry,
                                                 r.certificate.variables)}};
        rep.result("status", "feasible");
        rep.result("alpha_star", fmt(r.alpha_star));
      }
    } else {
      rep.param("mu", fmt(mu));
      out["mu"] = mu;
      if (f.design) {
        const ncs::DesignSearchResult r =
            ncs::max_synthesis_rate(c.cfg.plant, c.cfg.grid, mu, opts);
        out["alpha_star"] = r.alpha_star;
        out["tau_a_star"] = r.tau_a_star;
        out["trace"] = probes_json(r.trace);
        cert = json{{"kind", "synthesis"},
                    {"model", "deterministic"},
                    {"alpha", r.certificate.alpha},
                    {"mu", r.certificate.mu},
                    {"tau_a", r.certificate.tau_a()},
                    {"status", "feasible"},
                    {"margins", margins_json(r.certificate.margins)},
                    {"variables", variables_json(r.certificate.registry,
                                                 r.certificate.variables)}};
        const json g = det_gains_json(r.certificate);
        write_file(c.out / "gains.json", g.dump(2) + "\n");
        rep.output("gains", c.out / "gains.json");
        rep.result("status", "feasible");
        rep.result("alpha_star", fmt(r.alpha_star));
        rep.result("tau_a_star", fmt(r.tau_a_star));
      } else {
        ncs::SwitchedDelaySystem sys =
            ncs::closed_loop(c.cfg.plant, c.gains(), c.cfg.grid);
        const ncs::DecaySearchResult r = ncs::max_decay_rate(sys, mu, opts);
        out["alpha_star"] = r.alpha_star;
        out["tau_a_star"] = r.tau_a_star;
        out["trace"] = probes_json(r.trace);
        cert = json{{"kind", "analysis"},
                    {"model", "deterministic"},
                    {"alpha", r.certificate.alpha},
                    {"mu", r.certificate.mu},
                    {"tau_a", r.certificate.tau_a()},
                    {"status", "feasible"},
                    {"margins", margins_json(r.certificate.margins)},
                    {"variables", variables_json(r.certificate.registry,
                                                 r.certificate.variables)}};
        rep.result("status", "feasible");
        rep.result("alpha_star", fmt(r.alpha_star));
        rep.result("tau_a_star", fmt(r.tau_a_star));
      }
    }
    const fs::path bisect_path = c.out / "bisect.json";
    write_file(bisect_path, out.dump(2) + "\n");
    rep.output("bisect", bisect_path);
    const fs::path cert_path = c.out / "certificate.json";
    write_file(cert_path, cert.dump(2) + "\n");
    rep.output("certificate", cert_path);
    finish(c, rep, c.out / "report.txt");
    return kExitFeasible;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    const bool floor_infeasible =
        what.find("no certified decay rate above floor") != std::string::npos;
    out["status"] = floor_infeasible ? "infeasible" : "inconclusive";
    out["detail"] = what;
    const fs::path bisect_path = c.out / "bisect.json";
    write_file(bisect_path, out.dump(2) + "\n");
    rep.output("bisect", bisect_path);
    rep.result("status", out["status"].get<std::string>());
    rep.result("detail", what);
    finish(c, rep, c.out / "report.txt");
    return floor_infeasible ? kExitInfeasible : kExitInconclusive;
  }
}

// --- sweep (batch bisect/synthesize over grid or rate-matrix variants) -------

struct SweepEntry {
  std::string label;
  std::optional<ncs::DelayGrid> grid;
  std::optional<ncs::Matrix> pi;
  std::optional<double> alpha;
};

std::vector<SweepEntry> parse_sweep(const std::string& text) {
  json doc = json::parse(text, nullptr, true, true);
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc["entries"].is_array() || doc["entries"].empty())
    throw std::invalid_argument(
        "sweep: expected an object with a non-empty \"entries\" array");
  std::vector<SweepEntry> entries;
  for (const json& e : doc["entries"]) {
    SweepEntry se;
    if (!e.contains("label") || !e["label"].is_string())
      throw std::invalid_argument("sweep: every entry needs a string label");
    se.label = e["label"].get<std::string>();
    if (e.contains("grid")) {
      // Reuse the config parser so sweep grids share the schema and checks.
      json wrap{{"plant", {{"A", {{0.0}}}, {"B", {{0.0}}}}},
                {"grid", e["grid"]}};
      se.grid = ncs::parse_config(wrap.dump()).grid;
    }
    if (e.contains("Pi")) {
      json wrap{{"plant", {{"A", {{0.0}}}, {"B", {{0.0}}}}},
                {"grid", {{"boundaries", {1.0, 2.0}}, {"unit", "s"}}},
                {"markov", {{"Pi", e["Pi"]}}}};
      // Mode-count consistency with the entry grid is checked at dispatch.
      se.pi = ncs::parse_config(wrap.dump()).markov_pi;
    }
    if (e.contains("alpha")) {
      if (!e["alpha"].is_number())
        throw std::invalid_argument("sweep: alpha must be a number");
      se.alpha = e["alpha"].get<double>();
    }
    entries.push_back(std::move(se));
  }
  return entries;
}

int run_sweep(Common& c, const std::string& command, double mu,
              const BisectFlags& f, double alpha_flag,
              const std::string& sweep_path, unsigned jobs) {
  c.load();
  const std::string sweep_bytes = read_file(sweep_path);
  std::vector<SweepEntry> entries = parse_sweep(sweep_bytes);

  Report rep(command + "-sweep", c.model(), c.config_path, c.cfg_bytes, "none");
  rep.param("sweep", sweep_path);
  rep.param("sweep_fnv1a64", hex64(fnv1a64(sweep_bytes)));
  rep.param("entries", std::to_string(entries.size()));
  if (jobs == 0) jobs = 1;
  if (jobs > entries.size()) jobs = static_cast<unsigned>(entries.size());
  rep.param("jobs", std::to_string(jobs));

  std::vector<json> results(entries.size());
  std::vector<int> codes(entries.size(), kExitInconclusive);
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= entries.size()) return;
      const SweepEntry& e = entries[idx];
      json r{{"label", e.label}};
      try {
        const ncs::DelayGrid grid = e.grid ? *e.grid : c.cfg.grid;
        r["grid"] = grid_json(grid);
        if (command == "synthesize") {
          const double alpha = e.alpha ? *e.alpha : alpha_flag;
          r["alpha"] = alpha;
          if (c.mjls) {
            const ncs::Matrix& pi = e.pi ? *e.pi : c.pi();
            const auto out = ncs::synthesize_mjls(c.cfg.plant, grid, pi,
                                                  alpha, patient_options());
            r["status"] = ncs::to_string(out.status);
            codes[idx] = status_exit(out.status);
            if (out.certificate) {
              r["gains"] = gains_array_json(out.certificate->gains);
              r["recovery_cond"] = out.certificate->gains.recovery_cond;
              r["reanalysis"] =
                  ncs::to_string(out.certificate->reanalysis.status);
            }
          } else {
            const auto out =
                ncs::synthesize(c.cfg.plant, grid, alpha, mu,
                                patient_options());
            r["status"] = ncs::to_string(out.status);
            codes[idx] = status_exit(out.status);
            if (out.certificate) {
              r["gains"] = gains_array_json(out.certificate->gains);
              r["recovery_cond"] = out.certificate->gains.recovery_cond;
              r["reanalysis"] =
                  ncs::to_string(out.certificate->reanalysis.status);
            }
          }
        } else {  // bisect sweep
          ncs::BisectOptions opts;
          opts.alpha_lo = f.alpha_lo;
          opts.alpha_hi = f.alpha_hi;
          opts.tol = f.tol;
          if (c.mjls) {
            const ncs::Matrix& pi = e.pi ? *e.pi : c.pi();
            if (f.design) {
              const auto res =
                  ncs::max_mjls_synthesis_rate(c.cfg.plant, grid, pi, opts);
              r["status"] = "feasible";
              r["alpha_star"] = res.alpha_star;
              r["gains"] = gains_array_json(res.certificate.gains);
              codes[idx] = kExitFeasible;
            } else {
              ncs::MjlsDelaySystem sys(
                  ncs::closed_loop(c.cfg.plant, c.gains(), grid), pi);
              const auto res = ncs::max_decay_rate_mjls(sys, opts);
              r["status"] = "feasible";
              r["alpha_star"] = res.alpha_star;
              codes[idx] = kExitFeasible;
            }
          } else {
            if (f.design) {
              const auto res =
                  ncs::max_synthesis_rate(c.cfg.plant, grid, mu, opts);
              r["status"] = "feasible";
              r["alpha_star"] = res.alpha_star;
              r["tau_a_star"] = res.tau_a_star;
              r["gains"] = gains_array_json(res.certificate.gains);
              codes[idx] = kExitFeasible;
            } else {
              ncs::SwitchedDelaySystem sys =
                  ncs::closed_loop(c.cfg.plant, c.gains(), grid);
              const auto res = ncs::max_decay_rate(sys, mu, opts);
              r["status"] = "feasible";
              r["alpha_star"] = res.alpha_star;
              r["tau_a_star"] = res.tau_a_star;
              codes[idx] = kExitFeasible;
            }
          }
        }
      } catch (const std::exception& ex) {
        const std::string what = ex.what();
        const bool floor =
            what.find("no certified decay rate above floor") !=
            std::string::npos;
        r["status"] = floor ? "infeasible" : "error";
        r["detail"] = what;
        codes[idx] = floor ? kExitInfeasible : kExitInconclusive;
      }
      results[idx] = std::move(r);
    }
  };

  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  json doc{{"kind", "sweep"},
           {"command", command},
           {"model", c.model()},
           {"jobs", jobs},
           {"entries", results}};
  const fs::path sweep_out = c.out / "sweep.json";
  write_file(sweep_out, doc.dump(2) + "\n");
  rep.output("sweep", sweep_out);

  int exit_code = kExitFeasible;
  bool any_inconclusive = false, any_infeasible = false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    rep.result(entries[i].label, results[i]["status"].get<std::string>() +
                                     (results[i].contains("alpha_star")
                                          ? " alpha_star=" +
                                                fmt(results[i]["alpha_star"]
                                                        .get<double>())
                                          : ""));
    if (codes[i] == kExitInfeasible) any_infeasible = true;
    if (codes[i] == kExitInconclusive) any_inconclusive = true;
  }
  if (any_infeasible)
    exit_code = kExitInfeasible;
  else if (any_inconclusive)
    exit_code = kExitInconclusive;
  finish(c, rep, c.out / "report.txt");
  return exit_code;
}

// --- simulate -----------------------------------------------------------------

struct SimFlags {
  std::uint64_t seed = 0;
  double horizon = 0.0;
  double tau_a = std::numeric_limits<double>::infinity();
  std::size_t n0 = 1;
  std::string waveform = "random_walk";
  double step = 1e-3;
  std::string x0;
  bool no_csv = false;
};

ncs::Waveform waveform_of(const std::string& name) {
  if (name == "constant") return ncs::Waveform::constant;
  if (name == "sinusoid") return ncs::Waveform::sinusoid;
  if (name == "random_walk") return ncs::Waveform::random_walk;
  throw std::invalid_argument(
      "waveform must be one of constant, sinusoid, random_walk");
}

std::vector<double> parse_x0(const std::string& text, std::size_t n) {
  if (text.empty()) return std::vector<double>(n, 1.0);
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string field = text.substr(
        start, comma == std::string::npos ? std::string::npos : comma - start);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size())
      throw std::invalid_argument("--x0: bad number '" + field + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.size() != n)
    throw std::invalid_argument("--x0: expected " + std::to_string(n) +
                                " entries, got " + std::to_string(out.size()));
  return out;
}

int run_simulate(Common& c, const SimFlags& f) {
  c.load();
  Report rep("simulate", c.model(), c.config_path, c.cfg_bytes,
             std::to_string(f.seed));
  rep.param("horizon", fmt(f.horizon));
  rep.param("step", fmt(f.step));
  rep.param("waveform", f.waveform);

  ncs::SwitchedDelaySystem sys =
      ncs::closed_loop(c.cfg.plant, c.gains(), c.cfg.grid);
  const std::vector<double> x0 = parse_x0(f.x0, sys.n());

  ncs::DelayTrace trace;
  json summary{{"kind", "simulation"},
               {"model", c.model()},
               {"seed", f.seed},
               {"horizon", f.horizon},
               {"step", f.step},
               {"waveform", f.waveform},
               {"x0", x0}};
  if (c.mjls) {
    trace = ncs::gen_markov_trace(c.cfg.grid, c.pi(), f.horizon, f.seed,
                                  waveform_of(f.waveform));
    const std::vector<double> pi_inf = ncs::invariant_distribution(c.pi());
    summary["pi_inf"] = pi_inf;
  } else {
    rep.param("tau_a", fmt(f.tau_a));
    rep.param("n0", std::to_string(f.n0));
    trace = ncs::gen_adt_trace(c.cfg.grid, f.tau_a, f.n0, f.horizon, f.seed,
                               waveform_of(f.waveform));
    if (std::isfinite(f.tau_a)) {
      const ncs::AdtReport adt = ncs::verify_adt(trace, f.tau_a, f.n0);
      summary["adt"] = json{{"tau_a", f.tau_a},
                            {"n0", f.n0},
                            {"pass", adt.pass},
                            {"worst_excess", adt.worst_excess}};
    }
  }

  // Occupancy: fraction of the horizon spent in each mode.
  {
    std::vector<double> occ(c.cfg.grid.modes(), 0.0);
    for (std::size_t i = 0; i < trace.events.size(); ++i) {
      const double t0 = trace.events[i].t;
      const double t1 =
          i + 1 < trace.events.size() ? trace.events[i + 1].t : trace.horizon;
      occ[trace.events[i].mode] += t1 - t0;
    }
    for (double& v : occ) v /= trace.horizon;
    summary["occupancy"] = occ;
    summary["switches"] = trace.switches();
  }

  const ncs::Trajectory traj = ncs::simulate(
      sys, trace, ncs::constant_history(x0), f.step, f.horizon);
  summary["samples"] = traj.samples.size();
  summary["diverged"] = traj.diverged;
  rep.result("diverged", traj.diverged ? "yes" : "no");
  rep.result("samples", std::to_string(traj.samples.size()));
  try {
    const double alpha_hat = ncs::estimate_decay(traj);
    summary["alpha_hat"] = alpha_hat;
    rep.result("alpha_hat", fmt(alpha_hat));
  } catch (const std::exception& ex) {
    summary["alpha_hat_error"] = ex.what();
    rep.result("alpha_hat", std::string("unavailable (") + ex.what() + ")");
  }
  {
    std::string occ_line;
    for (double v : summary["occupancy"].get<std::vector<double>>())
      occ_line += (occ_line.empty() ? "" : ", ") + fmt(v);
    rep.result("occupancy", occ_line);
  }

  if (!f.no_csv) {
    std::ofstream csv(c.out / "trajectory.csv", std::ios::binary);
    if (!csv)
      throw std::invalid_argument("cannot write file: " +
                                  (c.out / "trajectory.csv").string());
    ncs::write_trajectory_csv(csv, traj);
    summary["trajectory_csv"] = "trajectory.csv";
    rep.output("trajectory", c.out / "trajectory.csv");
  } else {
    summary["trajectory_csv"] = nullptr;
  }
  const fs::path sum_path = c.out / "summary.json";
  write_file(sum_path, summary.dump(2) + "\n");
  rep.output("summary", sum_path);
  finish(c, rep, c.out / "report.txt");
  return kExitFeasible;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Certification and gain design for linear plants over networks with "
      "mode-switched time-varying delays"};
  app.require_subcommand(1);

  Common common;
  double alpha = 0.0;
  double mu = 0.0;
  BisectFlags bf;
  SimFlags sf;
  std::string sweep_path;
  unsigned jobs = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", common.config_path, "system config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out-dir", common.out_dir,
                    "directory for output files (default: .)");
    sub->add_flag("--mjls", common.mjls,
                  "use the Markov-modulated delay model");
  };

  CLI::App* analyze = app.add_subcommand(
      "analyze", "certify a decay rate for the config's gains");
  add_common(analyze);
  analyze->add_option("--alpha", alpha, "decay rate to certify")->required();
  CLI::Option* an_mu =
      analyze->add_option("--mu", mu, "jump factor (deterministic model)");

  CLI::App* synthesize = app.add_subcommand(
      "synthesize", "design mode-dependent gains at a decay rate");
  add_common(synthesize);
  CLI::Option* sy_alpha =
      synthesize->add_option("--alpha", alpha, "decay rate to design for");
  CLI::Option* sy_mu =
      synthesize->add_option("--mu", mu, "jump factor (deterministic model)");
  CLI::Option* sy_sweep = synthesize->add_option(
      "--sweep", sweep_path, "batch file of grid/rate variants");
  synthesize->add_option("--jobs", jobs, "parallel workers for --sweep")
      ->needs(sy_sweep);

  CLI::App* bisect = app.add_subcommand(
      "bisect", "maximize the certifiable decay rate by bisection");
  add_common(bisect);
  bisect->add_option("--alpha-lo", bf.alpha_lo, "feasible floor (default 1e-3)");
  bisect->add_option("--alpha-hi", bf.alpha_hi, "upper bracket (default 8)");
  bisect->add_option("--tol", bf.tol, "bracket width tolerance (default 1e-3)");
  bisect->add_flag("--design", bf.design,
                   "search the synthesis program instead of fixed gains");
  CLI::Option* bi_mu =
      bisect->add_option("--mu", mu, "jump factor (deterministic model)");
  CLI::Option* bi_sweep = bisect->add_option("--sweep", sweep_path,
                                             "batch file of grid variants");
  bisect->add_option("--jobs", jobs, "parallel workers for --sweep")
      ->needs(bi_sweep);

  CLI::App* simulate = app.add_subcommand(
      "simulate", "integrate the closed loop against a delay trace");
  add_common(simulate);
  simulate->add_option("--seed", sf.seed, "trace seed (default 0)");
  simulate->add_option("--horizon", sf.horizon, "simulation length, seconds")
      ->required();
  simulate->add_option("--tau-a", sf.tau_a,
                       "average dwell time (deterministic traces)");
  simulate->add_option("--n0", sf.n0, "chatter bound (default 1)");
  simulate->add_option("--waveform", sf.waveform,
                       "constant | sinusoid | random_walk");
  simulate->add_option("--step", sf.step, "integrator step (default 1e-3)");
  simulate->add_option("--x0", sf.x0,
                       "comma-separated initial state (default all ones)");
  simulate->add_flag("--no-csv", sf.no_csv, "skip the trajectory CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // --help and friends exit 0; every parse failure is a usage error.
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (analyze->parsed()) {
      if (!common.mjls && an_mu->count() == 0)
        throw std::invalid_argument("analyze: the deterministic model needs --mu");
      if (common.mjls && an_mu->count() > 0)
        throw std::invalid_argument("analyze: --mu does not apply with --mjls");
      return run_analyze(common, alpha, mu);
    }
    if (synthesize->parsed()) {
      if (!common.mjls && sy_mu->count() == 0)
        throw std::invalid_argument(
            "synthesize: the deterministic model needs --mu");
      if (common.mjls && sy_mu->count() > 0)
        throw std::invalid_argument(
            "synthesize: --mu does not apply with --mjls");
      if (sy_sweep->count() > 0)
        return run_sweep(common, "synthesize", mu, bf, alpha, sweep_path, jobs);
      if (sy_alpha->count() == 0)
        throw std::invalid_argument("synthesize: --alpha is required");
      return run_synthesize(common, alpha, mu);
    }
    if (bisect->parsed()) {
      if (!common.mjls && bi_mu->count() == 0)
        throw std::invalid_argument("bisect: the deterministic model needs --mu");
      if (common.mjls && bi_mu->count() > 0)
        throw std::invalid_argument("bisect: --mu does not apply with --mjls");
      if (bi_sweep->count() > 0)
        return run_sweep(common, "bisect", mu, bf, alpha, sweep_path, jobs);
      return run_bisect(common, mu, bf);
    }
    if (simulate->parsed()) return run_simulate(common, sf);
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    std::cerr << "error: " << what << '\n';
    return what.find("no certified decay rate above floor") != std::string::npos
               ? kExitInfeasible
               : kExitInconclusive;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}
