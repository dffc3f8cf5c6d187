// nrc: command-line interface to the nonreciprocal-lattice toolkit.
//
// Subcommands: spectrum, pbc-stability, simulate, order-params, cep-scan,
// static-line, lyapunov, embed, sweep, resume, boundary.
//
// Every run writes its outputs plus run.json (resolved configuration and
// per-file checksums) into the --out directory. Exit codes: 0 success,
// 1 validation error, 2 numerical failure, 3 I/O error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "nrc/chaos.hpp"
#include "nrc/dynamics.hpp"
#include "nrc/hash.hpp"
#include "nrc/model.hpp"
#include "nrc/obc_analysis.hpp"
#include "nrc/pbc_stability.hpp"
#include "nrc/spectral.hpp"
#include "nrc/sweep.hpp"
#include "nrc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nrc;

namespace {

std::string version_string() {
  return std::string(kVersion) + "+" + kGitRevision;
}

// Angle literals: decimals plus exact "pi" forms ("pi", "-pi/2", "2pi/3",
// "3pi/4", "2pi"). Whitespace-free.
double parse_angle(std::string s) {
  if (s.empty()) throw ContractViolation("empty angle");
  double sign = 1.0;
  std::size_t pos = 0;
  if (s[0] == '+' || s[0] == '-') {
    sign = s[0] == '-' ? -1.0 : 1.0;
    pos = 1;
  }
  const std::size_t pi_at = s.find("pi", pos);
  if (pi_at == std::string::npos) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw ContractViolation("cannot parse angle: " + s);
    }
    if (used != s.size())
      throw ContractViolation("cannot parse angle: " + s);
    return v;
  }
  double num = 1.0;
  if (pi_at > pos) {
    try {
      std::size_t used = 0;
      num = std::stod(s.substr(pos, pi_at - pos), &used);
      if (used != pi_at - pos)
        throw ContractViolation("cannot parse angle: " + s);
    } catch (const std::exception&) {
      throw ContractViolation("cannot parse angle: " + s);
    }
  }
  double den = 1.0;
  std::size_t rest = pi_at + 2;
  if (rest < s.size()) {
    if (s[rest] != '/')
      throw ContractViolation("cannot parse angle: " + s);
    try {
      std::size_t used = 0;
      den = std::stod(s.substr(rest + 1), &used);
      if (used != s.size() - rest - 1 || den == 0.0)
        throw ContractViolation("cannot parse angle: " + s);
    } catch (const ContractViolation&) {
      throw;
    } catch (const std::exception&) {
      throw ContractViolation("cannot parse angle: " + s);
    }
  }
  return sign * num * kPi / den;
}

// ---------------------------------------------------------------------
// Option bundles
// ---------------------------------------------------------------------

struct ModelOpts {
  double J = 1.0, gamma = 0.2, kappa = 1.0, Gamma = 1.0;
  std::string theta = "pi";
  int N = 100;
  std::string boundary = "open";

  void attach(CLI::App* cmd) {
    cmd->add_option("--J", J, "hopping rate (sets the unit scale)")
        ->capture_default_str();
    cmd->add_option("--gamma", gamma, "correlated single-particle loss rate")
        ->capture_default_str();
    cmd->add_option("--kappa", kappa, "single-particle pump rate")
        ->capture_default_str();
    cmd->add_option("--Gamma", Gamma, "two-particle loss rate")
        ->capture_default_str();
    cmd->add_option("--theta", theta,
                    "dissipative phase angle (radians or 'pi', 'pi/2', ...)")
        ->capture_default_str();
    cmd->add_option("--N", N, "site count")->capture_default_str();
    cmd->add_option("--boundary", boundary, "open | periodic")
        ->check(CLI::IsMember({"open", "periodic"}))
        ->capture_default_str();
  }

  ModelParams build() const {
    return ModelParams(J, gamma, kappa, Gamma, parse_angle(theta), N,
                       boundary == "open" ? Boundary::Open
                                          : Boundary::Periodic);
  }
};

struct IntegrationOpts {
  double dt = 5e-3, t_transient = 2e3, t_measure = 1e3;
  int stride = 4;
  std::string scheme = "rk4";
  double abs_tol = 1e-10, rel_tol = 1e-8;
  std::uint64_t seed = 1;
  double scale = 0.1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--dt", dt, "integrator step (1/J)")
        ->capture_default_str();
    cmd->add_option("--t-transient", t_transient, "discard horizon")
        ->capture_default_str();
    cmd->add_option("--t-measure", t_measure, "measurement horizon")
        ->capture_default_str();
    cmd->add_option("--stride", stride, "snapshot every this many steps")
        ->capture_default_str();
    cmd->add_option("--scheme", scheme, "rk4 | rk45")
        ->check(CLI::IsMember({"rk4", "rk45"}))
        ->capture_default_str();
    cmd->add_option("--abs-tol", abs_tol, "rk45 absolute tolerance")
        ->capture_default_str();
    cmd->add_option("--rel-tol", rel_tol, "rk45 relative tolerance")
        ->capture_default_str();
    cmd->add_option("--seed", seed, "initial-condition seed")
        ->capture_default_str();
    cmd->add_option("--scale", scale, "random initial amplitude scale")
        ->capture_default_str();
  }

  IntegrationConfig build() const {
    IntegrationConfig c;
    c.dt = dt;
    c.t_transient = t_transient;
    c.t_measure = t_measure;
    c.sample_stride = stride;
    c.scheme = scheme == "rk4" ? Scheme::RK4 : Scheme::RK45Adaptive;
    c.abs_tol = abs_tol;
    c.rel_tol = rel_tol;
    c.seed = seed;
    return c;
  }
};

// ---------------------------------------------------------------------
// Run directory and manifest
// ---------------------------------------------------------------------

class RunDir {
public:
  RunDir(std::string path, std::string command, std::string resolved_config)
      : dir_(std::move(path)), command_(std::move(command)),
        config_(std::move(resolved_config)) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  void write_text(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("cannot open " + p.string());
    out << content;
    out.flush();
    if (!out) throw IntegrityError("write failed: " + p.string());
    checksums_[name] = fnv1a64_hex(content);
  }

  void note_file(const std::string& name) {
    std::ifstream in(dir_ / name, std::ios::binary);
    if (!in) throw IntegrityError("cannot reopen " + (dir_ / name).string());
    std::ostringstream buf;
    buf << in.rdbuf();
    checksums_[name] = fnv1a64_hex(buf.str());
  }

  // Resolved config echo + checksums; written last so it covers every
  // output of the run.
  void finalize() {
    json manifest{{"command", command_},
                  {"code_version", version_string()},
                  {"config", config_},
                  {"outputs", checksums_}};
    write_text("run.json", manifest.dump(2) + "\n");
  }

private:
  fs::path dir_;
  std::string command_;
  std::string config_;
  std::map<std::string, std::string> checksums_;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------
// Subcommand implementations
// ---------------------------------------------------------------------

int cmd_spectrum(const ModelOpts& mo, const std::string& out,
                 const std::string& config) {
  const ModelParams p = mo.build();
  RunDir run(out, "spectrum", config);
  std::ostringstream csv;
  csv << "re,im,m\n";
  if (p.boundary() == Boundary::Open) {
    const ObcSpectrum s = obc_spectrum_analytic(p);
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i)
      csv << fmt(s.eigenvalues[i].real()) << ","
          << fmt(s.eigenvalues[i].imag()) << "," << s.mode_index[i] << "\n";
  } else {
    for (int m = 0; m < p.n_sites(); ++m) {
      const DispersionPoint d = pbc_dispersion(p, m);
      csv << fmt(d.omega_q) << "," << fmt(p.kappa() - d.gamma_q) << "," << m
          << "\n";
    }
  }
  run.write_text("spectrum.csv", csv.str());
  run.finalize();
  return 0;
}

int cmd_pbc_stability(const ModelOpts& mo, double kappa_min, double kappa_max,
                      int kappa_steps, bool log_grid, const std::string& out,
                      const std::string& config) {
  ModelOpts pbc = mo;
  pbc.boundary = "periodic";
  const ModelParams base = pbc.build();
  std::vector<double> kappas;
  for (int i = 0; i < kappa_steps; ++i) {
    const double f = kappa_steps > 1
                         ? static_cast<double>(i) / (kappa_steps - 1)
                         : 0.0;
    kappas.push_back(log_grid ? kappa_min * std::pow(kappa_max / kappa_min, f)
                              : kappa_min + (kappa_max - kappa_min) * f);
  }
  std::vector<int> ms(base.n_sites());
  std::iota(ms.begin(), ms.end(), 0);
  const auto table = stability_diagram(base, kappas, ms);

  RunDir run(out, "pbc-stability", config);
  std::ostringstream csv;
  csv << "kappa,q,exists,stable,max_growth,omega_q,gamma_q,r_q\n";
  for (const WaveStability& w : table)
    csv << fmt(w.kappa) << "," << fmt(w.q) << "," << (w.exists ? 1 : 0) << ","
        << (w.stable ? 1 : 0) << "," << fmt(w.exists ? w.max_growth : 0.0)
        << "," << fmt(w.omega_q) << "," << fmt(w.gamma_q) << ","
        << fmt(w.r_q) << "\n";
  run.write_text("pbc_stability.csv", csv.str());
  run.finalize();
  return 0;
}

void write_trajectory_binary(const fs::path& p, const ModelParams& params,
                             const Trajectory& traj) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("cannot open " + p.string());
  auto put_u32 = [&](std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
  };
  auto put_u64 = [&](std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  auto put_f64 = [&](double v) {
    out.write(reinterpret_cast<const char*>(&v), 8);
  };
  out.write("NRC1", 4);
  put_u32(1); // header version
  put_u32(params.boundary() == Boundary::Periodic ? 0u : 1u);
  put_u32(0); // reserved
  put_u64(static_cast<std::uint64_t>(params.n_sites()));
  put_u64(traj.states.size());
  put_f64(traj.times.size() > 1 ? traj.times[1] - traj.times[0] : 0.0);
  put_f64(traj.times.empty() ? 0.0 : traj.times.front());
  put_f64(params.J());
  put_f64(params.gamma());
  put_f64(params.kappa());
  put_f64(params.Gamma());
  put_f64(params.theta());
  for (std::size_t s = 0; s < traj.states.size(); ++s) {
    put_f64(traj.times[s]);
    for (const complexd& a : traj.states[s]) {
      put_f64(a.real());
      put_f64(a.imag());
    }
  }
  out.flush();
  if (!out) throw IntegrityError("write failed: " + p.string());
}

LatticeState make_initial(const ModelParams& p, const std::string& kind,
                          std::uint64_t seed, double scale, double q) {
  if (kind == "random") return random_initial(p, seed, scale);
  if (kind == "vacuum") return LatticeState(p.n_sites());
  if (kind == "wave") return traveling_wave_state(p, q);
  if (kind == "static") return static_condensate(p);
  throw ContractViolation("unknown initial kind: " + kind);
}

int cmd_simulate(const ModelOpts& mo, const IntegrationOpts& io,
                 const std::string& initial, double wave_q, bool csv,
                 const std::string& out, const std::string& config) {
  const ModelParams p = mo.build();
  const Trajectory traj =
      integrate(p, make_initial(p, initial, io.seed, io.scale, wave_q),
                io.build());
  RunDir run(out, "simulate", config);
  write_trajectory_binary(run.dir() / "trajectory.nrc", p, traj);
  run.note_file("trajectory.nrc");
  if (csv) {
    std::ostringstream s;
    s << "t";
    for (int i = 0; i < p.n_sites(); ++i) s << ",re" << i + 1 << ",im" << i + 1;
    s << "\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
      s << fmt(traj.times[k]);
      for (const complexd& a : traj.states[k])
        s << "," << fmt(a.real()) << "," << fmt(a.imag());
      s << "\n";
    }
    run.write_text("trajectory.csv", s.str());
  }
  run.finalize();
  return 0;
}

int cmd_order_params(const ModelOpts& mo, const IntegrationOpts& io,
                     const std::string& initial, double wave_q,
                     const std::string& out, const std::string& config) {
  const ModelParams p = mo.build();
  const AttractorRecord rec = find_attractor(
      p, make_initial(p, initial, io.seed, io.scale, wave_q), io.build());
  if (rec.kind == AttractorKind::Diverged)
    throw DivergenceError("trajectory diverged: " + rec.diagnostics, 0);
  const OrderParameters op = order_parameters(rec.window, p.n_sites());

  RunDir run(out, "order-params", config);
  std::ostringstream csv;
  csv << "kind,mean_amplitude,mean_frequency,mean_frequency_all,"
         "mean_wavevector,mean_density_rate,horizon_extended\n";
  csv << (rec.kind == AttractorKind::FixedPoint ? "fixed_point"
                                                : "time_dependent")
      << "," << fmt(op.mean_amplitude) << "," << fmt(op.mean_frequency) << ","
      << fmt(op.mean_frequency_all) << "," << fmt(op.mean_wavevector) << ","
      << fmt(op.mean_density_rate) << "," << (rec.horizon_extended ? 1 : 0)
      << "\n";
  run.write_text("order_params.csv", csv.str());

  std::ostringstream prof;
  prof << "site,density_rate\n";
  for (std::size_t i = 0; i < op.edge_density_rate_profile.size(); ++i)
    prof << i + 1 << "," << fmt(op.edge_density_rate_profile[i]) << "\n";
  run.write_text("density_rate_profile.csv", prof.str());
  run.finalize();
  return 0;
}

int cmd_cep_scan(const ModelOpts& mo, std::vector<double> kappas,
                 const std::string& out, const std::string& config) {
  const ModelParams p = mo.build();
  if (kappas.empty())
    throw ContractViolation("cep-scan: provide --kappas");
  const auto rows = cep_scan(p, kappas);
  RunDir run(out, "cep-scan", config);
  std::ostringstream csv;
  csv << "kappa,lambda2,theta12,valid\n";
  for (const CepScanRow& r : rows)
    csv << fmt(r.kappa) << "," << fmt(r.lambda2) << "," << fmt(r.theta12)
        << "," << (r.valid ? 1 : 0) << "\n";
  run.write_text("cep_scan.csv", csv.str());
  run.finalize();
  return 0;
}

int cmd_static_line(const ModelOpts& mo, std::vector<double> gammas,
                    double kappa_lo, double kappa_hi, bool kink_fit,
                    std::vector<double> kink_kappas, const std::string& out,
                    const std::string& config) {
  const ModelParams base = mo.build();
  RunDir run(out, "static-line", config);
  if (!gammas.empty()) {
    const auto rows =
        static_stability_boundary(base, gammas, kappa_lo, kappa_hi);
    std::ostringstream csv;
    csv << "gamma,kappa,found\n";
    for (const StaticBoundaryRow& r : rows)
      csv << fmt(r.gamma) << "," << fmt(r.kappa) << "," << (r.found ? 1 : 0)
          << "\n";
    run.write_text("static_line.csv", csv.str());
  }
  if (kink_fit) {
    if (kink_kappas.empty())
      throw ContractViolation("static-line --kink-fit: provide --kink-kappas");
    const KinkFitReport rep = fit_kink_scaling(base, kink_kappas);
    json j{{"kappa_crit", rep.kappa_crit},
           {"exponent", rep.exponent},
           {"fit_range", {rep.fit_lo, rep.fit_hi}},
           {"residual", rep.residual}};
    run.write_text("kink_fit.json", j.dump(2) + "\n");
    std::ostringstream csv;
    csv << "kappa,position,height\n";
    for (std::size_t i = 0; i < rep.kappas.size(); ++i)
      csv << fmt(rep.kappas[i]) << "," << fmt(rep.positions[i]) << ","
          << fmt(rep.heights[i]) << "\n";
    run.write_text("kink_positions.csv", csv.str());
  }
  run.finalize();
  return 0;
}

int cmd_lyapunov(const ModelOpts& mo, const IntegrationOpts& io,
                 const std::string& initial, double wave_q, int k,
                 double t_total, double renorm, double zero_tol,
                 const std::string& out, const std::string& config) {
  const ModelParams p = mo.build();
  const AttractorRecord rec = find_attractor(
      p, make_initial(p, initial, io.seed, io.scale, wave_q), io.build());
  LyapunovConfig lcfg;
  lcfg.dt = io.dt;
  lcfg.t_total = t_total;
  lcfg.renorm_interval = renorm;
  lcfg.seed = io.seed;
  LyapunovResult lces;
  DynamicsClass cls;
  if (rec.kind == AttractorKind::FixedPoint) {
    cls = classify_dynamics(lces, rec, zero_tol);
  } else if (rec.kind == AttractorKind::Diverged) {
    throw DivergenceError("trajectory diverged: " + rec.diagnostics, 0);
  } else {
    lces = lyapunov_spectrum(p, rec.window.terminal_state, k, lcfg);
    cls = classify_dynamics(lces, rec, zero_tol);
  }

  RunDir run(out, "lyapunov", config);
  json j{{"exponents", lces.exponents},
         {"drift", lces.drift},
         {"zero_count", cls.zero_count},
         {"positive_count", cls.positive_count},
         {"class", to_string(cls.kind)},
         {"conclusive", cls.conclusive},
         {"t_total", lces.t_total},
         {"renorm_interval", lces.renorm_interval},
         {"zero_tol", zero_tol}};
  if (!cls.diagnostics.empty()) j["diagnostics"] = cls.diagnostics;
  run.write_text("lyapunov.json", j.dump(2) + "\n");

  if (!lces.history.empty()) {
    std::ostringstream csv;
    csv << "epoch";
    for (std::size_t e = 0; e < lces.history.size(); ++e) csv << ",lce" << e;
    csv << "\n";
    for (std::size_t t = 0; t < lces.history.front().size(); ++t) {
      csv << t + 1;
      for (const auto& h : lces.history) csv << "," << fmt(h[t]);
      csv << "\n";
    }
    run.write_text("lyapunov_history.csv", csv.str());
  }
  run.finalize();
  return 0;
}

int cmd_embed(const ModelOpts& mo, const IntegrationOpts& io,
              const std::string& initial, double wave_q, int site,
              double delay, const std::string& observable,
              const std::string& out, const std::string& config) {
  const ModelParams p = mo.build();
  if (site < 1 || site > p.n_sites())
    throw ContractViolation("embed: --site is 1-based and must be <= N");
  const Trajectory traj = integrate(
      p, make_initial(p, initial, io.seed, io.scale, wave_q), io.build());
  std::vector<double> series;
  series.reserve(traj.states.size());
  for (const auto& snap : traj.states) {
    const complexd a = snap[site - 1];
    if (observable == "phase")
      series.push_back(std::arg(a));
    else if (observable == "re")
      series.push_back(a.real());
    else if (observable == "im")
      series.push_back(a.imag());
    else
      series.push_back(std::norm(a));
  }
  const auto pairs = delay_embed(series, delay, traj.sample_dt());
  RunDir run(out, "embed", config);
  std::ostringstream csv;
  csv << "x,x_delayed\n";
  for (const auto& [x, y] : pairs) csv << fmt(x) << "," << fmt(y) << "\n";
  run.write_text("embed.csv", csv.str());
  run.finalize();
  return 0;
}

struct SweepOpts {
  double kappa_min = 0.0, kappa_max = 3.0, kappa_step = 0.05;
  double gamma_min = 0.0, gamma_max = 1.0, gamma_step = 0.05;
  int ics = 8;
  std::vector<double> scales{0.1};
  bool lces = false, period = true;
  std::uint64_t base_seed = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--kappa-min", kappa_min)->capture_default_str();
    cmd->add_option("--kappa-max", kappa_max)->capture_default_str();
    cmd->add_option("--kappa-step", kappa_step)->capture_default_str();
    cmd->add_option("--gamma-min", gamma_min)->capture_default_str();
    cmd->add_option("--gamma-max", gamma_max)->capture_default_str();
    cmd->add_option("--gamma-step", gamma_step)->capture_default_str();
    cmd->add_option("--ics", ics, "initial conditions per cell")
        ->capture_default_str();
    cmd->add_option("--scales", scales, "initial amplitude scales (cycled)")
        ->capture_default_str();
    cmd->add_flag("--lces,!--no-lces", lces, "compute Lyapunov exponents")
        ->capture_default_str();
    cmd->add_flag("--period,!--no-period", period, "detect periods")
        ->capture_default_str();
    cmd->add_option("--base-seed", base_seed)->capture_default_str();
  }

  static std::vector<double> grid(double lo, double hi, double step) {
    std::vector<double> g;
    for (int i = 0;; ++i) {
      const double v = lo + step * i;
      if (v > hi + 0.5 * step) break;
      g.push_back(v);
    }
    return g;
  }

  SweepSpec build(const ModelOpts& mo, const IntegrationOpts& io, int threads,
                  const std::string& out) const {
    SweepSpec spec;
    spec.params_base = mo.build();
    spec.kappa_grid = grid(kappa_min, kappa_max, kappa_step);
    spec.gamma_grid = grid(gamma_min, gamma_max, gamma_step);
    spec.n_initial_conditions = ics;
    spec.ic_scales = scales;
    spec.base_seed = base_seed;
    spec.integration = io.build();
    spec.compute_lces = lces;
    spec.compute_period = period;
    spec.output_path = out;
    spec.threads = threads;
    return spec;
  }
};

int cmd_sweep(const SweepSpec& spec, const std::string& config) {
  RunDir run(spec.output_path, "sweep", config);
  run_sweep(spec, [](int done, int total) {
    if (done % 16 == 0 || done == total)
      std::cerr << "sweep: " << done << "/" << total << " cells\n";
    return true;
  });
  run.note_file("cells.ndjson");
  run.note_file("manifest.json");
  run.finalize();
  return 0;
}

int cmd_resume(const std::string& dir, const std::string& expect_hash,
               const std::string& config) {
  RunDir run(dir, "resume", config);
  resume_sweep(dir, expect_hash, [](int done, int total) {
    if (done % 16 == 0 || done == total)
      std::cerr << "resume: " << done << "/" << total << " cells\n";
    return true;
  });
  run.note_file("cells.ndjson");
  run.note_file("manifest.json");
  run.finalize();
  return 0;
}

AttractorLabel parse_label(const std::string& s) {
  if (s == "vacuum") return AttractorLabel::Vacuum;
  if (s == "static") return AttractorLabel::StaticCondensate;
  if (s == "dynamic_cw") return AttractorLabel::DynamicCW;
  if (s == "dynamic_ccw") return AttractorLabel::DynamicCCW;
  if (s == "dynamic_mixed") return AttractorLabel::DynamicMixed;
  throw ContractViolation("unknown label: " + s +
                          " (vacuum|static|dynamic_cw|dynamic_ccw|"
                          "dynamic_mixed)");
}

int cmd_boundary(const std::string& dir, const std::string& label_a,
                 const std::string& label_b, const std::string& out,
                 const std::string& config) {
  const PhaseDiagram diag = load_sweep(dir);
  const auto lines =
      extract_boundary(diag, parse_label(label_a), parse_label(label_b));
  RunDir run(out, "boundary", config);
  std::ostringstream csv;
  csv << "polyline,gamma,kappa\n";
  for (std::size_t l = 0; l < lines.size(); ++l)
    for (const auto& [g, k] : lines[l])
      csv << l << "," << fmt(g) << "," << fmt(k) << "\n";
  run.write_text("boundary.csv", csv.str());
  run.finalize();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"nonreciprocal driven-dissipative lattice toolkit"};
  app.set_version_flag("--version", version_string());
  app.set_config("--config", "", "TOML config file (flags override it)");
  app.require_subcommand(0, 1);
  app.fallthrough(false);

  int threads = 0;
  app.add_option("--threads", threads,
                 "worker threads (0 = hardware concurrency)")
      ->capture_default_str();

  struct Sub {
    CLI::App* cmd = nullptr;
    ModelOpts model;
    IntegrationOpts integ;
    std::string out;
    std::string initial = "random";
    double wave_q = kPi / 2.0;
  };
  std::map<std::string, Sub> subs;
  auto add_sub = [&](const std::string& name, const std::string& desc,
                     bool with_model, bool with_integ) -> Sub& {
    Sub& s = subs[name];
    s.cmd = app.add_subcommand(name, desc);
    s.out = "nrc-out/" + name;
    if (with_model) s.model.attach(s.cmd);
    if (with_integ) s.integ.attach(s.cmd);
    s.cmd->add_option("--out", s.out, "output directory")
        ->capture_default_str();
    return s;
  };
  auto add_initial = [&](Sub& s) {
    s.cmd->add_option("--initial", s.initial,
                      "random | vacuum | wave | static")
        ->check(CLI::IsMember({"random", "vacuum", "wave", "static"}))
        ->capture_default_str();
    s.cmd->add_option("--wave-q", s.wave_q, "momentum for --initial wave")
        ->capture_default_str();
  };

  Sub& sc_spectrum = add_sub("spectrum", "eigenvalues of the linear problem",
                             true, false);

  Sub& sc_pbc = add_sub("pbc-stability",
                        "traveling-wave stability diagram (PBC)", true, false);
  double pbc_kmin = 0.05, pbc_kmax = 8.0;
  int pbc_ksteps = 40;
  bool pbc_log = true;
  sc_pbc.cmd->add_option("--kappa-min", pbc_kmin)->capture_default_str();
  sc_pbc.cmd->add_option("--kappa-max", pbc_kmax)->capture_default_str();
  sc_pbc.cmd->add_option("--kappa-steps", pbc_ksteps)->capture_default_str();
  sc_pbc.cmd->add_flag("--log-grid,!--linear-grid", pbc_log)
      ->capture_default_str();

  Sub& sc_sim = add_sub("simulate", "integrate the equation of motion", true,
                        true);
  add_initial(sc_sim);
  bool sim_csv = false;
  sc_sim.cmd->add_flag("--csv", sim_csv, "also export CSV snapshots");

  Sub& sc_op = add_sub("order-params",
                       "attractor order parameters from a long run", true,
                       true);
  add_initial(sc_op);

  Sub& sc_cep = add_sub("cep-scan",
                        "Jacobian spectrum scan towards the static boundary",
                        true, false);
  std::vector<double> cep_kappas;
  sc_cep.cmd->add_option("--kappas", cep_kappas,
                         "kappa values (approached from the static side)");

  Sub& sc_line = add_sub("static-line",
                         "static-condensate stability boundary / kink fits",
                         true, false);
  std::vector<double> line_gammas, kink_kappas;
  double line_klo = 1.5, line_khi = 3.0;
  bool do_kink = false;
  sc_line.cmd->add_option("--gammas", line_gammas, "gamma grid");
  sc_line.cmd->add_option("--kappa-lo", line_klo)->capture_default_str();
  sc_line.cmd->add_option("--kappa-hi", line_khi)->capture_default_str();
  sc_line.cmd->add_flag("--kink-fit", do_kink, "fit the kink-position scaling");
  sc_line.cmd->add_option("--kink-kappas", kink_kappas,
                          "kappa values for the kink fit");

  Sub& sc_lyap = add_sub("lyapunov", "Lyapunov spectrum and classification",
                         true, true);
  add_initial(sc_lyap);
  int lyap_k = 4;
  double lyap_t = 2e4, lyap_renorm = 1.0, lyap_zero_tol = 1e-3;
  sc_lyap.cmd->add_option("--k", lyap_k, "number of exponents")
      ->capture_default_str();
  sc_lyap.cmd->add_option("--t-total", lyap_t)->capture_default_str();
  sc_lyap.cmd->add_option("--renorm", lyap_renorm)->capture_default_str();
  sc_lyap.cmd->add_option("--zero-tol", lyap_zero_tol)->capture_default_str();

  Sub& sc_embed = add_sub("embed", "time-delay embedding of a site series",
                          true, true);
  add_initial(sc_embed);
  int embed_site = 50;
  double embed_delay = 14.0;
  std::string embed_obs = "phase";
  sc_embed.cmd->add_option("--site", embed_site, "1-based site index")
      ->capture_default_str();
  sc_embed.cmd->add_option("--delay", embed_delay)->capture_default_str();
  sc_embed.cmd->add_option("--observable", embed_obs,
                           "phase | re | im | abs2")
      ->check(CLI::IsMember({"phase", "re", "im", "abs2"}))
      ->capture_default_str();

  Sub& sc_sweep = add_sub("sweep", "(kappa, gamma) phase-diagram sweep", true,
                          true);
  SweepOpts sweep_opts;
  sweep_opts.attach(sc_sweep.cmd);

  CLI::App* sc_resume =
      app.add_subcommand("resume", "resume an interrupted sweep");
  std::string resume_dir, resume_expect;
  sc_resume->add_option("--dir", resume_dir, "sweep output directory")
      ->required();
  sc_resume->add_option("--expect-spec-hash", resume_expect,
                        "refuse unless the checkpoint spec hash matches");

  CLI::App* sc_boundary = app.add_subcommand(
      "boundary", "extract a phase boundary from a finished sweep");
  std::string bdir, blabel_a = "vacuum", blabel_b = "static";
  std::string bout = "nrc-out/boundary";
  sc_boundary->add_option("--dir", bdir, "sweep output directory")->required();
  sc_boundary->add_option("--label-a", blabel_a)->capture_default_str();
  sc_boundary->add_option("--label-b", blabel_b)->capture_default_str();
  sc_boundary->add_option("--out", bout)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e); // 0 for help/version, nonzero otherwise
  }

  try {
    const std::string config = app.config_to_str(true, false);
    if (sc_spectrum.cmd->parsed())
      return cmd_spectrum(sc_spectrum.model, sc_spectrum.out, config);
    if (sc_pbc.cmd->parsed())
      return cmd_pbc_stability(sc_pbc.model, pbc_kmin, pbc_kmax, pbc_ksteps,
                               pbc_log, sc_pbc.out, config);
    if (sc_sim.cmd->parsed())
      return cmd_simulate(sc_sim.model, sc_sim.integ, sc_sim.initial,
                          sc_sim.wave_q, sim_csv, sc_sim.out, config);
    if (sc_op.cmd->parsed())
      return cmd_order_params(sc_op.model, sc_op.integ, sc_op.initial,
                              sc_op.wave_q, sc_op.out, config);
    if (sc_cep.cmd->parsed())
      return cmd_cep_scan(sc_cep.model, cep_kappas, sc_cep.out, config);
    if (sc_line.cmd->parsed())
      return cmd_static_line(sc_line.model, line_gammas, line_klo, line_khi,
                             do_kink, kink_kappas, sc_line.out, config);
    if (sc_lyap.cmd->parsed())
      return cmd_lyapunov(sc_lyap.model, sc_lyap.integ, sc_lyap.initial,
                          sc_lyap.wave_q, lyap_k, lyap_t, lyap_renorm,
                          lyap_zero_tol, sc_lyap.out, config);
    if (sc_embed.cmd->parsed())
      return cmd_embed(sc_embed.model, sc_embed.integ, sc_embed.initial,
                       sc_embed.wave_q, embed_site, embed_delay, embed_obs,
                       sc_embed.out, config);
    if (sc_sweep.cmd->parsed())
      return cmd_sweep(sweep_opts.build(sc_sweep.model, sc_sweep.integ,
                                        threads, sc_sweep.out),
                       config);
    if (sc_resume->parsed())
      return cmd_resume(resume_dir, resume_expect, config);
    if (sc_boundary->parsed())
      return cmd_boundary(bdir, blabel_a, blabel_b, bout, config);
    std::cerr << app.help() << std::flush;
    return 1;
  } catch (const ContractViolation& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 1;
  } catch (const DomainError& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return 1;
  } catch (const IntegrityError& e) {
    std::cerr << "error (I/O): " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "error (numerical): " << e.what() << "\n";
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error (I/O): " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
