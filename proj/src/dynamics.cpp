#include "nrc/dynamics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "nrc/rng.hpp"

namespace nrc {

void IntegrationConfig::validate() const {
  std::ostringstream bad;
  if (!(dt > 0.0)) bad << "dt must be > 0; ";
  if (!(t_transient >= 0.0)) bad << "t_transient must be >= 0; ";
  if (!(t_measure >= 0.0)) bad << "t_measure must be >= 0; ";
  if (sample_stride < 1) bad << "sample_stride must be >= 1; ";
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) bad << "tolerances must be > 0; ";
  const std::string msg = bad.str();
  if (!msg.empty()) throw ContractViolation("IntegrationConfig: " + msg);
}

double Trajectory::sample_dt() const {
  if (times.size() < 2) return 0.0;
  return (times.back() - times.front()) /
         static_cast<double>(times.size() - 1);
}

double divergence_bound(const ModelParams& p) {
  return 1e6 * std::sqrt(p.kappa() / p.Gamma() + 1.0);
}

double fp_tol(const ModelParams& p) {
  return 1e-9 * std::sqrt(p.kappa() / p.Gamma() + 1.0);
}

void Rk4Workspace::resize(std::size_t n) {
  k1.resize(n);
  k2.resize(n);
  k3.resize(n);
  k4.resize(n);
  tmp.resize(n);
}

void rk4_step(const EomTerms& terms, std::vector<complexd>& y, double h,
              Rk4Workspace& w) {
  const std::size_t n = y.size();
  w.resize(n);
  terms.rhs(y, w.k1);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + 0.5 * h * w.k1[i];
  terms.rhs(w.tmp, w.k2);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + 0.5 * h * w.k2[i];
  terms.rhs(w.tmp, w.k3);
  for (std::size_t i = 0; i < n; ++i) w.tmp[i] = y[i] + h * w.k3[i];
  terms.rhs(w.tmp, w.k4);
  const double h6 = h / 6.0;
  for (std::size_t i = 0; i < n; ++i)
    y[i] += h6 * (w.k1[i] + 2.0 * (w.k2[i] + w.k3[i]) + w.k4[i]);
}

namespace {

void check_state(const std::vector<complexd>& y, double bound,
                 std::uint64_t step) {
  const double bound2 = bound * bound;
  for (const complexd& a : y) {
    const double m2 = std::norm(a);
    if (std::isnan(m2)) {
      std::ostringstream msg;
      msg << "NaN amplitude at step " << step;
      throw NumericalError(msg.str());
    }
    if (m2 > bound2) {
      std::ostringstream msg;
      msg << "amplitude " << std::sqrt(m2) << " exceeds divergence bound "
          << bound << " at step " << step;
      throw DivergenceError(msg.str(), step);
    }
  }
}

std::uint64_t steps_for(double span, double dt) {
  if (span <= 0.0) return 0;
  return static_cast<std::uint64_t>(std::ceil(span / dt - 1e-9));
}

// Dormand-Prince 5(4) embedded pair.
class Dopri5 {
public:
  void resize(std::size_t n) {
    if (k_[0].size() == n) return;
    for (auto& s : k_) s.resize(n);
    tmp_.resize(n);
    y5_.resize(n);
  }

  // Attempts a step of size h from y; fills result() with the 5th-order
  // solution and returns the scaled error norm.
  double attempt(const EomTerms& terms, const std::vector<complexd>& y,
                 double h, double abs_tol, double rel_tol) {
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                            a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                            a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113,
                            b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695,
                            e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    const std::size_t n = y.size();
    resize(n);
    terms.rhs(y, k_[0]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k_[0][i];
    terms.rhs(tmp_, k_[1]);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a31 * k_[0][i] + a32 * k_[1][i]);
    terms.rhs(tmp_, k_[2]);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a41 * k_[0][i] + a42 * k_[1][i] + a43 * k_[2][i]);
    terms.rhs(tmp_, k_[3]);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a51 * k_[0][i] + a52 * k_[1][i] + a53 * k_[2][i] +
                            a54 * k_[3][i]);
    terms.rhs(tmp_, k_[4]);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a61 * k_[0][i] + a62 * k_[1][i] + a63 * k_[2][i] +
                            a64 * k_[3][i] + a65 * k_[4][i]);
    terms.rhs(tmp_, k_[5]);
    for (std::size_t i = 0; i < n; ++i)
      y5_[i] = y[i] + h * (b1 * k_[0][i] + b3 * k_[2][i] + b4 * k_[3][i] +
                           b5 * k_[4][i] + b6 * k_[5][i]);
    terms.rhs(y5_, k_[6]);
    double err2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const complexd e = h * (e1 * k_[0][i] + e3 * k_[2][i] + e4 * k_[3][i] +
                              e5 * k_[4][i] + e6 * k_[5][i] + e7 * k_[6][i]);
      const double scale =
          abs_tol + rel_tol * std::max(std::abs(y[i]), std::abs(y5_[i]));
      const double q = std::abs(e) / scale;
      err2 += q * q;
    }
    return std::sqrt(err2 / static_cast<double>(n));
  }

  const std::vector<complexd>& result() const { return y5_; }

private:
  std::array<std::vector<complexd>, 7> k_;
  std::vector<complexd> tmp_, y5_;
};

Trajectory integrate_rk4(const ModelParams& params, const LatticeState& initial,
                         const IntegrationConfig& cfg) {
  const EomTerms terms = EomTerms::from(params);
  const double bound = divergence_bound(params);
  Rk4Workspace work;
  std::vector<complexd> y = initial.amplitudes;
  std::uint64_t step = 0;

  const std::uint64_t n_trans = steps_for(cfg.t_transient, cfg.dt);
  for (std::uint64_t s = 0; s < n_trans; ++s) {
    rk4_step(terms, y, cfg.dt, work);
    ++step;
    check_state(y, bound, step);
  }
  check_state(y, bound, step);
  const double t_meas0 = initial.time + static_cast<double>(n_trans) * cfg.dt;

  Trajectory traj;
  const std::uint64_t n_meas = steps_for(cfg.t_measure, cfg.dt);
  traj.times.reserve(n_meas / cfg.sample_stride + 2);
  traj.times.push_back(t_meas0);
  traj.states.push_back(y);
  for (std::uint64_t s = 1; s <= n_meas; ++s) {
    rk4_step(terms, y, cfg.dt, work);
    ++step;
    check_state(y, bound, step);
    if (s % static_cast<std::uint64_t>(cfg.sample_stride) == 0) {
      traj.times.push_back(t_meas0 + static_cast<double>(s) * cfg.dt);
      traj.states.push_back(y);
    }
  }
  check_state(y, bound, step);
  traj.terminal_state.amplitudes = std::move(y);
  traj.terminal_state.time = t_meas0 + static_cast<double>(n_meas) * cfg.dt;
  traj.steps_taken = step;
  return traj;
}

Trajectory integrate_rk45(const ModelParams& params,
                          const LatticeState& initial,
                          const IntegrationConfig& cfg) {
  const EomTerms terms = EomTerms::from(params);
  const double bound = divergence_bound(params);
  Dopri5 dp;
  std::vector<complexd> y = initial.amplitudes;
  double t = initial.time;
  double h = cfg.dt;
  std::uint64_t step = 0;

  Trajectory traj;
  std::uint64_t accepted_in_window = 0;
  bool recording = false;

  auto run_until = [&](double t_end) {
    std::uint64_t rejected = 0;
    while (t < t_end - 1e-12 * (1.0 + std::abs(t_end))) {
      const double h_try = std::min(h, t_end - t);
      const double err = dp.attempt(terms, y, h_try, cfg.abs_tol, cfg.rel_tol);
      if (err <= 1.0 || h_try <= 1e-14) {
        y = dp.result();
        t += h_try;
        ++step;
        check_state(y, bound, step);
        if (recording) {
          ++accepted_in_window;
          if (accepted_in_window %
                  static_cast<std::uint64_t>(cfg.sample_stride) ==
              0) {
            traj.times.push_back(t);
            traj.states.push_back(y);
          }
        }
        const double grow = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
        h = h_try * std::clamp(grow, 0.2, 5.0);
      } else {
        h = h_try * std::max(0.9 * std::pow(err, -0.2), 0.2);
        if (++rejected > 10000000)
          throw NumericalError("adaptive stepper stalled");
      }
    }
  };

  run_until(initial.time + cfg.t_transient);
  traj.times.push_back(t);
  traj.states.push_back(y);
  recording = true;
  run_until(t + cfg.t_measure);

  traj.terminal_state.amplitudes = std::move(y);
  traj.terminal_state.time = t;
  traj.steps_taken = step;
  return traj;
}

} // namespace

Trajectory integrate(const ModelParams& params, const LatticeState& initial,
                     const IntegrationConfig& config) {
  config.validate();
  if (static_cast<int>(initial.size()) != params.n_sites())
    throw ContractViolation("integrate: initial state length must equal N");
  if (!initial.finite())
    throw ContractViolation("integrate: initial state must be finite");
  return config.scheme == Scheme::RK4 ? integrate_rk4(params, initial, config)
                                      : integrate_rk45(params, initial, config);
}

LatticeState random_initial(const ModelParams& params, std::uint64_t seed,
                            double scale) {
  if (!(scale >= 0.0))
    throw ContractViolation("random_initial: scale must be >= 0");
  LatticeState s(static_cast<std::size_t>(params.n_sites()), 0.0);
  const double amp = scale / std::sqrt(2.0);
  for (int i = 0; i < params.n_sites(); ++i)
    s.amplitudes[i] =
        amp * standard_complex_normal(seed, static_cast<std::uint64_t>(i));
  return s;
}

namespace {

double sup_rhs_inf(const ModelParams& params, const Trajectory& traj) {
  const EomTerms terms = EomTerms::from(params);
  std::vector<complexd> d(traj.states.empty() ? 0 : traj.states[0].size());
  double sup = 0.0;
  for (const auto& s : traj.states) {
    terms.rhs(s, d);
    for (const complexd& v : d) sup = std::max(sup, std::abs(v));
  }
  return sup;
}

double rhs_inf_at(const ModelParams& params, const std::vector<complexd>& s) {
  const EomTerms terms = EomTerms::from(params);
  std::vector<complexd> d(s.size());
  terms.rhs(s, d);
  double m = 0.0;
  for (const complexd& v : d) m = std::max(m, std::abs(v));
  return m;
}

} // namespace

AttractorRecord find_attractor(const ModelParams& params,
                               const LatticeState& initial,
                               const IntegrationConfig& config) {
  config.validate();
  AttractorRecord rec;
  const double tol = fp_tol(params);

  LatticeState start = initial;
  double transient_done = 0.0;
  double next_transient = config.t_transient;
  const double max_transient = 10.0 * std::max(config.t_transient, config.dt);

  for (;;) {
    IntegrationConfig cfg = config;
    cfg.t_transient = next_transient;
    Trajectory traj;
    try {
      traj = integrate(params, start, cfg);
    } catch (const DivergenceError& e) {
      rec.kind = AttractorKind::Diverged;
      rec.diagnostics = e.what();
      return rec;
    }
    transient_done += next_transient;
    const double sup = sup_rhs_inf(params, traj);
    rec.residual_rhs = sup;
    if (sup < tol) {
      rec.kind = AttractorKind::FixedPoint;
      rec.window = std::move(traj);
      return rec;
    }
    // Critical slowing down: if the flow is still relaxing (the residual
    // decays substantially across the window) extend the transient up to
    // the 10x cap instead of misclassifying a slow decay as dynamics.
    const double r_first = rhs_inf_at(params, traj.states.front());
    const double r_last = rhs_inf_at(params, traj.states.back());
    const bool still_decaying = r_last < 0.5 * r_first && r_last > tol;
    if (still_decaying && transient_done < max_transient) {
      rec.horizon_extended = true;
      start = traj.terminal_state;
      next_transient = std::min(transient_done, max_transient - transient_done);
      continue;
    }
    rec.kind = AttractorKind::TimeDependent;
    rec.window = std::move(traj);
    return rec;
  }
}

} // namespace nrc
