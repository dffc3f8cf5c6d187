#include "nrc/obc_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nrc/spectral.hpp"

namespace nrc {

Eigen::VectorXd state_to_real(const LatticeState& state) {
  const int N = static_cast<int>(state.size());
  Eigen::VectorXd x(2 * N);
  for (int i = 0; i < N; ++i) {
    x(i) = state.amplitudes[i].real();
    x(N + i) = state.amplitudes[i].imag();
  }
  return x;
}

LatticeState state_from_real(const Eigen::VectorXd& x, double time) {
  const int N = static_cast<int>(x.size()) / 2;
  LatticeState s(static_cast<std::size_t>(N), time);
  for (int i = 0; i < N; ++i) s.amplitudes[i] = {x(i), x(N + i)};
  return s;
}

Eigen::VectorXd u1_direction(const LatticeState& state) {
  const int N = static_cast<int>(state.size());
  Eigen::VectorXd u(2 * N);
  for (int i = 0; i < N; ++i) {
    u(i) = -state.amplitudes[i].imag();
    u(N + i) = state.amplitudes[i].real();
  }
  const double n = u.norm();
  if (n > 0.0) u /= n;
  return u;
}

JacobianMatrix jacobian(const ModelParams& params, const LatticeState& state) {
  if (static_cast<int>(state.size()) != params.n_sites())
    throw ContractViolation("jacobian: state length must equal N");
  const int N = params.n_sites();
  // d(rhs) = A dalpha + B conj(dalpha) with
  //   A = diag(gain - 2 Gamma |a|^2) + hop_right E_+ + hop_left E_-,
  //   B = diag(-Gamma a^2).
  // Real blocks: [[Re(A+B), -Im(A-B)], [Im(A+B), Re(A-B)]].
  const EomTerms t = EomTerms::from(params);
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(N, N);
  Eigen::MatrixXcd B = Eigen::MatrixXcd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    const complexd a = state.amplitudes[i];
    A(i, i) = t.gain - 2.0 * t.two_photon * std::norm(a);
    B(i, i) = -t.two_photon * a * a;
    if (i + 1 < N) {
      A(i, i + 1) = t.hop_right;
      A(i + 1, i) = t.hop_left;
    }
  }
  if (params.boundary() == Boundary::Periodic) {
    if (N > 2) {
      A(N - 1, 0) = t.hop_right;
      A(0, N - 1) = t.hop_left;
    } else {
      A(1, 0) += t.hop_right;
      A(0, 1) += t.hop_left;
    }
  }
  JacobianMatrix jac{Eigen::MatrixXd(2 * N, 2 * N), state};
  const Eigen::MatrixXcd apb = A + B;
  const Eigen::MatrixXcd amb = A - B;
  jac.matrix.topLeftCorner(N, N) = apb.real();
  jac.matrix.topRightCorner(N, N) = -amb.imag();
  jac.matrix.bottomLeftCorner(N, N) = apb.imag();
  jac.matrix.bottomRightCorner(N, N) = amb.real();
  return jac;
}

FixedPointSpectrum fixed_point_spectrum(const JacobianMatrix& jac) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(jac.matrix);
  if (es.info() != Eigen::Success)
    throw NumericalError("fixed_point_spectrum: eigensolver failed");
  const int n = static_cast<int>(jac.matrix.rows());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  const auto& ev = es.eigenvalues();
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });

  // The Goldstone mode: eigenvalue of smallest magnitude; check tangency
  // to the U(1) orbit for diagnostics.
  int gold = idx[0];
  for (int i : idx)
    if (std::abs(ev(i)) < std::abs(ev(gold))) gold = i;
  const Eigen::VectorXd u = u1_direction(jac.base);
  Eigen::VectorXcd gv = es.eigenvectors().col(gold);
  double angle = kPi / 2.0;
  if (u.norm() > 0.0 && gv.norm() > 0.0) {
    const double c = std::abs(u.cast<complexd>().dot(gv)) / gv.norm();
    angle = std::acos(std::clamp(c, 0.0, 1.0));
  }

  FixedPointSpectrum out;
  out.goldstone_abs = std::abs(ev(gold));
  out.goldstone_angle = angle;
  out.abscissa_excluding_goldstone = -std::numeric_limits<double>::infinity();
  out.eigenvalues.reserve(n);
  for (int i : idx) {
    out.eigenvalues.push_back(ev(i));
    if (i != gold)
      out.abscissa_excluding_goldstone =
          std::max(out.abscissa_excluding_goldstone, ev(i).real());
  }
  return out;
}

namespace {

double rhs_inf_norm(const EomTerms& terms, const std::vector<complexd>& y,
                    std::vector<complexd>& scratch) {
  scratch.resize(y.size());
  terms.rhs(y, scratch);
  double m = 0.0;
  for (const complexd& v : scratch) m = std::max(m, std::abs(v));
  return m;
}

constexpr double kNewtonTol = 1e-11;

bool theta_is_ph_symmetric(const ModelParams& p) {
  const double t = p.theta();
  return std::abs(t) < 1e-12 || std::abs(t - kPi) < 1e-12 ||
         std::abs(t - kTwoPi) < 1e-12;
}

// Exact quarter-turn phase e^{i q_s j} for q_s = +-pi/2 (1-based site j).
complexd quarter_phase(int j, bool plus) {
  switch (((j % 4) + 4) % 4) {
    case 0: return {1.0, 0.0};
    case 1: return plus ? complexd{0.0, 1.0} : complexd{0.0, -1.0};
    case 2: return {-1.0, 0.0};
    default: return plus ? complexd{0.0, -1.0} : complexd{0.0, 1.0};
  }
}

// Damped Newton restricted to the PH-symmetric sector
// alpha_j = e^{i q_s j} beta_j with beta real (theta in {0, pi} only).
// The U(1) Goldstone mode and the critical slowing mode are both PH-odd,
// so the restricted Jacobian stays nondegenerate through the critical
// exceptional point and the static branch can be tracked below it.
bool newton_polish_ph_sector(const ModelParams& params, LatticeState& state,
                             int max_iter = 60) {
  const int N = params.n_sites();
  const bool plus = std::abs(params.theta() - kPi) < 1e-12;
  const EomTerms terms = EomTerms::from(params);
  std::vector<complexd> scratch;

  // Align the global phase and project onto the sector.
  complexd overlap = 0.0;
  for (int i = 0; i < N; ++i)
    overlap += std::conj(quarter_phase(i + 1, plus)) * state.amplitudes[i];
  const complexd rot =
      std::abs(overlap) > 0.0 ? std::abs(overlap) / overlap : complexd(1.0);
  Eigen::VectorXd beta(N);
  for (int i = 0; i < N; ++i)
    beta(i) = (std::conj(quarter_phase(i + 1, plus)) * rot *
               state.amplitudes[i])
                  .real();

  auto rebuild = [&](const Eigen::VectorXd& b, LatticeState& out) {
    out.amplitudes.resize(N);
    for (int i = 0; i < N; ++i)
      out.amplitudes[i] = quarter_phase(i + 1, plus) * b(i);
  };

  LatticeState trial(static_cast<std::size_t>(N), state.time);
  rebuild(beta, trial);
  double res = rhs_inf_norm(terms, trial.amplitudes, scratch);

  for (int it = 0; it < max_iter; ++it) {
    if (res < kNewtonTol) {
      state = trial;
      return true;
    }
    // Restricted Jacobian G_{jl} = Re[conj(p_j)(A_{jl} p_l + B_{jl} conj(p_l))]
    // with dalpha = p_l db (db real); tridiagonal like the couplings.
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(N, N);
    for (int j = 0; j < N; ++j) {
      const complexd pj = quarter_phase(j + 1, plus);
      const complexd a = trial.amplitudes[j];
      const complexd diag = (terms.gain - 2.0 * terms.two_photon * std::norm(a)) * pj -
                            terms.two_photon * a * a * std::conj(pj);
      G(j, j) = (std::conj(pj) * diag).real();
      if (j + 1 < N)
        G(j, j + 1) =
            (std::conj(pj) * terms.hop_right * quarter_phase(j + 2, plus))
                .real();
      if (j > 0)
        G(j, j - 1) =
            (std::conj(pj) * terms.hop_left * quarter_phase(j, plus)).real();
    }
    terms.rhs(trial.amplitudes, scratch);
    Eigen::VectorXd g(N);
    for (int j = 0; j < N; ++j)
      g(j) = (std::conj(quarter_phase(j + 1, plus)) * scratch[j]).real();
    const Eigen::VectorXd step = G.partialPivLu().solve(-g);
    if (!step.allFinite()) return false;

    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      LatticeState cand(static_cast<std::size_t>(N), state.time);
      rebuild(beta + lambda * step, cand);
      const double cres = rhs_inf_norm(terms, cand.amplitudes, scratch);
      if (cres < (1.0 - 0.25 * lambda) * res || cres < kNewtonTol) {
        beta += lambda * step;
        trial = std::move(cand);
        res = cres;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return false;
  }
  if (res < kNewtonTol) {
    state = trial;
    return true;
  }
  return false;
}

// Damped Newton on the bordered system [[J, u], [u^T, 0]]; the border
// pins the global phase by keeping steps orthogonal to the U(1) orbit.
bool newton_polish_bordered(const ModelParams& params, LatticeState& state,
                            int max_iter = 60) {
  const int N = params.n_sites();
  const EomTerms terms = EomTerms::from(params);
  std::vector<complexd> scratch;
  double res = rhs_inf_norm(terms, state.amplitudes, scratch);
  for (int it = 0; it < max_iter; ++it) {
    if (res < kNewtonTol) return true;
    const JacobianMatrix jac = jacobian(params, state);
    const Eigen::VectorXd u = u1_direction(state);
    Eigen::MatrixXd bord = Eigen::MatrixXd::Zero(2 * N + 1, 2 * N + 1);
    bord.topLeftCorner(2 * N, 2 * N) = jac.matrix;
    bord.topRightCorner(2 * N, 1) = u;
    bord.bottomLeftCorner(1, 2 * N) = u.transpose();
    Eigen::VectorXd rhs(2 * N + 1);
    terms.rhs(state.amplitudes, scratch);
    for (int i = 0; i < N; ++i) {
      rhs(i) = -scratch[i].real();
      rhs(N + i) = -scratch[i].imag();
    }
    rhs(2 * N) = 0.0;
    const Eigen::VectorXd sol = bord.partialPivLu().solve(rhs);
    if (!sol.allFinite()) return false;
    const Eigen::VectorXd dx = sol.head(2 * N);

    // Backtracking line search on the residual.
    const Eigen::VectorXd x0 = state_to_real(state);
    double lambda = 1.0;
    bool accepted = false;
    for (int bt = 0; bt < 30; ++bt) {
      LatticeState trial = state_from_real(x0 + lambda * dx, state.time);
      const double tr_res = rhs_inf_norm(terms, trial.amplitudes, scratch);
      if (tr_res < (1.0 - 0.25 * lambda) * res || tr_res < kNewtonTol) {
        state = std::move(trial);
        res = tr_res;
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) return false;
  }
  return res < kNewtonTol;
}

bool newton_polish(const ModelParams& params, LatticeState& state,
                   int max_iter = 60) {
  if (theta_is_ph_symmetric(params))
    return newton_polish_ph_sector(params, state, max_iter);
  return newton_polish_bordered(params, state, max_iter);
}

LatticeState bulk_ansatz(const ModelParams& params) {
  // Uniform condensate at the minimal-damping wavevector; the edges relax
  // during the integration stage.
  const double qs = principal_angle(-kPi / 2.0 - params.theta());
  const double r = std::sqrt(params.kappa() / params.Gamma());
  LatticeState s(static_cast<std::size_t>(params.n_sites()), 0.0);
  for (int i = 0; i < params.n_sites(); ++i)
    s.amplitudes[i] = std::polar(r, qs * static_cast<double>(i + 1));
  return s;
}

bool is_vacuum_like(const ModelParams& params, const LatticeState& s) {
  return s.max_abs() < 1e-4 * std::sqrt(params.kappa() / params.Gamma() + 1.0);
}

} // namespace

LatticeState static_condensate(const ModelParams& params,
                               const LatticeState& guess) {
  LatticeState state = guess;
  state.time = 0.0;
  if (!newton_polish(params, state) || is_vacuum_like(params, state))
    throw NumericalError("no static condensate found (Newton did not "
                         "converge from the supplied guess)");
  return state;
}

LatticeState static_condensate(const ModelParams& params) {
  IntegrationConfig relax;
  relax.dt = 5e-3;
  relax.t_measure = 0.0;
  relax.sample_stride = 1;

  LatticeState state = bulk_ansatz(params);
  const double chunks[] = {300.0, 700.0, 2000.0, 4000.0};
  std::string last_err = "relaxation did not reach a fixed point";
  for (double span : chunks) {
    relax.t_transient = span;
    Trajectory t = integrate(params, state, relax);
    state = t.terminal_state;
    LatticeState polished = state;
    if (newton_polish(params, polished) && !is_vacuum_like(params, polished)) {
      polished.time = 0.0;
      return polished;
    }
    if (is_vacuum_like(params, state))
      last_err = "relaxation collapsed to the vacuum";
  }
  throw NumericalError("no static condensate found (" + last_err + ")");
}

KinkPosition kink_position(const LatticeState& state,
                           const ModelParams& params) {
  const int N = static_cast<int>(state.size());
  const double thr = 0.5 * std::sqrt(params.kappa() / params.Gamma());
  std::vector<double> r(N);
  for (int i = 0; i < N; ++i) r[i] = std::abs(state.amplitudes[i]);
  if (r[0] >= thr) return {0.0, false}; // saturated all the way to the left
  for (int i = 0; i + 1 < N; ++i) {
    if (r[i] < thr && r[i + 1] >= thr) {
      const double frac = (thr - r[i]) / (r[i + 1] - r[i]);
      return {static_cast<double>(i + 1) + frac, true}; // 1-based sites
    }
  }
  return {static_cast<double>(N), false}; // never crosses: vacuum-like
}

namespace {

// Continuation from (kappa_from, solution) down/up to kappa_to with
// adaptive substeps: near the vacuum threshold the kink position varies
// steeply with kappa and the Newton basin shrinks accordingly.
LatticeState track_static_adaptive(const ModelParams& params_base,
                                   double kappa_from, double kappa_to,
                                   LatticeState sol) {
  double cur = kappa_from;
  const double dir = kappa_to < kappa_from ? -1.0 : 1.0;
  double substep = std::abs(kappa_to - kappa_from);
  const double min_step = 1e-9 * (1.0 + std::abs(kappa_to));
  while (dir * (kappa_to - cur) > 1e-15 * (1.0 + std::abs(kappa_to))) {
    const double next =
        dir > 0 ? std::min(cur + substep, kappa_to)
                : std::max(cur - substep, kappa_to);
    try {
      sol = static_condensate(params_base.with_kappa(next), sol);
      cur = next;
      substep *= 1.6;
    } catch (const NumericalError&) {
      substep *= 0.5;
      if (substep < min_step)
        throw NumericalError(
            "no static condensate found (tracking lost the static branch)");
    }
  }
  return sol;
}

} // namespace

KinkFitReport fit_kink_scaling(const ModelParams& params_base,
                               std::span<const double> kappas) {
  if (kappas.size() < 3)
    throw ContractViolation("fit_kink_scaling: need at least 3 kappa values");
  std::vector<double> ks(kappas.begin(), kappas.end());
  std::sort(ks.begin(), ks.end(), std::greater<>());

  KinkFitReport rep;
  // Threshold on the horizontal axis: the bulk (N -> infinity) value.
  // The kink position probes the vacuum threshold of the effective
  // unsaturated subsystem, which involves the bulk threshold, not the
  // finite-N one of the full chain.
  rep.kappa_crit = vacuum_threshold_bulk(params_base);

  LatticeState sol = static_condensate(params_base.with_kappa(ks.front()));
  double kappa_prev = ks.front();
  std::vector<double> logx, logy;
  for (double kappa : ks) {
    const ModelParams p = params_base.with_kappa(kappa);
    sol = track_static_adaptive(params_base, kappa_prev, kappa, sol);
    kappa_prev = kappa;
    const KinkPosition kp = kink_position(sol, p);
    rep.kappas.push_back(kappa);
    rep.positions.push_back(kp.position);
    rep.heights.push_back(sol.max_abs());
    if (kp.crossed && kappa > rep.kappa_crit) {
      logx.push_back(std::log(kappa - rep.kappa_crit));
      logy.push_back(std::log(kp.position));
    }
  }
  if (logx.size() < 3)
    throw NumericalError("fit_kink_scaling: too few crossed-kink points");

  // Least squares slope on log-log.
  const double n = static_cast<double>(logx.size());
  const double sx = std::accumulate(logx.begin(), logx.end(), 0.0);
  const double sy = std::accumulate(logy.begin(), logy.end(), 0.0);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < logx.size(); ++i) {
    sxx += logx[i] * logx[i];
    sxy += logx[i] * logy[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double intercept = (sy - slope * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < logx.size(); ++i) {
    const double r = logy[i] - (slope * logx[i] + intercept);
    ss += r * r;
  }
  rep.exponent = slope;
  rep.residual = std::sqrt(ss / n);
  rep.fit_lo = std::exp(*std::min_element(logx.begin(), logx.end()));
  rep.fit_hi = std::exp(*std::max_element(logx.begin(), logx.end()));
  return rep;
}

// ---------------------------------------------------------------------
// Order parameters
// ---------------------------------------------------------------------

OrderParameters order_parameters(const Trajectory& traj, int bulk_lo,
                                 int bulk_hi) {
  if (traj.states.size() < 2 || traj.times.size() != traj.states.size())
    throw ContractViolation("order_parameters: need at least two samples");
  const int N = static_cast<int>(traj.states.front().size());
  if (bulk_lo < 0 || bulk_hi > N || bulk_lo >= bulk_hi)
    throw ContractViolation("order_parameters: bad bulk window");
  const std::size_t K = traj.states.size();
  const double t_span = traj.times.back() - traj.times.front();
  if (!(t_span > 0.0))
    throw ContractViolation("order_parameters: degenerate time window");

  OrderParameters out;

  // Per-site time-unwrapped phase winding. Nearest-branch continuation:
  // the jump between consecutive samples is mapped into (-pi, pi].
  std::vector<double> winding(N, 0.0), prev_arg(N);
  for (int i = 0; i < N; ++i)
    prev_arg[i] = std::arg(traj.states.front()[i]);
  for (std::size_t s = 1; s < K; ++s) {
    for (int i = 0; i < N; ++i) {
      const double a = std::arg(traj.states[s][i]);
      winding[i] += principal_angle(a - prev_arg[i]);
      prev_arg[i] = a;
    }
  }
  double wsum_bulk = 0.0, wsum_all = 0.0;
  for (int i = 0; i < N; ++i) {
    const double omega_i = -winding[i] / t_span;
    wsum_all += omega_i;
    if (i >= bulk_lo && i < bulk_hi) wsum_bulk += omega_i;
  }
  out.mean_frequency = wsum_bulk / static_cast<double>(bulk_hi - bulk_lo);
  out.mean_frequency_all = wsum_all / static_cast<double>(N);

  // Bond wavevector: time-unwrapped nearest-neighbor phase differences,
  // averaged over time, then over the bulk bonds.
  if (bulk_hi - bulk_lo >= 2) {
    double qsum = 0.0;
    int nbonds = 0;
    for (int i = bulk_lo; i + 1 < bulk_hi; ++i) {
      double d = std::arg(traj.states.front()[i + 1] *
                          std::conj(traj.states.front()[i]));
      double acc = d;
      double prev = d;
      for (std::size_t s = 1; s < K; ++s) {
        const double raw = std::arg(traj.states[s][i + 1] *
                                    std::conj(traj.states[s][i]));
        prev += principal_angle(raw - prev);
        acc += prev;
      }
      qsum += acc / static_cast<double>(K);
      ++nbonds;
    }
    out.mean_wavevector = qsum / static_cast<double>(nbonds);
  }

  // Amplitude and density-rate statistics.
  double amp_bulk = 0.0;
  out.edge_density_rate_profile.assign(N, 0.0);
  std::vector<double> prev_r2(N);
  for (int i = 0; i < N; ++i)
    prev_r2[i] = std::norm(traj.states.front()[i]);
  for (std::size_t s = 0; s < K; ++s) {
    for (int i = 0; i < N; ++i) {
      const double r2 = std::norm(traj.states[s][i]);
      if (i >= bulk_lo && i < bulk_hi) amp_bulk += std::sqrt(r2);
      if (s > 0) {
        const double dt = traj.times[s] - traj.times[s - 1];
        out.edge_density_rate_profile[i] += std::abs(r2 - prev_r2[i]) / dt;
      }
      prev_r2[i] = r2;
    }
  }
  out.mean_amplitude =
      amp_bulk / static_cast<double>(K * (bulk_hi - bulk_lo));
  double dens = 0.0;
  for (int i = 0; i < N; ++i) {
    out.edge_density_rate_profile[i] /= static_cast<double>(K - 1);
    dens += out.edge_density_rate_profile[i];
  }
  out.mean_density_rate = dens / static_cast<double>(N);
  return out;
}

OrderParameters order_parameters(const Trajectory& traj, int n_sites) {
  const int lo = n_sites / 4;
  const int hi = n_sites - n_sites / 4;
  return order_parameters(traj, lo, hi);
}

// ---------------------------------------------------------------------
// Critical-exceptional-point scan and the static stability boundary
// ---------------------------------------------------------------------

namespace {

struct LeadingPair {
  double lambda2;
  double theta12;
};

// lambda2 and the principal angle between the eigenvectors of the two
// largest-real-part eigenvalues. Conjugate pairs are represented by the
// member with nonnegative imaginary part (the sort puts it first).
LeadingPair leading_pair(const JacobianMatrix& jac) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(jac.matrix);
  if (es.info() != Eigen::Success)
    throw NumericalError("leading_pair: eigensolver failed");
  const auto& ev = es.eigenvalues();
  const int n = static_cast<int>(ev.size());
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  // Skip the conjugate twin of the leading eigenvalue when selecting the
  // second mode.
  int second = idx[1];
  if (ev(idx[1]) == std::conj(ev(idx[0])) && ev(idx[0]).imag() != 0.0 &&
      n > 2)
    second = idx[2];
  const Eigen::VectorXcd v1 = es.eigenvectors().col(idx[0]);
  const Eigen::VectorXcd v2 = es.eigenvectors().col(second);
  const double c =
      std::abs(v1.dot(v2)) / (v1.norm() * v2.norm());
  return {ev(second).real(), std::acos(std::clamp(c, 0.0, 1.0))};
}

} // namespace

std::vector<CepScanRow> cep_scan(const ModelParams& params,
                                 std::span<const double> kappa_grid) {
  if (kappa_grid.empty())
    throw ContractViolation("cep_scan: kappa grid must be nonempty");
  // Continuation from the largest kappa (deepest in the static phase).
  std::vector<std::size_t> order(kappa_grid.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return kappa_grid[a] > kappa_grid[b];
  });

  std::vector<CepScanRow> rows(kappa_grid.size());
  std::optional<LatticeState> prev;
  for (std::size_t i : order) {
    const ModelParams p = params.with_kappa(kappa_grid[i]);
    CepScanRow& row = rows[i];
    row.kappa = kappa_grid[i];
    try {
      LatticeState sol =
          prev ? static_condensate(p, *prev) : static_condensate(p);
      prev = sol;
      const LeadingPair lp = leading_pair(jacobian(p, sol));
      row.lambda2 = lp.lambda2;
      row.theta12 = lp.theta12;
      row.valid = true;
    } catch (const NumericalError&) {
      row.valid = false;
    }
  }
  return rows;
}

std::vector<StaticBoundaryRow> static_stability_boundary(
    const ModelParams& params_base, std::span<const double> gamma_grid,
    double kappa_lo, double kappa_hi) {
  if (!(kappa_lo < kappa_hi))
    throw ContractViolation("static_stability_boundary: bad kappa bracket");
  std::vector<StaticBoundaryRow> rows;
  rows.reserve(gamma_grid.size());

  for (double gamma : gamma_grid) {
    const ModelParams pg = params_base.with_gamma(gamma);
    StaticBoundaryRow row;
    row.gamma = gamma;
    try {
      // `sol` tracks the lowest-kappa solution found on the stable side;
      // probes Newton-refine from it. Two exits from the static region
      // occur: the state destabilizes while existing (oscillatory
      // instability; abscissa crosses 0) or the branch terminates at the
      // critical exceptional point (Newton stops converging as lambda_2
      // reaches 0). Both count as the unstable side of the bisection.
      LatticeState sol = static_condensate(pg.with_kappa(kappa_hi));
      auto stable_at = [&](double kappa) {
        const ModelParams p = pg.with_kappa(kappa);
        try {
          LatticeState probe = static_condensate(p, sol);
          const double absc = fixed_point_spectrum(jacobian(p, probe))
                                  .abscissa_excluding_goldstone;
          if (absc < 0.0) {
            sol = std::move(probe);
            return true;
          }
          return false;
        } catch (const NumericalError&) {
          return false;
        }
      };
      if (!stable_at(kappa_hi))
        throw NumericalError("static state not stable at kappa_hi");

      const double step = std::max((kappa_hi - kappa_lo) / 40.0, 1e-3);
      double hi = kappa_hi, lo = kappa_lo;
      bool bracketed = false;
      for (double kappa = kappa_hi - step; kappa > kappa_lo - 0.5 * step;
           kappa -= step) {
        const double k = std::max(kappa, kappa_lo);
        if (!stable_at(k)) {
          lo = k;
          bracketed = true;
          break;
        }
        hi = k;
      }
      if (!bracketed) {
        rows.push_back(row); // stable everywhere probed: no boundary
        continue;
      }
      while (hi - lo > 1e-4) {
        const double mid = 0.5 * (lo + hi);
        (stable_at(mid) ? hi : lo) = mid;
      }
      row.kappa = 0.5 * (lo + hi);
      row.found = true;
    } catch (const NumericalError&) {
      row.found = false;
    }
    rows.push_back(row);
  }
  return rows;
}

} // namespace nrc

