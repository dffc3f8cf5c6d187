#include "nrc/chaos.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "nrc/rng.hpp"

namespace nrc {

void LyapunovConfig::validate() const {
  std::ostringstream bad;
  if (!(dt > 0.0)) bad << "dt must be > 0; ";
  if (!(renorm_interval > 0.0)) bad << "renorm_interval must be > 0; ";
  if (!(t_total > 0.0)) bad << "t_total must be > 0; ";
  const std::string msg = bad.str();
  if (!msg.empty()) throw ContractViolation("LyapunovConfig: " + msg);
}

namespace {

// RK4 on the combined (state, tangent-bundle) system; the tangents see
// the stage states through the analytic Jacobian-vector product.
class TangentStepper {
public:
  TangentStepper(const EomTerms& terms, int n, int k)
      : terms_(terms), n_(n), k_(k) {
    for (auto* b : {&fy1_, &fy2_, &fy3_, &fy4_, &ys_}) b->resize(n);
    for (auto* b : {&fv1_, &fv2_, &fv3_, &fv4_, &vs_})
      b->assign(k, std::vector<complexd>(n));
  }

  void step(std::vector<complexd>& y,
            std::vector<std::vector<complexd>>& v, double h) {
    const double h2 = 0.5 * h;
    terms_.rhs(y, fy1_);
    for (int j = 0; j < k_; ++j) terms_.jvp(y, v[j], fv1_[j]);

    axpy(ys_, y, h2, fy1_);
    terms_.rhs(ys_, fy2_);
    for (int j = 0; j < k_; ++j) {
      axpy(vs_[j], v[j], h2, fv1_[j]);
      terms_.jvp(ys_, vs_[j], fv2_[j]);
    }

    axpy(ys_, y, h2, fy2_);
    terms_.rhs(ys_, fy3_);
    for (int j = 0; j < k_; ++j) {
      axpy(vs_[j], v[j], h2, fv2_[j]);
      terms_.jvp(ys_, vs_[j], fv3_[j]);
    }

    axpy(ys_, y, h, fy3_);
    terms_.rhs(ys_, fy4_);
    for (int j = 0; j < k_; ++j) {
      axpy(vs_[j], v[j], h, fv3_[j]);
      terms_.jvp(ys_, vs_[j], fv4_[j]);
    }

    const double h6 = h / 6.0;
    for (int i = 0; i < n_; ++i)
      y[i] += h6 * (fy1_[i] + 2.0 * (fy2_[i] + fy3_[i]) + fy4_[i]);
    for (int j = 0; j < k_; ++j)
      for (int i = 0; i < n_; ++i)
        v[j][i] +=
            h6 * (fv1_[j][i] + 2.0 * (fv2_[j][i] + fv3_[j][i]) + fv4_[j][i]);
  }

private:
  static void axpy(std::vector<complexd>& out, const std::vector<complexd>& a,
                   double c, const std::vector<complexd>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + c * b[i];
  }

  EomTerms terms_;
  int n_, k_;
  std::vector<complexd> fy1_, fy2_, fy3_, fy4_, ys_;
  std::vector<std::vector<complexd>> fv1_, fv2_, fv3_, fv4_, vs_;
};

// Real inner product of complex vectors viewed as R^{2N}.
double rdot(const std::vector<complexd>& a, const std::vector<complexd>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  return s;
}

// Modified Gram-Schmidt; returns the diagonal stretch factors.
std::vector<double> orthonormalize(std::vector<std::vector<complexd>>& v) {
  const int k = static_cast<int>(v.size());
  std::vector<double> r(k);
  for (int j = 0; j < k; ++j) {
    for (int l = 0; l < j; ++l) {
      const double c = rdot(v[l], v[j]);
      for (std::size_t i = 0; i < v[j].size(); ++i) v[j][i] -= c * v[l][i];
    }
    const double norm = std::sqrt(rdot(v[j], v[j]));
    r[j] = norm;
    if (norm > 0.0)
      for (auto& x : v[j]) x /= norm;
  }
  return r;
}

} // namespace

LyapunovResult lyapunov_spectrum(const ModelParams& params,
                                 const LatticeState& initial, int k,
                                 const LyapunovConfig& config) {
  config.validate();
  const int N = params.n_sites();
  if (k < 1 || k > 2 * N)
    throw ContractViolation("lyapunov_spectrum: need 1 <= k <= 2N");
  if (static_cast<int>(initial.size()) != N)
    throw ContractViolation("lyapunov_spectrum: state length must equal N");

  const EomTerms terms = EomTerms::from(params);
  const double bound = divergence_bound(params);

  const auto steps_per_epoch = static_cast<std::uint64_t>(
      std::max(1.0, std::round(config.renorm_interval / config.dt)));
  const double epoch_time = static_cast<double>(steps_per_epoch) * config.dt;
  const auto epochs = static_cast<std::uint64_t>(
      std::max(10.0, std::round(config.t_total / epoch_time)));

  // Deterministic tangent seed: k complex-Gaussian vectors, orthonormalized.
  std::vector<std::vector<complexd>> v(k, std::vector<complexd>(N));
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < N; ++i)
      v[j][i] = standard_complex_normal(
          seed_combine(config.seed, static_cast<std::uint64_t>(j)),
          static_cast<std::uint64_t>(i));
  orthonormalize(v);

  std::vector<complexd> y = initial.amplitudes;
  TangentStepper stepper(terms, N, k);

  LyapunovResult out;
  out.renorm_interval = epoch_time;
  out.t_total = static_cast<double>(epochs) * epoch_time;
  out.history.assign(k, {});
  std::vector<std::vector<double>> logs(k); // per-epoch log stretches

  std::vector<double> cum(k, 0.0);
  for (std::uint64_t e = 0; e < epochs; ++e) {
    for (std::uint64_t s = 0; s < steps_per_epoch; ++s)
      stepper.step(y, v, config.dt);
    for (const complexd& a : y) {
      const double m = std::abs(a);
      if (std::isnan(m))
        throw NumericalError("lyapunov_spectrum: NaN in base trajectory");
      if (m > bound)
        throw DivergenceError("lyapunov_spectrum: base trajectory diverged",
                              (e + 1) * steps_per_epoch);
    }
    const std::vector<double> r = orthonormalize(v);
    bool any_alive = false;
    for (int j = 0; j < k; ++j) {
      if (r[j] > 1e-300) any_alive = true;
      const double lg = std::log(std::max(r[j], 1e-300));
      logs[j].push_back(lg);
      cum[j] += lg;
      out.history[j].push_back(cum[j] /
                               (static_cast<double>(e + 1) * epoch_time));
    }
    if (!any_alive)
      throw NumericalError("lyapunov_spectrum: renormalization underflow");
  }

  // Exponents: trailing 50% averages. Drift diagnostic: 3rd vs 4th
  // quarter averages.
  auto window_avg = [&](int j, std::uint64_t lo, std::uint64_t hi) {
    double s = 0.0;
    for (std::uint64_t e = lo; e < hi; ++e) s += logs[j][e];
    return s / (static_cast<double>(hi - lo) * epoch_time);
  };
  out.exponents.resize(k);
  out.drift.resize(k);
  for (int j = 0; j < k; ++j) {
    out.exponents[j] = window_avg(j, epochs / 2, epochs);
    out.drift[j] = std::abs(window_avg(j, epochs / 2, 3 * epochs / 4) -
                            window_avg(j, 3 * epochs / 4, epochs));
  }
  // Descending order (Gram-Schmidt produces this up to fluctuations).
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return out.exponents[a] > out.exponents[b];
  });
  LyapunovResult sorted = out;
  for (int j = 0; j < k; ++j) {
    sorted.exponents[j] = out.exponents[idx[j]];
    sorted.history[j] = std::move(out.history[idx[j]]);
    sorted.drift[j] = out.drift[idx[j]];
  }
  sorted.final_basis.assign(k, std::vector<double>(2 * N));
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < N; ++i) {
      sorted.final_basis[j][i] = v[idx[j]][i].real();
      sorted.final_basis[j][N + i] = v[idx[j]][i].imag();
    }
  sorted.final_state.amplitudes = std::move(y);
  sorted.final_state.time = initial.time + sorted.t_total;
  return sorted;
}

const char* to_string(DynamicsClassKind k) {
  switch (k) {
    case DynamicsClassKind::FixedPoint: return "fixed_point";
    case DynamicsClassKind::Periodic: return "periodic";
    case DynamicsClassKind::Quasiperiodic: return "quasiperiodic";
    case DynamicsClassKind::Chaotic: return "chaotic";
    case DynamicsClassKind::Hyperchaotic: return "hyperchaotic";
  }
  return "unknown";
}

DynamicsClass classify_dynamics(const LyapunovResult& lces,
                                const AttractorRecord& attractor,
                                double zero_tol) {
  DynamicsClass out;
  if (attractor.kind == AttractorKind::FixedPoint) {
    out.kind = DynamicsClassKind::FixedPoint;
    return out;
  }
  if (attractor.kind == AttractorKind::Diverged) {
    out.conclusive = false;
    out.diagnostics = "trajectory diverged";
    return out;
  }
  for (std::size_t j = 0; j < lces.exponents.size(); ++j) {
    const double l = lces.exponents[j];
    if (l > zero_tol)
      ++out.positive_count;
    else if (l > -zero_tol)
      ++out.zero_count;
    if (lces.drift[j] >= 0.5 * zero_tol && l > -2.0 * zero_tol) {
      // Only near-zero/positive exponents need to be resolved sharply.
      out.conclusive = false;
      std::ostringstream d;
      d << "exponent " << j << " drift " << lces.drift[j]
        << " exceeds zero_tol/2";
      out.diagnostics = d.str();
    }
  }
  if (out.positive_count >= 2)
    out.kind = DynamicsClassKind::Hyperchaotic;
  else if (out.positive_count == 1)
    out.kind = DynamicsClassKind::Chaotic;
  else if (out.zero_count >= 2)
    out.kind = DynamicsClassKind::Quasiperiodic;
  else if (out.zero_count == 1)
    out.kind = DynamicsClassKind::Periodic;
  else {
    out.kind = DynamicsClassKind::Periodic;
    out.conclusive = false;
    out.diagnostics = "no zero mode found on a time-dependent attractor";
  }
  return out;
}

namespace {

double uniform_sample_dt(const Trajectory& traj) {
  const std::size_t K = traj.times.size();
  const double dt = traj.sample_dt();
  for (std::size_t s = 1; s < K; ++s) {
    const double d = traj.times[s] - traj.times[s - 1];
    if (std::abs(d - dt) > 1e-6 * dt)
      throw ContractViolation("trajectory samples are not uniformly spaced");
  }
  return dt;
}

} // namespace

std::optional<double> detect_period(const Trajectory& traj,
                                    std::span<const int> site_subset) {
  if (traj.states.size() < 16)
    throw ContractViolation("detect_period: too few samples");
  const int N = static_cast<int>(traj.states.front().size());
  const double dt = uniform_sample_dt(traj);
  const std::size_t K = traj.states.size();

  // Gauge-invariant observables: r_j^2 and nearest-neighbor phase
  // differences for the selected sites.
  std::vector<std::vector<double>> sig;
  for (int site : site_subset) {
    if (site < 0 || site >= N)
      throw ContractViolation("detect_period: site index out of range");
    std::vector<double> a(K), b;
    for (std::size_t s = 0; s < K; ++s)
      a[s] = std::norm(traj.states[s][site]);
    sig.push_back(std::move(a));
    if (site + 1 < N) {
      b.resize(K);
      for (std::size_t s = 0; s < K; ++s)
        b[s] = std::arg(traj.states[s][site + 1] *
                        std::conj(traj.states[s][site]));
      sig.push_back(std::move(b));
    }
  }

  // Center each signal; bail out if everything is constant (a plane wave
  // has featureless gauge invariants, so "period" is undefined).
  double total_var = 0.0, scale = 0.0;
  for (auto& s : sig) {
    const double mean =
        std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(K);
    for (double& x : s) {
      x -= mean;
      total_var += x * x;
      scale = std::max(scale, std::abs(x) + std::abs(mean));
    }
  }
  if (total_var < 1e-18 * static_cast<double>(K) * (scale * scale + 1.0))
    return std::nullopt;

  // Normalized autocorrelation over the overlap window, scanned lag by
  // lag with an early exit at the first qualifying peak. Squared prefix
  // sums give the per-lag normalization in O(1).
  const std::size_t max_lag = K / 2;
  std::vector<std::vector<double>> prefix2(sig.size(),
                                           std::vector<double>(K + 1, 0.0));
  for (std::size_t c = 0; c < sig.size(); ++c)
    for (std::size_t t = 0; t < K; ++t)
      prefix2[c][t + 1] = prefix2[c][t] + sig[c][t] * sig[c][t];
  auto rho_at = [&](std::size_t lag) {
    double num = 0.0, den_a = 0.0, den_b = 0.0;
    for (std::size_t c = 0; c < sig.size(); ++c) {
      const auto& s = sig[c];
      for (std::size_t t = 0; t + lag < K; ++t) num += s[t] * s[t + lag];
      den_a += prefix2[c][K - lag];
      den_b += prefix2[c][K] - prefix2[c][lag];
    }
    const double den = std::sqrt(den_a * den_b);
    return den > 0.0 ? num / den : 0.0;
  };

  auto refine = [&](std::size_t lag) {
    const double ym = rho_at(lag - 1), y0 = rho_at(lag), yp = rho_at(lag + 1);
    const double denom = ym - 2.0 * y0 + yp;
    const double shift = denom != 0.0 ? 0.5 * (ym - yp) / denom : 0.0;
    return static_cast<double>(lag) + shift;
  };

  double rho_prev2 = 1.0, rho_prev = rho_at(1);
  for (std::size_t lag = 2; lag + 1 <= max_lag; ++lag) {
    const double rho_cur = rho_at(lag);
    // Peak test is evaluated one lag behind, once both neighbors exist.
    if (lag >= 3 && rho_prev > 0.99 && rho_prev >= rho_prev2 &&
        rho_prev >= rho_cur) {
      double T = refine(lag - 1) * dt;
      const double span = traj.times.back() - traj.times.front();
      if (span < 10.0 * T)
        throw NumericalError(
            "detect_period: window shorter than 10 candidate periods");
      // Sharpen T against the highest in-window multiple of the first
      // peak: the interpolation error divides by the harmonic index.
      const auto base = static_cast<std::size_t>(std::llround(T / dt));
      const std::size_t m = max_lag / base;
      if (m >= 2) {
        const std::size_t center = static_cast<std::size_t>(
            std::llround(static_cast<double>(m) * T / dt));
        std::size_t best = 0;
        double best_rho = 0.95; // harmonic peak must still be sharp
        const std::size_t halfwin = std::max<std::size_t>(base / 4, 2);
        for (std::size_t l = center - std::min(center - 1, halfwin);
             l <= std::min(center + halfwin, max_lag - 1); ++l) {
          const double r = rho_at(l);
          if (r > best_rho) {
            best_rho = r;
            best = l;
          }
        }
        if (best > 1 && rho_at(best) >= rho_at(best - 1) &&
            rho_at(best) >= rho_at(best + 1))
          T = refine(best) * dt / static_cast<double>(m);
      }
      return T;
    }
    rho_prev2 = rho_prev;
    rho_prev = rho_cur;
  }
  return std::nullopt;
}

double ph_restoration_residual(const Trajectory& traj, double T) {
  const double dt = uniform_sample_dt(traj);
  const std::size_t K = traj.states.size();
  const int N = static_cast<int>(traj.states.front().size());
  const double half = 0.5 * T;
  const double span = traj.times.back() - traj.times.front();
  if (span < half + 4.0 * dt)
    throw ContractViolation(
        "ph_restoration_residual: horizon shorter than half a period");

  // Cubic (Catmull-Rom) interpolation of the state at t + T/2.
  auto interp = [&](double t_target, std::vector<complexd>& out) {
    const double x = (t_target - traj.times.front()) / dt;
    auto j = static_cast<std::ptrdiff_t>(std::floor(x));
    j = std::clamp<std::ptrdiff_t>(j, 1, static_cast<std::ptrdiff_t>(K) - 3);
    const double u = x - static_cast<double>(j);
    const auto& p0 = traj.states[j - 1];
    const auto& p1 = traj.states[j];
    const auto& p2 = traj.states[j + 1];
    const auto& p3 = traj.states[j + 2];
    const double c0 = 0.5 * (-u + 2.0 * u * u - u * u * u);
    const double c1 = 0.5 * (2.0 - 5.0 * u * u + 3.0 * u * u * u);
    const double c2 = 0.5 * (u + 4.0 * u * u - 3.0 * u * u * u);
    const double c3 = 0.5 * (-u * u + u * u * u);
    out.resize(N);
    for (int i = 0; i < N; ++i)
      out[i] = c0 * p0[i] + c1 * p1[i] + c2 * p2[i] + c3 * p3[i];
  };

  // Least-squares global phase from the accumulated inner product
  // <PH[alpha(t+T/2)], alpha(t)>.
  std::vector<complexd> shifted(N);
  complexd overlap = 0.0;
  std::size_t usable = 0;
  for (std::size_t s = 0; s < K; ++s) {
    const double target = traj.times[s] + half;
    if (target > traj.times.back()) break;
    interp(target, shifted);
    ++usable;
    for (int i = 0; i < N; ++i) {
      const double sign = (i % 2 == 0) ? -1.0 : 1.0;
      const complexd ph = sign * std::conj(shifted[i]); // PH[alpha]_i
      overlap += std::conj(ph) * traj.states[s][i];
    }
  }
  if (usable < 2)
    throw ContractViolation("ph_restoration_residual: horizon too short");
  const complexd phase =
      std::abs(overlap) > 0.0 ? overlap / std::abs(overlap) : complexd(1.0);

  double worst = 0.0, max_amp = 0.0;
  for (std::size_t s = 0; s < usable; ++s) {
    interp(traj.times[s] + half, shifted);
    for (int i = 0; i < N; ++i) {
      const double sign = (i % 2 == 0) ? -1.0 : 1.0;
      const complexd ph = sign * std::conj(shifted[i]);
      worst = std::max(worst, std::abs(traj.states[s][i] - phase * ph));
      max_amp = std::max(max_amp, std::abs(traj.states[s][i]));
    }
  }
  return max_amp > 0.0 ? worst / max_amp : 0.0;
}

std::vector<std::pair<double, double>> delay_embed(
    std::span<const double> series, double delay, double dt_sample) {
  if (!(dt_sample > 0.0))
    throw ContractViolation("delay_embed: dt_sample must be > 0");
  const double ratio = delay / dt_sample;
  const auto shift = static_cast<std::ptrdiff_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(shift)) > 1e-9 || shift < 0)
    throw ContractViolation(
        "delay_embed: delay must be a nonnegative multiple of dt_sample");
  if (shift >= static_cast<std::ptrdiff_t>(series.size()))
    throw ContractViolation("delay_embed: delay longer than the series");
  std::vector<std::pair<double, double>> pairs;
  pairs.reserve(series.size() - shift);
  for (std::size_t i = 0; i + shift < series.size(); ++i)
    pairs.emplace_back(series[i], series[i + shift]);
  return pairs;
}

} // namespace nrc
