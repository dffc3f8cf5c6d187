#include "nrc/model.hpp"

#include <cmath>
#include <sstream>

namespace nrc {

ModelParams::ModelParams(double J, double gamma, double kappa, double Gamma,
                         double theta, int n_sites, Boundary boundary)
    : J_(J), gamma_(gamma), kappa_(kappa), Gamma_(Gamma),
      theta_(reduce_angle(theta)), n_(n_sites), boundary_(boundary) {
  std::ostringstream bad;
  if (!(J > 0.0)) bad << "J must be > 0 (got " << J << "); ";
  if (!(Gamma > 0.0)) bad << "Gamma must be > 0 (got " << Gamma << "); ";
  if (!(kappa >= 0.0)) bad << "kappa must be >= 0 (got " << kappa << "); ";
  if (!(gamma >= 0.0)) bad << "gamma must be >= 0 (got " << gamma << "); ";
  if (n_sites < 2) bad << "N must be >= 2 (got " << n_sites << "); ";
  if (!std::isfinite(theta)) bad << "theta must be finite; ";
  const std::string msg = bad.str();
  if (!msg.empty()) throw ContractViolation("ModelParams: " + msg);
}

complexd ModelParams::j_plus() const {
  return -(J_ + gamma_ * std::polar(1.0, theta_));
}

complexd ModelParams::j_minus() const {
  return -(J_ - gamma_ * std::polar(1.0, -theta_));
}

ModelParams ModelParams::with_kappa(double kappa) const {
  return {J_, gamma_, kappa, Gamma_, theta_, n_, boundary_};
}
ModelParams ModelParams::with_gamma(double gamma) const {
  return {J_, gamma, kappa_, Gamma_, theta_, n_, boundary_};
}
ModelParams ModelParams::with_n_sites(int n) const {
  return {J_, gamma_, kappa_, Gamma_, theta_, n, boundary_};
}
ModelParams ModelParams::with_boundary(Boundary b) const {
  return {J_, gamma_, kappa_, Gamma_, theta_, n_, b};
}

bool LatticeState::finite() const {
  for (const complexd& a : amplitudes)
    if (!std::isfinite(a.real()) || !std::isfinite(a.imag())) return false;
  return true;
}

double LatticeState::max_abs() const {
  double m = 0.0;
  for (const complexd& a : amplitudes) m = std::max(m, std::abs(a));
  return m;
}

EomTerms EomTerms::from(const ModelParams& p) {
  EomTerms t;
  t.gain = p.kappa() - 2.0 * p.gamma();
  t.two_photon = p.Gamma();
  // i(J + gamma e^{i theta}) = -i * J+ and i(J - gamma e^{-i theta}) = -i * J-
  t.hop_right = complexd(0.0, 1.0) * -p.j_plus();
  t.hop_left = complexd(0.0, 1.0) * -p.j_minus();
  t.n = p.n_sites();
  t.boundary = p.boundary();
  return t;
}

void EomTerms::rhs(std::span<const complexd> state,
                   std::span<complexd> out) const {
  const int N = n;
  if (static_cast<int>(state.size()) != N || static_cast<int>(out.size()) != N)
    throw ContractViolation("eom_rhs: state length must equal N");
  // Virtual zero-padded neighbors give a single code path for both
  // boundary conditions.
  const bool periodic = (boundary == Boundary::Periodic);
  for (int i = 0; i < N; ++i) {
    const complexd a = state[i];
    const complexd right =
        (i + 1 < N) ? state[i + 1] : (periodic ? state[0] : complexd{});
    const complexd left =
        (i > 0) ? state[i - 1] : (periodic ? state[N - 1] : complexd{});
    out[i] = (gain - two_photon * std::norm(a)) * a + hop_right * right +
             hop_left * left;
  }
}

void EomTerms::jvp(std::span<const complexd> state, std::span<const complexd> v,
                   std::span<complexd> out) const {
  const int N = n;
  if (static_cast<int>(state.size()) != N ||
      static_cast<int>(v.size()) != N || static_cast<int>(out.size()) != N)
    throw ContractViolation("eom jvp: vector length must equal N");
  const bool periodic = (boundary == Boundary::Periodic);
  // d(rhs_j) = (gain - 2 Gamma |a|^2) dv_j - Gamma a^2 conj(dv_j)
  //          + hop_right dv_{j+1} + hop_left dv_{j-1}
  for (int i = 0; i < N; ++i) {
    const complexd a = state[i];
    const complexd dv = v[i];
    const complexd right =
        (i + 1 < N) ? v[i + 1] : (periodic ? v[0] : complexd{});
    const complexd left =
        (i > 0) ? v[i - 1] : (periodic ? v[N - 1] : complexd{});
    out[i] = (gain - 2.0 * two_photon * std::norm(a)) * dv -
             two_photon * a * a * std::conj(dv) + hop_right * right +
             hop_left * left;
  }
}

void eom_rhs(const ModelParams& params, std::span<const complexd> state,
             std::span<complexd> out) {
  EomTerms::from(params).rhs(state, out);
}

LatticeState eom_rhs(const ModelParams& params, const LatticeState& state) {
  LatticeState d(state.size(), state.time);
  eom_rhs(params, state.amplitudes, d.amplitudes);
  return d;
}

LatticeState ph_conjugate(const LatticeState& state) {
  LatticeState r(state.size(), state.time);
  for (std::size_t i = 0; i < state.size(); ++i) {
    // e^{i pi j} = -1 for odd site j = i + 1, i.e. even storage index i.
    const double sign = (i % 2 == 0) ? -1.0 : 1.0;
    r.amplitudes[i] = sign * std::conj(state.amplitudes[i]);
  }
  return r;
}

LatticeState u1_rotate(const LatticeState& state, double phi) {
  const complexd f = std::polar(1.0, phi);
  LatticeState r(state.size(), state.time);
  for (std::size_t i = 0; i < state.size(); ++i)
    r.amplitudes[i] = f * state.amplitudes[i];
  return r;
}

LatticeState traveling_wave_state(const ModelParams& params, double q) {
  const double gq = pbc_gamma_q(params, q);
  if (!(params.kappa() > gq)) {
    std::ostringstream msg;
    msg << "traveling wave at q=" << q << " does not exist: kappa="
        << params.kappa() << " <= gamma_q=" << gq;
    throw DomainError(msg.str());
  }
  const double r = std::sqrt((params.kappa() - gq) / params.Gamma());
  LatticeState s(static_cast<std::size_t>(params.n_sites()), 0.0);
  for (int i = 0; i < params.n_sites(); ++i)
    s.amplitudes[i] = std::polar(r, q * static_cast<double>(i + 1));
  return s;
}

} // namespace nrc
