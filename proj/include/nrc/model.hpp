#pragma once

#include <span>
#include <vector>

#include "nrc/common.hpp"

// Mean-field model of a 1D nonreciprocal driven-dissipative bosonic chain.
//
// The equation of motion for the coherent amplitudes alpha_j is
//
//   d/dt alpha_j = (kappa - 2 gamma) alpha_j - Gamma |alpha_j|^2 alpha_j
//                + i (J + gamma e^{ i theta}) alpha_{j+1}
//                + i (J - gamma e^{-i theta}) alpha_{j-1}
//
// Site indices in all phase-factor formulas (e^{i pi j}, e^{i q j}) are
// 1-based, j = 1..N; storage is 0-based, so storage slot i holds site
// j = i + 1. With periodic boundaries alpha_{N+1} = alpha_1; with open
// boundaries the out-of-range neighbors are treated as zero.

namespace nrc {

enum class Boundary { Periodic, Open };

class ModelParams {
public:
  // Placeholder (J=1, Gamma=1, N=2, open, everything else 0); real
  // parameter sets come from the validating constructor below.
  ModelParams() : ModelParams(1.0, 0.0, 0.0, 1.0, 0.0, 2, Boundary::Open) {}

  // Validates J > 0, Gamma > 0, kappa >= 0, gamma >= 0, N >= 2 and
  // reduces theta to [0, 2*pi). Throws ContractViolation otherwise.
  ModelParams(double J, double gamma, double kappa, double Gamma,
              double theta, int n_sites, Boundary boundary);

  double J() const { return J_; }
  double gamma() const { return gamma_; }
  double kappa() const { return kappa_; }
  double Gamma() const { return Gamma_; }
  double theta() const { return theta_; }
  int n_sites() const { return n_; }
  Boundary boundary() const { return boundary_; }

  // Hatano-Nelson couplings: diagonal Delta = i(kappa - 2 gamma),
  // superdiagonal J+ = -(J + gamma e^{i theta}),
  // subdiagonal   J- = -(J - gamma e^{-i theta}).
  complexd delta() const { return {0.0, kappa_ - 2.0 * gamma_}; }
  complexd j_plus() const;
  complexd j_minus() const;

  ModelParams with_kappa(double kappa) const;
  ModelParams with_gamma(double gamma) const;
  ModelParams with_n_sites(int n) const;
  ModelParams with_boundary(Boundary b) const;

private:
  double J_, gamma_, kappa_, Gamma_, theta_;
  int n_;
  Boundary boundary_;
};

struct LatticeState {
  std::vector<complexd> amplitudes;
  double time = 0.0;

  LatticeState() = default;
  LatticeState(std::size_t n, double t = 0.0) : amplitudes(n), time(t) {}

  std::size_t size() const { return amplitudes.size(); }
  bool finite() const;
  double max_abs() const;
};

// Precomputed couplings of the equation of motion; the innermost loops
// run off this struct so exp() is evaluated once per integration, not
// once per step.
struct EomTerms {
  double gain;        // kappa - 2 gamma
  double two_photon;  // Gamma
  complexd hop_right; // coefficient of alpha_{j+1}
  complexd hop_left;  // coefficient of alpha_{j-1}
  int n;
  Boundary boundary;

  static EomTerms from(const ModelParams& p);

  // out = d/dt state. Allocation-free; in and out must not alias.
  void rhs(std::span<const complexd> state, std::span<complexd> out) const;

  // Tangent flow: out = D(rhs)|_state [v], the analytic Jacobian-vector
  // product. Allocation-free; v and out must not alias.
  void jvp(std::span<const complexd> state, std::span<const complexd> v,
           std::span<complexd> out) const;
};

// d/dt of the state under the equation of motion.
LatticeState eom_rhs(const ModelParams& params, const LatticeState& state);

// Allocation-free variant; `out` must have size N.
void eom_rhs(const ModelParams& params, std::span<const complexd> state,
             std::span<complexd> out);

// Particle-hole conjugation PH[alpha]_j = e^{i pi j} conj(alpha_j)
// (1-based j). An involution; a symmetry of the flow at theta in {0, pi}.
LatticeState ph_conjugate(const LatticeState& state);

// Global U(1) rotation by phi.
LatticeState u1_rotate(const LatticeState& state, double phi);

// PBC dispersion building blocks: decay rate and energy of momentum q.
inline double pbc_gamma_q(const ModelParams& p, double q) {
  return 2.0 * p.gamma() * (1.0 + std::sin(q + p.theta()));
}
inline double pbc_omega_q(const ModelParams& p, double q) {
  return -2.0 * p.J() * std::cos(q);
}

// Traveling-wave condensate alpha_j = r_q e^{i q j} at t = 0 with
// r_q = sqrt((kappa - gamma_q) / Gamma); the (virtual) site j = 0
// carries phase 0. Requires kappa > gamma_q, else throws DomainError.
LatticeState traveling_wave_state(const ModelParams& params, double q);

} // namespace nrc
