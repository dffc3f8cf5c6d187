#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nrc/dynamics.hpp"
#include "nrc/model.hpp"

// Lyapunov characteristic exponents by the tangent-space stretching
// method: k tangent vectors co-evolve with the state under the analytic
// Jacobian-vector product (same RK4 stepping as the base flow) and are
// re-orthonormalized at a fixed interval by modified Gram-Schmidt; the
// exponents are time-averaged log stretch factors.

namespace nrc {

struct LyapunovConfig {
  double dt = 0.02;            // tangent/base RK4 step
  double renorm_interval = 1.0; // time between orthonormalizations
  double t_total = 2e4;
  std::uint64_t seed = 0; // tangent-vector initialization

  void validate() const;
};

struct LyapunovResult {
  std::vector<double> exponents; // descending; trailing-half averages
  std::vector<std::vector<double>> history; // running estimate per epoch
  std::vector<double> drift;     // |3rd-quarter avg - 4th-quarter avg|
  double renorm_interval = 0.0;
  double t_total = 0.0;
  // Final orthonormal tangent basis (real 2N coords, one column per
  // exponent) and the state it is attached to; used for zero-mode
  // tangency diagnostics.
  std::vector<std::vector<double>> final_basis;
  LatticeState final_state;
};

// `initial` must already be on the attractor (post-transient).
LyapunovResult lyapunov_spectrum(const ModelParams& params,
                                 const LatticeState& initial, int k,
                                 const LyapunovConfig& config);

enum class DynamicsClassKind {
  FixedPoint,
  Periodic,
  Quasiperiodic,
  Chaotic,
  Hyperchaotic
};

const char* to_string(DynamicsClassKind k);

struct DynamicsClass {
  DynamicsClassKind kind = DynamicsClassKind::FixedPoint;
  int zero_count = 0;
  int positive_count = 0;
  bool conclusive = true;
  std::string diagnostics;
};

// Counts exponents in (-zero_tol, zero_tol) as zero and above +zero_tol
// as positive; combines with the attractor kind (FixedPoint bypasses the
// exponents). Non-converged exponents (drift >= zero_tol/2) yield an
// inconclusive result.
DynamicsClass classify_dynamics(const LyapunovResult& lces,
                                const AttractorRecord& attractor,
                                double zero_tol = 1e-3);

// Period from the autocorrelation of the gauge-invariant observables
// {r_j^2, bond phase differences} on `site_subset`: first peak above
// 0.99 normalized correlation, refined by quadratic interpolation.
// Returns nullopt for effectively constant observables or when no such
// peak exists within the window.
std::optional<double> detect_period(const Trajectory& traj,
                                    std::span<const int> site_subset);

// min over a global phase of max over sampled t of
// ||alpha(t) - e^{i phi} PH[alpha(t + T/2)]||_inf / max |alpha|; the
// phase is fitted by least squares on the inner product. The half-period
// point is cubic-interpolated between samples.
double ph_restoration_residual(const Trajectory& traj, double T);

// Pairs (x(t), x(t + delay)) for all valid t; delay must be an integer
// multiple of dt_sample.
std::vector<std::pair<double, double>> delay_embed(
    std::span<const double> series, double delay, double dt_sample);

} // namespace nrc
