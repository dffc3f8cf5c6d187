#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "nrc/dynamics.hpp"
#include "nrc/model.hpp"

// Fixed-point analysis of the open chain: the real 2N x 2N Jacobian of
// the flow, static-condensate solving (relaxation + gauge-fixed damped
// Newton), kink diagnostics, trajectory order parameters, and the
// critical-exceptional-point scans.
//
// Real coordinates are ordered block-wise: x = (Re alpha_1..Re alpha_N,
// Im alpha_1..Im alpha_N).

namespace nrc {

struct JacobianMatrix {
  Eigen::MatrixXd matrix; // 2N x 2N acting on (Re, Im) blocks
  LatticeState base;
};

// Analytic differentiation of the equation of motion at `state`; at the
// vacuum this is the real form of the linear Hatano-Nelson flow.
JacobianMatrix jacobian(const ModelParams& params, const LatticeState& state);

Eigen::VectorXd state_to_real(const LatticeState& state);
LatticeState state_from_real(const Eigen::VectorXd& x, double time = 0.0);

// Tangent of the U(1) orbit at `state` (direction of i * alpha),
// normalized. Zero state yields a zero vector.
Eigen::VectorXd u1_direction(const LatticeState& state);

// Spectral data of a fixed-point Jacobian with the Goldstone zero mode
// identified and removed.
struct FixedPointSpectrum {
  std::vector<complexd> eigenvalues; // sorted by Re desc, ties Im desc
  double abscissa_excluding_goldstone;
  double goldstone_abs;   // |eigenvalue| of the removed mode
  double goldstone_angle; // angle between its eigenvector and i*alpha
};
FixedPointSpectrum fixed_point_spectrum(const JacobianMatrix& jac);

// Solves eom_rhs = 0 by long relaxation followed by a damped Newton
// polish with the global phase pinned (steps orthogonal to the U(1)
// orbit); returns the fixed point with ||eom_rhs||_inf < 1e-11.
// Throws NumericalError("no static condensate found") when the polish
// fails or the solution collapses to vacuum.
LatticeState static_condensate(const ModelParams& params);

// Newton-only variant used for continuation in kappa/gamma.
LatticeState static_condensate(const ModelParams& params,
                               const LatticeState& guess);

struct KinkPosition {
  double position; // site coordinate (1-based), or sentinel 0 / N
  bool crossed;    // false when fully saturated (0) or vacuum-like (N)
};

// Site coordinate where the amplitude profile first crosses
// sqrt(kappa/Gamma)/2 scanning from the left, linearly interpolated.
KinkPosition kink_position(const LatticeState& state,
                           const ModelParams& params);

struct KinkFitReport {
  double kappa_crit;  // threshold used on the horizontal axis (bulk value)
  double exponent;    // log-log slope of position vs (kappa - kappa_crit)
  double fit_lo, fit_hi; // fitted range of kappa - kappa_crit
  double residual;    // rms residual of the log-log fit
  std::vector<double> kappas, positions, heights;
};

// Tracks the static condensate over `kappas` (continuation from the
// largest value down) and fits position ~ (kappa - kappa_crit)^beta.
KinkFitReport fit_kink_scaling(const ModelParams& params_base,
                               std::span<const double> kappas);

struct OrderParameters {
  double mean_amplitude = 0.0;     // <r_j> over the bulk window
  double mean_frequency = 0.0;     // <omega>_j over the bulk window
  double mean_frequency_all = 0.0; // same, averaged over every site
  double mean_wavevector = 0.0;    // <q> from bond phase differences
  double mean_density_rate = 0.0;  // <|d/dt r^2|>_{j,t} over all sites
  std::vector<double> edge_density_rate_profile; // <|d/dt r_j^2|>_t per site
};

// Extracts order parameters from a sampled trajectory. Frequencies come
// from time-unwrapped phase winding (omega = -d(arg alpha)/dt, so a wave
// e^{i(qj - omega t)} reports +omega); wavevectors from time-averaged
// unwrapped nearest-neighbor phase differences. Site averages run over
// the half-open window [bulk_lo, bulk_hi) of 0-based storage indices.
OrderParameters order_parameters(const Trajectory& traj, int bulk_lo,
                                 int bulk_hi);

// Defaults to the central 50% of sites.
OrderParameters order_parameters(const Trajectory& traj, int n_sites);

struct CepScanRow {
  double kappa = 0.0;
  double lambda2 = 0.0; // Re of the second-largest-real-part eigenvalue
  double theta12 = 0.0; // principal angle between the two leading eigenvectors
  bool valid = false;
};

// For each kappa (approached from the static side): static condensate,
// Jacobian spectrum, lambda2 and the angle between the two leading
// eigenvectors. Rows keep the order of `kappa_grid`; failed solves are
// marked invalid instead of aborting the scan.
std::vector<CepScanRow> cep_scan(const ModelParams& params,
                                 std::span<const double> kappa_grid);

struct StaticBoundaryRow {
  double gamma = 0.0;
  double kappa = 0.0; // critical kappa of the static-state instability
  bool found = false;
};

// Bisection (tolerance 1e-4 in kappa) on the largest non-Goldstone real
// part of the static-condensate Jacobian, per gamma, probing downward
// from kappa_hi by continuation.
std::vector<StaticBoundaryRow> static_stability_boundary(
    const ModelParams& params_base, std::span<const double> gamma_grid,
    double kappa_lo, double kappa_hi);

} // namespace nrc
