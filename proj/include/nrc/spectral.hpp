#pragma once

#include <Eigen/Dense>
#include <vector>

#include "nrc/model.hpp"

// Spectra of the linear (Gamma = 0) problem. The single-particle
// Hatano-Nelson Hamiltonian is tridiagonal with diagonal
// Delta = i(kappa - 2 gamma) and hoppings J+/J- (see model.hpp); under
// open boundaries its spectrum has the closed form
//
//   lambda_m = Delta + 2 e^{-i delta/2} J- sqrt|J+/J-| cos(q_m),
//   q_m = pi m / (N + 1),  m = 1..N,
//
// with delta = arg(J-/J+), and eigenvectors psi_j ~ r^j e^{i delta j/2}
// sin(q_m j), r = sqrt|J-/J+| (site index j is 1-based). Note the main
// dispersion convention here carries cos(q_m) with the sign produced by
// this derivation; the eigenvalue *set* is invariant under
// q_m -> pi - q_m, so orderings that flip the sign describe the same
// spectrum.

namespace nrc {

struct DispersionPoint {
  double q;       // momentum in [0, 2 pi)
  double gamma_q; // decay rate 2 gamma (1 + sin(q + theta))
  double omega_q; // energy -2 J cos q
};

// PBC dispersion at grid momentum q = 2 pi m / N, 0 <= m < N.
DispersionPoint pbc_dispersion(const ModelParams& params, int m);

// Dense N x N Hatano-Nelson matrix (tridiagonal, plus corner entries for
// periodic boundaries).
Eigen::MatrixXcd hatano_nelson_matrix(const ModelParams& params);

enum class EpRegime { UnderEP, AtEP, OverEP }; // gamma <, =, > J

struct ObcSpectrum {
  std::vector<complexd> eigenvalues; // sorted by Re, ties by Im
  std::vector<int> mode_index;       // m of q_m for each sorted eigenvalue
  Eigen::MatrixXcd eigenvectors;     // column per eigenvalue; empty unless requested
  EpRegime regime = EpRegime::UnderEP;
  double localization_ratio = 1.0;   // r = sqrt|J-/J+|
  bool defective = false;            // J+ J- = 0: N-fold degenerate at Delta
};

// Closed-form OBC spectrum. Valid for any theta with J+ J- != 0; when
// |J+ J-| vanishes (maximal asymmetry) the matrix is triangular and the
// spectrum is the N-fold degenerate Delta, returned with defective=true
// and no eigenvectors.
ObcSpectrum obc_spectrum_analytic(const ModelParams& params,
                                  bool want_eigenvectors = false);

// Dense numerical route for the OBC spectrum, used to cross-validate the
// closed form. The matrix is first balanced by the exact gauge
// D = diag(s^j), s = sqrt|J-/J+| (a similarity, so the spectrum is
// unchanged), which removes the exponential eigenvector conditioning of
// the skin effect; the raw matrix is numerically undiagonalizable in
// double precision beyond N of a few dozen.
std::vector<complexd> obc_spectrum_dense(const ModelParams& params);

// Pump value at which the vacuum loses linear stability for the given
// boundary condition at the given finite N. Open boundaries with
// theta in {0, pi} use the closed form; other angles bisect on the
// largest imaginary part of the analytic spectrum. Periodic boundaries
// use the minimum of gamma_q over the N-point momentum grid.
double vacuum_threshold(const ModelParams& params);

// Same threshold in the N -> infinity limit: 2 gamma for gamma <= J,
// 2 gamma - 2 sqrt(gamma^2 - J^2) for gamma > J (open boundaries);
// 0 for periodic boundaries.
double vacuum_threshold_bulk(const ModelParams& params);

} // namespace nrc
