#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "nrc/model.hpp"

// Linear stability of the PBC traveling-wave condensates. A momentum-q
// wave couples fluctuation pairs (delta alpha_k, conj(delta alpha_{2q-k}))
// through the 2x2 dynamical matrix
//
//   [ beta_k    -Lambda          ]      beta_k = kappa - gamma_k
//   [ -Lambda    conj(beta_{2q-k}) ],            - 2 Gamma r_q^2
//                                                - i (omega_k - omega_q),
//   Lambda = Gamma r_q^2,
//
// and the wave is stable iff the largest real part over all k (excluding
// the exact Goldstone zero at k = q) is negative. Eigenvalues are taken
// from the matrix via trace/determinant, not from a printed closed form.

namespace nrc {

// Marginal modes within this band (units of J) count as stable; the
// Goldstone zero contaminates its grid neighbors at finite N.
inline constexpr double kStabilityTol = 1e-9;

struct WaveStability {
  double kappa = 0.0;
  double q = 0.0;
  bool exists = false;
  bool stable = false;
  double max_growth = 0.0; // max over k of Re lambda_{k,+}, Goldstone excluded
  double worst_k = 0.0;
  double goldstone = 0.0;  // the k = q eigenvalue that is excluded
  double r_q = 0.0;
  double omega_q = 0.0;
  double gamma_q = 0.0;
};

// Fluctuation matrix for grid momenta q and k (2q - k is taken mod 2 pi).
// Throws DomainError when the wave does not exist (kappa <= gamma_q).
Eigen::Matrix2cd fluctuation_matrix(const ModelParams& params, double q,
                                    double k);

// Evaluates the fluctuation spectrum over the N-point momentum grid.
WaveStability wave_stable(const ModelParams& params, double q);

// Row-major table over (kappa, q(m)) cells of the stability verdicts,
// with the gamma_q / omega_q / r_q overlays filled in per cell.
std::vector<WaveStability> stability_diagram(const ModelParams& params_base,
                                             std::span<const double> kappa_grid,
                                             std::span<const int> m_grid);

} // namespace nrc
