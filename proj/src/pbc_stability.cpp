#include "nrc/pbc_stability.hpp"

#include <cmath>
#include <sstream>

namespace nrc {

namespace {

complexd beta_k(const ModelParams& p, double k, double omega_q, double lam2) {
  // lam2 = 2 Gamma r_q^2
  return complexd(p.kappa() - pbc_gamma_q(p, k) - lam2,
                  -(pbc_omega_q(p, k) - omega_q));
}

} // namespace

Eigen::Matrix2cd fluctuation_matrix(const ModelParams& params, double q,
                                    double k) {
  const double gq = pbc_gamma_q(params, q);
  if (!(params.kappa() > gq)) {
    std::ostringstream msg;
    msg << "fluctuation_matrix: wave q=" << q
        << " does not exist (kappa <= gamma_q)";
    throw DomainError(msg.str());
  }
  const double rq2 = (params.kappa() - gq) / params.Gamma();
  const double lambda = params.Gamma() * rq2;
  const double omega_q = pbc_omega_q(params, q);
  const double k_mirror = 2.0 * q - k; // trig functions take care of mod 2 pi
  Eigen::Matrix2cd m;
  m(0, 0) = beta_k(params, k, omega_q, 2.0 * lambda);
  m(0, 1) = complexd(-lambda, 0.0);
  m(1, 0) = complexd(-lambda, 0.0);
  m(1, 1) = std::conj(beta_k(params, k_mirror, omega_q, 2.0 * lambda));
  return m;
}

WaveStability wave_stable(const ModelParams& params, double q) {
  const int N = params.n_sites();
  // Snap onto the grid so the Goldstone mode at k = q is hit exactly even
  // if the caller built q through a different arithmetic route.
  const double grid_step = kTwoPi / static_cast<double>(N);
  const long mq = std::lround(q / grid_step);
  if (std::abs(q - static_cast<double>(mq) * grid_step) < 1e-9)
    q = kTwoPi * static_cast<double>(((mq % N) + N) % N) /
        static_cast<double>(N);

  WaveStability ws;
  ws.kappa = params.kappa();
  ws.q = q;
  ws.gamma_q = pbc_gamma_q(params, q);
  ws.omega_q = pbc_omega_q(params, q);
  ws.exists = params.kappa() > ws.gamma_q;
  if (!ws.exists) return ws;
  ws.r_q = std::sqrt((params.kappa() - ws.gamma_q) / params.Gamma());

  double max_growth = -std::numeric_limits<double>::infinity();
  double worst_k = 0.0;
  for (int m = 0; m < N; ++m) {
    const double k = kTwoPi * static_cast<double>(m) / static_cast<double>(N);
    const Eigen::Matrix2cd M = fluctuation_matrix(params, q, k);
    // Eigenvalues from trace/determinant: tr/2 +- sqrt((tr/2)^2 - det).
    const complexd half_tr = 0.5 * (M(0, 0) + M(1, 1));
    const complexd rad = std::sqrt(half_tr * half_tr -
                                   (M(0, 0) * M(1, 1) - M(0, 1) * M(1, 0)));
    const complexd lp = half_tr + rad;
    const complexd lm = half_tr - rad;
    double grow = std::max(lp.real(), lm.real());
    if (k == q) {
      // The Goldstone eigenvalue (exactly 0 here) is excluded; keep the
      // companion -2 Lambda branch.
      ws.goldstone = grow;
      grow = std::min(lp.real(), lm.real());
    }
    if (grow > max_growth) {
      max_growth = grow;
      worst_k = k;
    }
  }
  ws.max_growth = max_growth;
  ws.worst_k = worst_k;
  ws.stable = max_growth < kStabilityTol * params.J();
  return ws;
}

std::vector<WaveStability> stability_diagram(const ModelParams& params_base,
                                             std::span<const double> kappa_grid,
                                             std::span<const int> m_grid) {
  if (kappa_grid.empty() || m_grid.empty())
    throw ContractViolation("stability_diagram: grids must be nonempty");
  std::vector<WaveStability> table;
  table.reserve(kappa_grid.size() * m_grid.size());
  const int N = params_base.n_sites();
  for (double kappa : kappa_grid) {
    const ModelParams p = params_base.with_kappa(kappa);
    for (int m : m_grid) {
      if (m < 0 || m >= N)
        throw ContractViolation("stability_diagram: m out of range");
      const double q = kTwoPi * static_cast<double>(m) / static_cast<double>(N);
      table.push_back(wave_stable(p, q));
    }
  }
  return table;
}

} // namespace nrc
