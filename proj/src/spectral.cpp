#include "nrc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nrc {

DispersionPoint pbc_dispersion(const ModelParams& params, int m) {
  if (m < 0 || m >= params.n_sites()) {
    std::ostringstream msg;
    msg << "pbc_dispersion: m=" << m << " out of range [0, "
        << params.n_sites() << ")";
    throw ContractViolation(msg.str());
  }
  const double q = kTwoPi * static_cast<double>(m) /
                   static_cast<double>(params.n_sites());
  return {q, pbc_gamma_q(params, q), pbc_omega_q(params, q)};
}

Eigen::MatrixXcd hatano_nelson_matrix(const ModelParams& params) {
  const int N = params.n_sites();
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
  const complexd d = params.delta();
  const complexd jp = params.j_plus();
  const complexd jm = params.j_minus();
  for (int i = 0; i < N; ++i) {
    H(i, i) = d;
    if (i + 1 < N) {
      H(i, i + 1) = jp;
      H(i + 1, i) = jm;
    }
  }
  if (params.boundary() == Boundary::Periodic && N > 2) {
    H(N - 1, 0) = jp;
    H(0, N - 1) = jm;
  } else if (params.boundary() == Boundary::Periodic && N == 2) {
    // The two bonds coincide on a 2-ring; both hoppings add.
    H(0, 1) += jp;
    H(1, 0) += jm;
  }
  return H;
}

namespace {

EpRegime classify_regime(const ModelParams& p) {
  // The eigenvector formulas degenerate at the exceptional point, so a
  // narrow band around gamma = J routes to the special case.
  const double band = 1e-9 * p.J();
  if (std::abs(p.gamma() - p.J()) < band) return EpRegime::AtEP;
  return p.gamma() < p.J() ? EpRegime::UnderEP : EpRegime::OverEP;
}

} // namespace

ObcSpectrum obc_spectrum_analytic(const ModelParams& params,
                                  bool want_eigenvectors) {
  if (params.boundary() != Boundary::Open)
    throw ContractViolation("obc_spectrum_analytic requires open boundaries");
  const int N = params.n_sites();
  const complexd jp = params.j_plus();
  const complexd jm = params.j_minus();
  const complexd d = params.delta();

  ObcSpectrum out;
  out.regime = classify_regime(params);

  const double coupling_scale = params.J() + params.gamma();
  if (std::abs(jp) < 1e-12 * coupling_scale ||
      std::abs(jm) < 1e-12 * coupling_scale) {
    // Maximal-asymmetry degenerate case: the matrix is triangular and
    // the spectrum collapses to the N-fold degenerate Delta.
    out.defective = true;
    out.eigenvalues.assign(N, d);
    out.mode_index.resize(N);
    std::iota(out.mode_index.begin(), out.mode_index.end(), 1);
    out.localization_ratio =
        std::abs(jp) < std::abs(jm) ? std::numeric_limits<double>::infinity()
                                    : 0.0;
    return out;
  }

  const complexd ratio = jm / jp;
  const double r = std::sqrt(std::abs(ratio));
  // Pin the branch on the cut: at theta in {0, pi} the ratio is real up
  // to roundoff in e^{i theta}, and a 1e-16 imaginary part must not flip
  // arg between +pi and -pi (the eigenvalue set is invariant under the
  // flip, but the mode labeling m <-> N+1-m is not).
  double delta_arg;
  if (std::abs(ratio.imag()) < 1e-12 * std::abs(ratio))
    delta_arg = ratio.real() < 0.0 ? kPi : 0.0;
  else
    delta_arg = std::arg(ratio);
  out.localization_ratio = r;

  const complexd hop = 2.0 * std::polar(1.0, -0.5 * delta_arg) * jm *
                       std::sqrt(std::abs(jp / jm));

  struct Mode {
    complexd lambda;
    int m;
  };
  std::vector<Mode> modes(N);
  for (int m = 1; m <= N; ++m) {
    const double qm = kPi * static_cast<double>(m) / static_cast<double>(N + 1);
    modes[m - 1] = {d + hop * std::cos(qm), m};
  }
  std::sort(modes.begin(), modes.end(), [](const Mode& a, const Mode& b) {
    if (a.lambda.real() != b.lambda.real())
      return a.lambda.real() < b.lambda.real();
    return a.lambda.imag() < b.lambda.imag();
  });

  out.eigenvalues.resize(N);
  out.mode_index.resize(N);
  for (int i = 0; i < N; ++i) {
    out.eigenvalues[i] = modes[i].lambda;
    out.mode_index[i] = modes[i].m;
  }

  if (want_eigenvectors) {
    out.eigenvectors.resize(N, N);
    const double logr = std::log(r);
    for (int col = 0; col < N; ++col) {
      const int m = out.mode_index[col];
      const double qm =
          kPi * static_cast<double>(m) / static_cast<double>(N + 1);
      // psi_j = r^j e^{i delta j / 2} sin(q_m j), j = 1..N. Build from
      // log-magnitudes shifted by the max so r^N cannot overflow, then
      // normalize to unit max magnitude.
      double max_log = -std::numeric_limits<double>::infinity();
      std::vector<double> lg(N), ph(N), sn(N);
      for (int i = 0; i < N; ++i) {
        const double j = static_cast<double>(i + 1);
        sn[i] = std::sin(qm * j);
        ph[i] = 0.5 * delta_arg * j;
        lg[i] = logr * j + std::log(std::max(std::abs(sn[i]), 1e-300));
        max_log = std::max(max_log, lg[i]);
      }
      for (int i = 0; i < N; ++i) {
        const double mag = std::exp(lg[i] - max_log);
        out.eigenvectors(i, col) =
            std::polar(sn[i] >= 0.0 ? mag : -mag, ph[i]);
      }
    }
  }
  return out;
}

std::vector<complexd> obc_spectrum_dense(const ModelParams& params) {
  if (params.boundary() != Boundary::Open)
    throw ContractViolation("obc_spectrum_dense requires open boundaries");
  const int N = params.n_sites();
  const complexd jp = params.j_plus();
  const complexd jm = params.j_minus();
  const double coupling_scale = params.J() + params.gamma();
  double s = 1.0;
  if (std::abs(jp) > 1e-12 * coupling_scale &&
      std::abs(jm) > 1e-12 * coupling_scale)
    s = std::sqrt(std::abs(jm / jp));
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    H(i, i) = params.delta();
    if (i + 1 < N) {
      H(i, i + 1) = jp * s;
      H(i + 1, i) = jm / s;
    }
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(H, false);
  if (es.info() != Eigen::Success)
    throw NumericalError("obc_spectrum_dense: eigensolver failed");
  std::vector<complexd> ev(es.eigenvalues().data(),
                           es.eigenvalues().data() + N);
  std::sort(ev.begin(), ev.end(), [](complexd a, complexd b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
  return ev;
}

namespace {

double max_imag_eigenvalue(const ModelParams& p) {
  const ObcSpectrum s = obc_spectrum_analytic(p);
  double m = -std::numeric_limits<double>::infinity();
  for (const complexd& e : s.eigenvalues) m = std::max(m, e.imag());
  return m;
}

bool theta_is_ph_symmetric(const ModelParams& p) {
  const double t = p.theta();
  return std::abs(t) < 1e-12 || std::abs(t - kPi) < 1e-12 ||
         std::abs(t - kTwoPi) < 1e-12;
}

} // namespace

double vacuum_threshold(const ModelParams& params) {
  if (params.boundary() == Boundary::Periodic) {
    double gmin = std::numeric_limits<double>::infinity();
    for (int m = 0; m < params.n_sites(); ++m)
      gmin = std::min(gmin, pbc_dispersion(params, m).gamma_q);
    return gmin;
  }
  const double g = params.gamma();
  const double J = params.J();
  if (theta_is_ph_symmetric(params)) {
    if (g <= J) return 2.0 * g;
    // Finite N: the m = 1 mode destabilizes first.
    const double q1 = kPi / static_cast<double>(params.n_sites() + 1);
    return 2.0 * g - 2.0 * std::sqrt(g * g - J * J) * std::cos(q1);
  }
  // Generic theta: bisect on the largest imaginary part of the analytic
  // spectrum, which increases monotonically with kappa.
  double lo = 0.0, hi = 4.0 * g + 4.0 * J + 1.0;
  if (max_imag_eigenvalue(params.with_kappa(lo)) >= 0.0) return 0.0;
  while (max_imag_eigenvalue(params.with_kappa(hi)) < 0.0) hi *= 2.0;
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * (1.0 + hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (max_imag_eigenvalue(params.with_kappa(mid)) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double vacuum_threshold_bulk(const ModelParams& params) {
  if (params.boundary() == Boundary::Periodic) return 0.0;
  const double g = params.gamma();
  const double J = params.J();
  if (theta_is_ph_symmetric(params)) {
    if (g <= J) return 2.0 * g;
    return 2.0 * g - 2.0 * std::sqrt(g * g - J * J);
  }
  // Fall back to a large-N evaluation of the finite-size rule.
  return vacuum_threshold(params.with_n_sites(20000));
}

} // namespace nrc
