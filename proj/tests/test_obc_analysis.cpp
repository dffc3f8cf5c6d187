#include <doctest.h>

#include <random>

#include "nrc/obc_analysis.hpp"
#include "nrc/spectral.hpp"

using namespace nrc;

namespace {

LatticeState random_state(int n, std::mt19937& gen, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  LatticeState s(static_cast<std::size_t>(n));
  for (auto& a : s.amplitudes) a = {dist(gen), dist(gen)};
  return s;
}

// Finite-difference oracle for the real-form Jacobian.
Eigen::MatrixXd jacobian_fd(const ModelParams& p, const LatticeState& state,
                            double h = 1e-6) {
  const int N = p.n_sites();
  Eigen::MatrixXd J(2 * N, 2 * N);
  const Eigen::VectorXd x0 = state_to_real(state);
  for (int c = 0; c < 2 * N; ++c) {
    Eigen::VectorXd xp = x0, xm = x0;
    xp(c) += h;
    xm(c) -= h;
    const LatticeState dp = eom_rhs(p, state_from_real(xp));
    const LatticeState dm = eom_rhs(p, state_from_real(xm));
    for (int i = 0; i < N; ++i) {
      J(i, c) = (dp.amplitudes[i].real() - dm.amplitudes[i].real()) / (2 * h);
      J(N + i, c) =
          (dp.amplitudes[i].imag() - dm.amplitudes[i].imag()) / (2 * h);
    }
  }
  return J;
}

} // namespace

TEST_CASE("jacobian matches finite differences on random states") {
  std::mt19937 gen(31);
  for (Boundary bc : {Boundary::Open, Boundary::Periodic}) {
    const ModelParams p(1.0, 0.4, 1.2, 0.8, 2.3, 7, bc);
    for (int rep = 0; rep < 25; ++rep) {
      const LatticeState s = random_state(7, gen);
      const JacobianMatrix jac = jacobian(p, s);
      const Eigen::MatrixXd fd = jacobian_fd(p, s);
      CHECK((jac.matrix - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("vacuum Jacobian doubles the Hatano-Nelson spectrum") {
  const int N = 20;
  const ModelParams p(1.0, 2.0, 0.3, 1.0, kPi, N, Boundary::Open);
  const JacobianMatrix jac = jacobian(p, LatticeState(N));
  Eigen::EigenSolver<Eigen::MatrixXd> es(jac.matrix);
  REQUIRE(es.info() == Eigen::Success);

  // Expected: {-i E, conj(-i E)} over the analytic spectrum.
  std::vector<complexd> expected;
  for (const complexd& e : obc_spectrum_analytic(p).eigenvalues) {
    const complexd m = complexd(0.0, -1.0) * e;
    expected.push_back(m);
    expected.push_back(std::conj(m));
  }
  std::vector<bool> used(expected.size(), false);
  double worst = 0.0;
  for (int i = 0; i < 2 * N; ++i) {
    const complexd ev = es.eigenvalues()(i);
    double best = 1e300;
    std::size_t bj = 0;
    for (std::size_t j = 0; j < expected.size(); ++j) {
      if (used[j]) continue;
      if (std::abs(ev - expected[j]) < best) {
        best = std::abs(ev - expected[j]);
        bj = j;
      }
    }
    used[bj] = true;
    worst = std::max(worst, best);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("static condensate: order, PH symmetry, kink height, Goldstone") {
  const int N = 60;
  const ModelParams p(1.0, 2.0, 1.1, 1.0, kPi, N, Boundary::Open);
  const LatticeState s = static_condensate(p);

  // Residual at the fixed point.
  const LatticeState d = eom_rhs(p, s);
  double res = 0.0;
  for (const auto& v : d.amplitudes) res = std::max(res, std::abs(v));
  CHECK(res < 1e-11);

  // Saturated-region phase order e^{i pi j / 2}.
  for (int i = N / 2; i < N - 5; ++i)
    CHECK(std::arg(s.amplitudes[i + 1] * std::conj(s.amplitudes[i])) ==
          doctest::Approx(kPi / 2.0).epsilon(1e-6));

  // PH symmetry up to a global phase.
  const LatticeState c = ph_conjugate(s);
  complexd overlap = 0.0;
  double norm2 = 0.0;
  for (int i = 0; i < N; ++i) {
    overlap += std::conj(c.amplitudes[i]) * s.amplitudes[i];
    norm2 += std::norm(s.amplitudes[i]);
  }
  const complexd phase = overlap / std::abs(overlap);
  double worst = 0.0;
  for (int i = 0; i < N; ++i)
    worst = std::max(worst,
                     std::abs(s.amplitudes[i] - phase * c.amplitudes[i]));
  CHECK(worst / std::sqrt(norm2 / N) < 1e-8);

  // Kink height within 1% of sqrt(kappa/Gamma) (kappa >= 2 kappa_crit here).
  CHECK(s.max_abs() ==
        doctest::Approx(std::sqrt(p.kappa())).epsilon(0.01));

  // Goldstone mode: zero eigenvalue tangent to the U(1) orbit.
  const FixedPointSpectrum fps = fixed_point_spectrum(jacobian(p, s));
  CHECK(fps.goldstone_abs < 1e-8);
  CHECK(fps.goldstone_angle < 1e-4);
  CHECK(fps.abscissa_excluding_goldstone < 0.0);
}

TEST_CASE("static_condensate reports failure away from the static region") {
  // gamma/J = 0.2, kappa = 1.5 is deep in the dynamical phase.
  const ModelParams p(1.0, 0.2, 1.5, 1.0, kPi, 30, Boundary::Open);
  CHECK_THROWS_AS(static_condensate(p), NumericalError);
}

TEST_CASE("kink position: edges and interpolation") {
  const int N = 50;
  const ModelParams p(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  LatticeState s(N);

  // Synthetic sharp profile crossing between sites 20 and 21 (1-based).
  const double h = std::sqrt(p.kappa() / p.Gamma());
  for (int i = 0; i < N; ++i)
    s.amplitudes[i] = (i + 1 <= 20) ? complexd(0.25 * h, 0.0)
                                    : complexd(0.75 * h, 0.0);
  const KinkPosition kp = kink_position(s, p);
  CHECK(kp.crossed);
  CHECK(kp.position == doctest::Approx(20.5));

  // Vacuum: sentinel N; saturated: sentinel 0.
  LatticeState vac(N);
  CHECK_FALSE(kink_position(vac, p).crossed);
  CHECK(kink_position(vac, p).position == doctest::Approx(N));
  LatticeState sat(N);
  for (auto& a : sat.amplitudes) a = complexd(h, 0.0);
  CHECK_FALSE(kink_position(sat, p).crossed);
  CHECK(kink_position(sat, p).position == doctest::Approx(0.0));
}

TEST_CASE("kink moves right-to-left and scaling exponent is near -0.5") {
  const int N = 120;
  const ModelParams base(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  const double kc = vacuum_threshold_bulk(base);

  // The report stores kappas in descending order, so positions increase
  // along it: the kink sweeps from the right edge toward the left as
  // kappa grows.
  std::vector<double> kappas;
  for (double d : {4e-3, 8e-3, 1.6e-2, 3.2e-2, 6.4e-2}) kappas.push_back(kc + d);
  const KinkFitReport rep = fit_kink_scaling(base, kappas);
  for (std::size_t i = 1; i < rep.positions.size(); ++i)
    CHECK(rep.positions[i] > rep.positions[i - 1]);
  CHECK(rep.positions.back() > N / 3.0); // toward the right edge near threshold
  CHECK(rep.positions.front() < N / 4.0);
  CHECK(rep.exponent == doctest::Approx(-0.5).epsilon(0.2));
  CHECK(rep.kappa_crit == doctest::Approx(kc));
}

TEST_CASE("order parameter closure on a synthetic plane wave") {
  const int N = 32;
  const double r = 0.8, q = 0.9, omega = -1.3;
  Trajectory traj;
  const double dt = 0.05;
  for (int s = 0; s <= 200; ++s) {
    const double t = dt * s;
    std::vector<complexd> snap(N);
    for (int i = 0; i < N; ++i)
      snap[i] = std::polar(r, q * (i + 1) - omega * t);
    traj.times.push_back(t);
    traj.states.push_back(std::move(snap));
  }
  const OrderParameters op = order_parameters(traj, N);
  CHECK(std::abs(op.mean_amplitude - r) < 1e-10);
  CHECK(std::abs(op.mean_frequency - omega) < 1e-10);
  CHECK(std::abs(op.mean_frequency_all - omega) < 1e-10);
  CHECK(std::abs(op.mean_wavevector - q) < 1e-10);
  CHECK(op.mean_density_rate < 1e-10);
}

TEST_CASE("order parameters of a static condensate are static") {
  const int N = 40;
  const ModelParams p(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  const LatticeState s = static_condensate(p);
  IntegrationConfig cfg;
  cfg.t_transient = 0.0;
  cfg.t_measure = 50.0;
  cfg.sample_stride = 10;
  const Trajectory traj = integrate(p, s, cfg);
  const OrderParameters op = order_parameters(traj, N);
  CHECK(std::abs(op.mean_frequency) < 1e-7);
  CHECK(op.mean_density_rate < 1e-7);
  CHECK(op.mean_wavevector == doctest::Approx(kPi / 2.0).epsilon(1e-3));
}

TEST_CASE("order_parameters validates the window") {
  Trajectory traj;
  traj.times = {0.0};
  traj.states = {std::vector<complexd>(8, complexd(1.0, 0.0))};
  CHECK_THROWS_AS(order_parameters(traj, 2, 6), ContractViolation);
  traj.times.push_back(1.0);
  traj.states.push_back(traj.states.front());
  CHECK_THROWS_AS(order_parameters(traj, 5, 3), ContractViolation);
  CHECK_THROWS_AS(order_parameters(traj, 0, 9), ContractViolation);
}

TEST_CASE("cep_scan far inside the static phase") {
  const int N = 40;
  const ModelParams p(1.0, 0.2, 0.0, 1.0, kPi, N, Boundary::Open);
  const std::vector<double> grid{2.9, 2.8, 2.7};
  const auto rows = cep_scan(p, grid);
  REQUIRE(rows.size() == 3);
  for (const auto& row : rows) {
    CHECK(row.valid);
    CHECK(row.lambda2 < 0.0);
    CHECK(row.theta12 > 0.0);
  }
  // Rows keep the input order.
  CHECK(rows[0].kappa == doctest::Approx(2.9));
  CHECK(rows[2].kappa == doctest::Approx(2.7));
}

TEST_CASE("static stability boundary exists at gamma=0.2, absent at gamma=2") {
  const int N = 40;
  const ModelParams base(1.0, 0.2, 1.0, 1.0, kPi, N, Boundary::Open);
  const std::vector<double> g02{0.2};
  const auto rows = static_stability_boundary(base, g02, 1.5, 3.0);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].found);
  CHECK(rows[0].kappa > 1.9);
  CHECK(rows[0].kappa < 2.5);

  const std::vector<double> g2{2.0};
  const auto rows2 = static_stability_boundary(base, g2, 0.7, 3.0);
  REQUIRE(rows2.size() == 1);
  CHECK_FALSE(rows2[0].found);
}
