#include <doctest.h>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "nrc/dynamics.hpp"
#include "nrc/spectral.hpp"

using namespace nrc;

namespace {

// Independent oracle for the Gamma = 0 linear problem: the state evolves
// as exp(-i H t) applied to the initial condition.
std::vector<complexd> expm_evolve(const ModelParams& p,
                                  const std::vector<complexd>& init,
                                  double t) {
  const Eigen::MatrixXcd H = hatano_nelson_matrix(p);
  const Eigen::MatrixXcd U = (complexd(0.0, -1.0) * t * H).exp();
  Eigen::VectorXcd v(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) v(i) = init[i];
  const Eigen::VectorXcd w = U * v;
  return {w.data(), w.data() + w.size()};
}

double rel_error(const std::vector<complexd>& a,
                 const std::vector<complexd>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

// Gamma must be > 0 by the parameter contract; a vanishingly small value
// makes the flow linear to machine precision over短 horizons.
ModelParams linear_params(int n, double theta, double gamma, double kappa) {
  return {1.0, gamma, kappa, 1e-300, theta, n, Boundary::Open};
}

} // namespace

TEST_CASE("linear regime matches the matrix exponential") {
  const int N = 16;
  const ModelParams p = linear_params(N, kPi / 3.0, 0.3, 0.2);
  const LatticeState init = random_initial(p, 42, 0.1);

  IntegrationConfig cfg;
  cfg.dt = 5e-3;
  cfg.t_transient = 0.0;
  cfg.t_measure = 10.0;
  cfg.sample_stride = 100;
  const Trajectory traj = integrate(p, init, cfg);
  const auto oracle = expm_evolve(p, init.amplitudes, 10.0);
  CHECK(rel_error(traj.terminal_state.amplitudes, oracle) < 1e-6);

  // Same check through the adaptive scheme.
  IntegrationConfig acfg = cfg;
  acfg.scheme = Scheme::RK45Adaptive;
  acfg.abs_tol = 1e-12;
  acfg.rel_tol = 1e-10;
  const Trajectory atraj = integrate(p, init, acfg);
  CHECK(rel_error(atraj.terminal_state.amplitudes, oracle) < 1e-6);
}

TEST_CASE("RK4 global convergence order >= 3.9 on the linear problem") {
  const int N = 10;
  const ModelParams p = linear_params(N, kPi, 0.4, 0.3);
  const LatticeState init = random_initial(p, 7, 0.1);
  const double t_end = 5.0;
  const auto oracle = expm_evolve(p, init.amplitudes, t_end);

  std::vector<double> errs;
  for (double dt : {0.2, 0.1, 0.05, 0.025, 0.0125}) {
    IntegrationConfig cfg;
    cfg.dt = dt;
    cfg.t_transient = 0.0;
    cfg.t_measure = t_end;
    cfg.sample_stride = 1000000;
    const Trajectory traj = integrate(p, init, cfg);
    errs.push_back(rel_error(traj.terminal_state.amplitudes, oracle));
  }
  // Least-squares slope of log(err) vs log(dt).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(errs.size());
  for (std::size_t i = 0; i < errs.size(); ++i) {
    const double x = std::log(0.2 / std::pow(2.0, static_cast<double>(i)));
    const double y = std::log(errs[i]);
    sx += x; sy += y; sxx += x * x; sxy += x * y;
  }
  const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(order >= 3.9);
  CHECK(order <= 4.5);
}

TEST_CASE("vacuum stays vacuum exactly") {
  const ModelParams p(1.0, 0.5, 1.5, 1.0, kPi, 12, Boundary::Open);
  LatticeState vac(12);
  IntegrationConfig cfg;
  cfg.t_transient = 1.0;
  cfg.t_measure = 1.0;
  const Trajectory traj = integrate(p, vac, cfg);
  for (const auto& a : traj.terminal_state.amplitudes)
    CHECK(a == complexd(0.0, 0.0));
}

TEST_CASE("PBC traveling wave keeps constant modulus and rotates") {
  const int N = 40;
  const ModelParams p(1.0, 0.5, 1.0, 1.0, kPi, N, Boundary::Periodic);
  const double q = kTwoPi * 12 / N;
  const LatticeState w = traveling_wave_state(p, q);
  IntegrationConfig cfg;
  cfg.t_transient = 0.0;
  cfg.t_measure = 100.0;
  cfg.sample_stride = 200;
  const Trajectory traj = integrate(p, w, cfg);
  const double r_q = std::abs(w.amplitudes[0]);
  for (const auto& snap : traj.states)
    for (const auto& a : snap)
      CHECK(std::abs(std::abs(a) - r_q) < 1e-8);
  // Terminal state equals the analytic rotating wave.
  const double omega = pbc_omega_q(p, q);
  const complexd rot = std::polar(1.0, -omega * 100.0);
  double worst = 0.0;
  for (int i = 0; i < N; ++i)
    worst = std::max(worst, std::abs(traj.terminal_state.amplitudes[i] -
                                     rot * w.amplitudes[i]));
  CHECK(worst < 1e-5);
}

TEST_CASE("random_initial: determinism, scaling, vacuum at zero") {
  const ModelParams p(1.0, 0.1, 0.1, 1.0, 0.0, 10000, Boundary::Open);
  const LatticeState a = random_initial(p, 123, 0.3);
  const LatticeState b = random_initial(p, 123, 0.3);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(a.amplitudes[i] == b.amplitudes[i]);
  const LatticeState c = random_initial(p, 124, 0.3);
  CHECK(std::abs(a.amplitudes[0] - c.amplitudes[0]) > 0.0);

  double mean2 = 0.0;
  for (const auto& x : a.amplitudes) mean2 += std::norm(x);
  mean2 /= static_cast<double>(a.size());
  CHECK(mean2 == doctest::Approx(0.09).epsilon(0.05));

  const LatticeState z = random_initial(p, 5, 0.0);
  for (const auto& x : z.amplitudes) CHECK(x == complexd(0.0, 0.0));
}

TEST_CASE("trajectories are deterministic and U(1)/PH covariant") {
  const int N = 14;
  const ModelParams p(1.0, 0.4, 1.3, 1.0, kPi, N, Boundary::Open);
  const LatticeState init = random_initial(p, 9, 0.2);
  IntegrationConfig cfg;
  cfg.t_transient = 0.0;
  cfg.t_measure = 100.0;
  cfg.sample_stride = 500;

  const Trajectory t1 = integrate(p, init, cfg);
  const Trajectory t2 = integrate(p, init, cfg);
  for (std::size_t i = 0; i < t1.terminal_state.size(); ++i)
    CHECK(t1.terminal_state.amplitudes[i] == t2.terminal_state.amplitudes[i]);

  const double phi = 0.77;
  const Trajectory tr = integrate(p, u1_rotate(init, phi), cfg);
  const LatticeState expect_rot = u1_rotate(t1.terminal_state, phi);
  double worst = 0.0;
  for (int i = 0; i < N; ++i)
    worst = std::max(worst, std::abs(tr.terminal_state.amplitudes[i] -
                                     expect_rot.amplitudes[i]));
  CHECK(worst < 1e-9);

  const Trajectory tp = integrate(p, ph_conjugate(init), cfg);
  const LatticeState expect_ph = ph_conjugate(t1.terminal_state);
  worst = 0.0;
  for (int i = 0; i < N; ++i)
    worst = std::max(worst, std::abs(tp.terminal_state.amplitudes[i] -
                                     expect_ph.amplitudes[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("divergence and NaN detection") {
  const ModelParams p(1.0, 0.0, 1.0, 1.0, 0.0, 4, Boundary::Open);
  LatticeState big(4);
  big.amplitudes.assign(4, complexd(5e6, 0.0)); // above 1e6*sqrt(2)
  IntegrationConfig cfg;
  cfg.t_transient = 0.0;
  cfg.t_measure = 1.0;
  CHECK_THROWS_AS(integrate(p, big, cfg), DivergenceError);

  LatticeState bad(4);
  bad.amplitudes[2] = complexd(std::numeric_limits<double>::quiet_NaN(), 0.0);
  CHECK_THROWS_AS(integrate(p, bad, cfg), ContractViolation);
}

TEST_CASE("find_attractor classifies vacuum, static, and dynamic points") {
  IntegrationConfig cfg;
  cfg.t_transient = 400.0;
  cfg.t_measure = 200.0;
  cfg.sample_stride = 10;
  const int N = 40;

  // gamma/J = 2, kappa below threshold (0.536...): vacuum.
  const ModelParams pv(1.0, 2.0, 0.40, 1.0, kPi, N, Boundary::Open);
  const AttractorRecord rv =
      find_attractor(pv, random_initial(pv, 3, 1e-3), cfg);
  CHECK(rv.kind == AttractorKind::FixedPoint);
  CHECK(rv.window.terminal_state.max_abs() < 1e-6);

  // gamma/J = 2, kappa = 1: static condensate with e^{i pi j/2} order.
  const ModelParams ps(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  const AttractorRecord rs =
      find_attractor(ps, random_initial(ps, 4, 1e-2), cfg);
  CHECK(rs.kind == AttractorKind::FixedPoint);
  CHECK(rs.window.terminal_state.max_abs() > 0.5);
  // Bond phase differences in the saturated region equal pi/2.
  const auto& amp = rs.window.terminal_state.amplitudes;
  for (int i = N / 2; i < N - 4; ++i) {
    const double d = std::arg(amp[i + 1] * std::conj(amp[i]));
    CHECK(d == doctest::Approx(kPi / 2.0).epsilon(1e-5));
  }

  // gamma/J = 0.2, kappa = 1.5: time-dependent attractor.
  const ModelParams pd(1.0, 0.2, 1.5, 1.0, kPi, N, Boundary::Open);
  const AttractorRecord rd =
      find_attractor(pd, random_initial(pd, 5, 1e-2), cfg);
  CHECK(rd.kind == AttractorKind::TimeDependent);
}
