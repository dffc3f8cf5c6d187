#include <doctest.h>

#include "nrc/chaos.hpp"
#include "nrc/obc_analysis.hpp"

using namespace nrc;

TEST_CASE("Benettin exponents at a fixed point match the Jacobian spectrum") {
  const int N = 20;
  const ModelParams p(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  const LatticeState s = static_condensate(p);

  LyapunovConfig cfg;
  cfg.dt = 0.02;
  cfg.renorm_interval = 1.0;
  cfg.t_total = 3000.0;
  const int k = 4;
  const LyapunovResult lces = lyapunov_spectrum(p, s, k, cfg);

  // Leading real parts of the fixed-point Jacobian, with multiplicity.
  const FixedPointSpectrum fps = fixed_point_spectrum(jacobian(p, s));
  std::vector<double> re;
  for (const complexd& e : fps.eigenvalues) re.push_back(e.real());
  std::sort(re.begin(), re.end(), std::greater<>());
  for (int j = 0; j < k; ++j)
    CHECK(std::abs(lces.exponents[j] - re[j]) < 1e-3);
  CHECK(std::abs(lces.exponents[0]) < 1e-3); // Goldstone zero
  for (int j = 1; j < k; ++j) CHECK(lces.exponents[j] < 0.0);
}

TEST_CASE("exponent sum equals the average Jacobian trace") {
  // Full spectrum (k = 2N) on a small periodic chain sitting on a
  // traveling-wave attractor; Liouville's identity fixes the sum.
  const int N = 8;
  const ModelParams p(1.0, 0.5, 2.0, 1.0, kPi, N, Boundary::Periodic);
  const LatticeState w = traveling_wave_state(p, kPi / 2.0);

  LyapunovConfig cfg;
  cfg.dt = 0.02;
  cfg.t_total = 2000.0;
  const LyapunovResult lces = lyapunov_spectrum(p, w, 2 * N, cfg);

  double sum = 0.0;
  for (double e : lces.exponents) sum += e;
  // On the wave |alpha_j| = r_q is constant, so the trace is constant:
  // sum_j 2 (kappa - 2 gamma - 2 Gamma r_q^2).
  const double rq2 = (p.kappa() - pbc_gamma_q(p, kPi / 2.0)) / p.Gamma();
  const double trace = 2.0 * N * (p.kappa() - 2.0 * p.gamma() - 2.0 * rq2);
  CHECK(sum == doctest::Approx(trace).epsilon(0.01));
}

TEST_CASE("classification rules and invariants") {
  AttractorRecord fp;
  fp.kind = AttractorKind::FixedPoint;
  LyapunovResult none;
  CHECK(classify_dynamics(none, fp).kind == DynamicsClassKind::FixedPoint);

  AttractorRecord td;
  td.kind = AttractorKind::TimeDependent;
  auto mk = [](std::vector<double> ex) {
    LyapunovResult r;
    r.exponents = std::move(ex);
    r.drift.assign(r.exponents.size(), 1e-5);
    return r;
  };
  const DynamicsClass periodic = classify_dynamics(mk({1e-5, -0.02, -0.1}), td);
  CHECK(periodic.kind == DynamicsClassKind::Periodic);
  CHECK(periodic.zero_count == 1);
  CHECK(periodic.conclusive);

  const DynamicsClass quasi =
      classify_dynamics(mk({2e-5, -1e-5, -0.05}), td);
  CHECK(quasi.kind == DynamicsClassKind::Quasiperiodic);
  CHECK(quasi.zero_count == 2);
  CHECK(quasi.positive_count == 0);

  const DynamicsClass chaotic =
      classify_dynamics(mk({0.05, 1e-5, -0.1}), td);
  CHECK(chaotic.kind == DynamicsClassKind::Chaotic);
  CHECK(chaotic.positive_count == 1);

  const DynamicsClass hyper =
      classify_dynamics(mk({0.05, 0.01, 1e-5}), td);
  CHECK(hyper.kind == DynamicsClassKind::Hyperchaotic);
  CHECK(hyper.positive_count == 2);

  // Non-converged near-zero exponent: inconclusive.
  LyapunovResult bad = mk({1e-5, -0.02});
  bad.drift[0] = 1e-3;
  CHECK_FALSE(classify_dynamics(bad, td).conclusive);
}

namespace {

Trajectory synthetic_breather(int n_sites, double period, double T_total,
                              double dt, double q, double omega) {
  Trajectory traj;
  for (int s = 0;; ++s) {
    const double t = dt * s;
    if (t > T_total) break;
    std::vector<complexd> snap(n_sites);
    for (int i = 0; i < n_sites; ++i) {
      const double r = 1.0 + 0.3 * std::cos(kTwoPi * t / period + 0.2 * i);
      snap[i] = std::polar(r, q * (i + 1) - omega * t);
    }
    traj.times.push_back(t);
    traj.states.push_back(std::move(snap));
  }
  return traj;
}

} // namespace

TEST_CASE("detect_period on synthetic signals") {
  const double T0 = 7.31;
  const Trajectory traj = synthetic_breather(10, T0, 200.0, 0.05, 0.9, 1.3);
  const std::vector<int> sites{0, 3, 7};
  const auto T = detect_period(traj, sites);
  REQUIRE(T.has_value());
  CHECK(*T == doctest::Approx(T0).epsilon(1e-3));

  // A plane wave has featureless gauge invariants: no period.
  Trajectory wave;
  for (int s = 0; s <= 4000; ++s) {
    const double t = 0.05 * s;
    std::vector<complexd> snap(10);
    for (int i = 0; i < 10; ++i) snap[i] = std::polar(0.7, 0.9 * i - 1.1 * t);
    wave.times.push_back(t);
    wave.states.push_back(std::move(snap));
  }
  CHECK_FALSE(detect_period(wave, sites).has_value());
}

TEST_CASE("detect_period rejects windows shorter than 10 periods") {
  const Trajectory traj = synthetic_breather(6, 7.0, 45.0, 0.05, 0.9, 1.3);
  const std::vector<int> sites{0, 3};
  CHECK_THROWS_AS(detect_period(traj, sites), NumericalError);
}

TEST_CASE("ph_restoration_residual: static state is PH-clean, Phase-I-like "
          "wave is not") {
  const int N = 30;
  const ModelParams p(1.0, 2.0, 1.0, 1.0, kPi, N, Boundary::Open);
  const LatticeState s = static_condensate(p);
  Trajectory still;
  for (int k = 0; k <= 400; ++k) {
    still.times.push_back(0.05 * k);
    still.states.push_back(s.amplitudes);
  }
  CHECK(ph_restoration_residual(still, 7.7) < 1e-6);

  // A rotating wave at q != pi/2: PH maps it to the counter-rotating
  // partner, a different solution, so the residual is O(1).
  Trajectory rot;
  const double q = kPi / 2.0 + 0.3, omega = 0.6;
  for (int k = 0; k <= 400; ++k) {
    const double t = 0.05 * k;
    std::vector<complexd> snap(N);
    for (int i = 0; i < N; ++i) snap[i] = std::polar(1.0, q * (i + 1) - omega * t);
    rot.times.push_back(t);
    rot.states.push_back(std::move(snap));
  }
  CHECK(ph_restoration_residual(rot, kTwoPi / omega) > 0.1);
}

TEST_CASE("delay_embed basics") {
  // Constant series: all pairs collapse onto the diagonal point.
  std::vector<double> c(100, 1.5);
  for (auto [x, y] : delay_embed(c, 0.5, 0.1)) {
    CHECK(x == 1.5);
    CHECK(y == 1.5);
  }

  // Sine with delay P/4: a circle.
  const double P = 4.0, dt = P / 1024.0;
  std::vector<double> s(4096);
  for (std::size_t i = 0; i < s.size(); ++i)
    s[i] = std::sin(kTwoPi * dt * static_cast<double>(i) / P);
  const auto pairs = delay_embed(s, P / 4.0, dt);
  for (auto [x, y] : pairs)
    CHECK(std::abs(std::sqrt(x * x + y * y) - 1.0) < 1e-9);

  std::vector<double> tiny(3, 0.0);
  CHECK_THROWS_AS(delay_embed(tiny, 1.0, 0.1), ContractViolation);
  CHECK_THROWS_AS(delay_embed(s, 0.33 * dt, dt), ContractViolation);
}
