#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "nrc/model.hpp"

namespace nrc {

enum class Scheme { RK4, RK45Adaptive };

struct IntegrationConfig {
  double dt = 5e-3;          // RK4 step / initial RK45 step, units 1/J
  double t_transient = 2e3;  // discarded before sampling starts
  double t_measure = 1e3;    // sampled horizon
  int sample_stride = 4;     // snapshot every this many accepted steps
  Scheme scheme = Scheme::RK4;
  double abs_tol = 1e-10; // RK45 only
  double rel_tol = 1e-8;  // RK45 only
  std::uint64_t seed = 0; // initial-condition generation bookkeeping

  void validate() const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<std::vector<complexd>> states; // snapshot per entry of times
  LatticeState terminal_state;
  std::uint64_t steps_taken = 0;

  double sample_dt() const; // spacing of the (uniform) sample grid
};

// Amplitudes above this bound abort integration with DivergenceError.
double divergence_bound(const ModelParams& params);

// Fixed-point detection tolerance, scale-aware.
double fp_tol(const ModelParams& params);

// Advance `initial` through t_transient, then record a snapshot every
// sample_stride accepted steps over t_measure (the initial sample
// included). Deterministic for fixed inputs. Throws DivergenceError /
// NumericalError on overflow / NaN.
Trajectory integrate(const ModelParams& params, const LatticeState& initial,
                     const IntegrationConfig& config);

// i.i.d. complex Gaussian amplitudes with E|alpha_j|^2 = scale^2 from the
// counter-based generator in rng.hpp (site j uses words 2j, 2j+1).
LatticeState random_initial(const ModelParams& params, std::uint64_t seed,
                            double scale);

enum class AttractorKind { FixedPoint, TimeDependent, Diverged };

struct AttractorRecord {
  AttractorKind kind = AttractorKind::TimeDependent;
  Trajectory window;     // measurement window (empty if diverged)
  double residual_rhs = 0.0; // sup over window of ||eom_rhs||_inf
  bool horizon_extended = false;
  std::string diagnostics;
};

// Integrate and classify the long-time behavior. FixedPoint iff the
// sup over the final measurement window of ||eom_rhs||_inf stays below
// fp_tol. Near-marginal decays auto-extend the transient up to 10x.
AttractorRecord find_attractor(const ModelParams& params,
                               const LatticeState& initial,
                               const IntegrationConfig& config);

// --- low-level stepping (shared with the tangent-space integrator) ---

// One classical RK4 step of size h in place; `work` must hold 5 buffers
// of size N (resized on first use).
struct Rk4Workspace {
  std::vector<complexd> k1, k2, k3, k4, tmp;
  void resize(std::size_t n);
};
void rk4_step(const EomTerms& terms, std::vector<complexd>& y, double h,
              Rk4Workspace& work);

} // namespace nrc
