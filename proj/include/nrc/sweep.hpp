#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nrc/chaos.hpp"
#include "nrc/dynamics.hpp"
#include "nrc/model.hpp"
#include "nrc/obc_analysis.hpp"

// Parallel (kappa, gamma) phase-diagram sweeps. Each grid cell integrates
// a deterministic ensemble of initial conditions, classifies the
// attractors, deduplicates them by order-parameter distance, and streams
// to disk as it completes. The final output is independent of thread
// count and scheduling, and interrupted runs resume from the checkpoint
// journal bit-identically.
//
// Output directory layout:
//   manifest.json     - spec echo, spec hash, code version
//   checkpoint.ndjson - journal of completed cells (any order)
//   cells.ndjson      - final cells in canonical row-major order
//                       (gamma outer, kappa inner)

namespace nrc {

struct SweepSpec {
  ModelParams params_base;
  std::vector<double> kappa_grid;
  std::vector<double> gamma_grid;
  int n_initial_conditions = 8;
  std::vector<double> ic_scales = {0.1}; // cycled over the IC index
  std::uint64_t base_seed = 1;
  IntegrationConfig integration;
  bool compute_order_params = true;
  bool compute_lces = false;
  bool compute_period = true;
  std::string output_path;
  int threads = 0; // 0 = hardware concurrency

  void validate() const;
  std::string canonical_json() const; // deterministic serialization
  std::string hash() const;           // fnv1a64 of canonical_json
};

enum class AttractorLabel {
  Vacuum,
  StaticCondensate,
  DynamicCW,
  DynamicCCW,
  DynamicMixed
};
const char* to_string(AttractorLabel l);

// |<omega>| below this (units of J) marks the PH-restored mixed phase.
inline constexpr double kOmegaTol = 1e-3;

struct CellAttractor {
  AttractorLabel label = AttractorLabel::Vacuum;
  std::string dynamics_class; // "fixed_point", "periodic", ... or "" if off
  double omega = 0.0;
  double q = 0.0;
  double amp = 0.0;
  double density_rate = 0.0;
  double edge_extent = 0.0; // largest site (1-based) with edge activity
  std::optional<double> period;
  int count = 0; // initial conditions that landed here
};

struct PhaseCell {
  int cell_index = 0;
  double kappa = 0.0;
  double gamma = 0.0;
  std::vector<CellAttractor> attractors;
  bool multistable = false;
  std::uint64_t seed = 0; // per-cell seed all ICs derive from
  std::vector<std::string> warnings;
};

struct PhaseDiagram {
  SweepSpec spec;
  std::vector<PhaseCell> cells; // canonical row-major order
};

// Computes one cell (used by run_sweep; exposed for tests/CLI probing).
PhaseCell compute_cell(const SweepSpec& spec, int gamma_index,
                       int kappa_index);

// Runs the sweep, streaming completed cells to the checkpoint journal.
// `progress(done, total)` is invoked after every completed cell; return
// false to cancel (the checkpoint stays resumable). Per-cell failures
// are recorded in the cell's warnings, never abort the sweep.
PhaseDiagram run_sweep(const SweepSpec& spec,
                       const std::function<bool(int, int)>& progress = {});

// Completes missing cells of an interrupted sweep. The final output is
// byte-identical to the uninterrupted run. Throws IntegrityError on
// checksum or spec-hash mismatch. `expected_spec_hash`, when given,
// must match the manifest (refuses to resume otherwise).
PhaseDiagram resume_sweep(const std::string& output_path,
                          const std::string& expected_spec_hash = {},
                          const std::function<bool(int, int)>& progress = {});

// Loads a completed sweep from disk without computing anything.
PhaseDiagram load_sweep(const std::string& output_path);

// Marching-squares boundary between the dominant labels a and b over the
// cell grid, chained into polylines of (gamma, kappa) vertices. Returns
// an empty result when either label is absent.
std::vector<std::vector<std::pair<double, double>>> extract_boundary(
    const PhaseDiagram& diagram, AttractorLabel a, AttractorLabel b);

} // namespace nrc
