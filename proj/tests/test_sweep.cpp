#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "nrc/sweep.hpp"

using namespace nrc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

SweepSpec tiny_spec(const std::string& out) {
  SweepSpec spec;
  spec.params_base = ModelParams(1.0, 0.5, 0.5, 1.0, kPi, 16, Boundary::Open);
  spec.kappa_grid = {0.5, 1.5};
  spec.gamma_grid = {0.5, 2.0};
  spec.n_initial_conditions = 2;
  spec.ic_scales = {0.05};
  spec.base_seed = 77;
  spec.integration.dt = 0.01;
  spec.integration.t_transient = 300.0;
  spec.integration.t_measure = 150.0;
  spec.integration.sample_stride = 10;
  spec.compute_period = false;
  spec.output_path = out;
  return spec;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("sweep output is byte-identical across thread counts") {
  TempDir d1("nrc_sweep_t1"), d2("nrc_sweep_t2");
  SweepSpec s1 = tiny_spec(d1.path.string());
  s1.threads = 1;
  SweepSpec s2 = tiny_spec(d2.path.string());
  s2.threads = 4;
  run_sweep(s1);
  run_sweep(s2);
  CHECK(slurp(d1.path / "cells.ndjson") == slurp(d2.path / "cells.ndjson"));
  CHECK(slurp(d1.path / "manifest.json") == slurp(d2.path / "manifest.json"));
}

TEST_CASE("cells classify vacuum / static across the gamma=2 threshold") {
  TempDir d("nrc_sweep_labels");
  SweepSpec spec = tiny_spec(d.path.string());
  const PhaseDiagram diag = run_sweep(spec);
  REQUIRE(diag.cells.size() == 4);
  // Row-major: gamma outer, kappa inner. kappa_crit(gamma=2, N=16) ~ 0.55;
  // kappa_crit(gamma=0.5) = 1.0.
  auto label_of = [&](int ig, int ik) {
    const PhaseCell& c = diag.cells[ig * 2 + ik];
    REQUIRE_FALSE(c.attractors.empty());
    return c.attractors.front().label;
  };
  CHECK(label_of(0, 0) == AttractorLabel::Vacuum);  // g=0.5, k=0.5
  CHECK(label_of(1, 0) == AttractorLabel::Vacuum);  // g=2.0, k=0.5
  CHECK(label_of(1, 1) == AttractorLabel::StaticCondensate); // g=2, k=1.5
  // g=0.5, k=1.5 is above threshold: anything but vacuum.
  CHECK(label_of(0, 1) != AttractorLabel::Vacuum);
}

TEST_CASE("interrupted sweep resumes bit-identically") {
  TempDir dref("nrc_sweep_ref"), dint("nrc_sweep_int");
  SweepSpec ref = tiny_spec(dref.path.string());
  run_sweep(ref);
  const std::string want = slurp(dref.path / "cells.ndjson");

  SweepSpec part = tiny_spec(dint.path.string());
  part.threads = 1;
  run_sweep(part, [](int done, int) { return done < 2; }); // cancel early
  CHECK_FALSE(fs::exists(dint.path / "cells.ndjson"));
  CHECK(fs::exists(dint.path / "checkpoint.ndjson"));

  const PhaseDiagram resumed = resume_sweep(dint.path.string());
  CHECK(resumed.cells.size() == 4);
  CHECK(slurp(dint.path / "cells.ndjson") == want);

  // Resume of a complete sweep is a no-op.
  const auto before = fs::last_write_time(dint.path / "cells.ndjson");
  resume_sweep(dint.path.string());
  CHECK(fs::last_write_time(dint.path / "cells.ndjson") == before);
  CHECK(slurp(dint.path / "cells.ndjson") == want);
}

TEST_CASE("corrupted checkpoints and spec-hash mismatches are refused") {
  TempDir d("nrc_sweep_corrupt");
  SweepSpec spec = tiny_spec(d.path.string());
  spec.threads = 1;
  run_sweep(spec, [](int done, int) { return done < 2; });

  // Flip a digit inside the journal.
  const fs::path cp = d.path / "checkpoint.ndjson";
  std::string journal = slurp(cp);
  const auto pos = journal.find("\"crc\":\"");
  REQUIRE(pos != std::string::npos);
  journal[pos + 7] = journal[pos + 7] == 'a' ? 'b' : 'a';
  {
    std::ofstream out(cp, std::ios::binary | std::ios::trunc);
    out << journal;
  }
  CHECK_THROWS_AS(resume_sweep(d.path.string()), IntegrityError);

  // Restore a clean journal, then refuse on wrong expected hash.
  run_sweep(spec, [](int done, int) { return done < 2; });
  CHECK_THROWS_AS(resume_sweep(d.path.string(), "0000000000000000"),
                  IntegrityError);
  CHECK_NOTHROW(resume_sweep(d.path.string(), spec.hash()));
}

TEST_CASE("PH pair: dynamical cell carries CW and CCW attractors") {
  TempDir d("nrc_sweep_pair");
  SweepSpec spec = tiny_spec(d.path.string());
  spec.params_base = ModelParams(1.0, 0.2, 1.5, 1.0, kPi, 60, Boundary::Open);
  spec.kappa_grid = {1.5};
  spec.gamma_grid = {0.2};
  spec.n_initial_conditions = 6;
  spec.ic_scales = {0.1};
  spec.integration.t_transient = 600.0;
  spec.integration.t_measure = 300.0;
  spec.integration.dt = 5e-3;
  spec.integration.sample_stride = 10;
  const PhaseDiagram diag = run_sweep(spec);
  REQUIRE(diag.cells.size() == 1);
  const PhaseCell& cell = diag.cells.front();
  bool cw = false, ccw = false;
  for (const CellAttractor& a : cell.attractors) {
    if (a.label == AttractorLabel::DynamicCW) cw = true;
    if (a.label == AttractorLabel::DynamicCCW) ccw = true;
  }
  CHECK(cw);
  CHECK(ccw);
  CHECK(cell.multistable);
  // Opposite frequencies within the dedup scale.
  double wsum = 0.0;
  for (const CellAttractor& a : cell.attractors) wsum += a.omega;
  CHECK(std::abs(wsum) < 2e-2);
}

TEST_CASE("extract_boundary tracks a synthetic straight boundary") {
  PhaseDiagram diag;
  diag.spec = SweepSpec{};
  diag.spec.kappa_grid = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  diag.spec.gamma_grid = {0.0, 0.1, 0.2, 0.3};
  const int nk = 6;
  for (int ig = 0; ig < 4; ++ig) {
    for (int ik = 0; ik < nk; ++ik) {
      PhaseCell c;
      c.cell_index = ig * nk + ik;
      c.gamma = diag.spec.gamma_grid[ig];
      c.kappa = diag.spec.kappa_grid[ik];
      CellAttractor a;
      // Boundary at kappa = 0.25: below vacuum, above static.
      a.label = c.kappa < 0.25 ? AttractorLabel::Vacuum
                               : AttractorLabel::StaticCondensate;
      a.count = 1;
      c.attractors.push_back(a);
      diag.cells.push_back(c);
    }
  }
  const auto lines = extract_boundary(diag, AttractorLabel::Vacuum,
                                      AttractorLabel::StaticCondensate);
  REQUIRE(lines.size() == 1);
  CHECK(lines.front().size() == 4); // one vertex per gamma row boundary
  for (const auto& [g, k] : lines.front())
    CHECK(k == doctest::Approx(0.25).epsilon(1e-12));

  // Absent labels: empty result.
  CHECK(extract_boundary(diag, AttractorLabel::DynamicCW,
                         AttractorLabel::StaticCondensate)
            .empty());
}
