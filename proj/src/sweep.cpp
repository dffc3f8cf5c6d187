#include "nrc/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "nrc/hash.hpp"
#include "nrc/rng.hpp"
#include "nrc/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace nrc {

// ---------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------

namespace {

json params_to_json(const ModelParams& p) {
  return json{{"J", p.J()},          {"gamma", p.gamma()},
              {"kappa", p.kappa()},  {"Gamma", p.Gamma()},
              {"theta", p.theta()},  {"N", p.n_sites()},
              {"boundary", p.boundary() == Boundary::Open ? "open"
                                                          : "periodic"}};
}

ModelParams params_from_json(const json& j) {
  return ModelParams(
      j.at("J").get<double>(), j.at("gamma").get<double>(),
      j.at("kappa").get<double>(), j.at("Gamma").get<double>(),
      j.at("theta").get<double>(), j.at("N").get<int>(),
      j.at("boundary").get<std::string>() == "open" ? Boundary::Open
                                                    : Boundary::Periodic);
}

json integration_to_json(const IntegrationConfig& c) {
  return json{{"dt", c.dt},
              {"t_transient", c.t_transient},
              {"t_measure", c.t_measure},
              {"sample_stride", c.sample_stride},
              {"scheme", c.scheme == Scheme::RK4 ? "rk4" : "rk45"},
              {"abs_tol", c.abs_tol},
              {"rel_tol", c.rel_tol},
              {"seed", c.seed}};
}

IntegrationConfig integration_from_json(const json& j) {
  IntegrationConfig c;
  c.dt = j.at("dt").get<double>();
  c.t_transient = j.at("t_transient").get<double>();
  c.t_measure = j.at("t_measure").get<double>();
  c.sample_stride = j.at("sample_stride").get<int>();
  c.scheme = j.at("scheme").get<std::string>() == "rk4" ? Scheme::RK4
                                                        : Scheme::RK45Adaptive;
  c.abs_tol = j.at("abs_tol").get<double>();
  c.rel_tol = j.at("rel_tol").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json spec_to_json(const SweepSpec& s) {
  return json{{"params", params_to_json(s.params_base)},
              {"kappa_grid", s.kappa_grid},
              {"gamma_grid", s.gamma_grid},
              {"n_initial_conditions", s.n_initial_conditions},
              {"ic_scales", s.ic_scales},
              {"base_seed", s.base_seed},
              {"integration", integration_to_json(s.integration)},
              {"order_params", s.compute_order_params},
              {"lces", s.compute_lces},
              {"period", s.compute_period}};
}

SweepSpec spec_from_json(const json& j, const std::string& output_path)
    /* throws json exceptions on malformed input */ {
  SweepSpec s{params_from_json(j.at("params")),
              j.at("kappa_grid").get<std::vector<double>>(),
              j.at("gamma_grid").get<std::vector<double>>(),
              j.at("n_initial_conditions").get<int>(),
              j.at("ic_scales").get<std::vector<double>>(),
              j.at("base_seed").get<std::uint64_t>(),
              integration_from_json(j.at("integration")),
              j.at("order_params").get<bool>(),
              j.at("lces").get<bool>(),
              j.at("period").get<bool>(),
              output_path,
              0};
  return s;
}

json attractor_to_json(const CellAttractor& a) {
  json j{{"label", to_string(a.label)},
         {"class", a.dynamics_class},
         {"omega", a.omega},
         {"q", a.q},
         {"amp", a.amp},
         {"density_rate", a.density_rate},
         {"edge_extent", a.edge_extent},
         {"count", a.count}};
  if (a.period)
    j["period"] = *a.period;
  else
    j["period"] = nullptr;
  return j;
}

AttractorLabel label_from_string(const std::string& s) {
  if (s == "vacuum") return AttractorLabel::Vacuum;
  if (s == "static") return AttractorLabel::StaticCondensate;
  if (s == "dynamic_cw") return AttractorLabel::DynamicCW;
  if (s == "dynamic_ccw") return AttractorLabel::DynamicCCW;
  if (s == "dynamic_mixed") return AttractorLabel::DynamicMixed;
  throw IntegrityError("unknown attractor label: " + s);
}

CellAttractor attractor_from_json(const json& j) {
  CellAttractor a;
  a.label = label_from_string(j.at("label").get<std::string>());
  a.dynamics_class = j.at("class").get<std::string>();
  a.omega = j.at("omega").get<double>();
  a.q = j.at("q").get<double>();
  a.amp = j.at("amp").get<double>();
  a.density_rate = j.at("density_rate").get<double>();
  a.edge_extent = j.at("edge_extent").get<double>();
  a.count = j.at("count").get<int>();
  if (!j.at("period").is_null()) a.period = j.at("period").get<double>();
  return a;
}

json cell_to_json(const PhaseCell& c) {
  json attractors = json::array();
  for (const CellAttractor& a : c.attractors)
    attractors.push_back(attractor_to_json(a));
  return json{{"kappa", c.kappa},       {"gamma", c.gamma},
              {"attractors", attractors}, {"multistable", c.multistable},
              {"seed", c.seed},          {"warnings", c.warnings}};
}

PhaseCell cell_from_json(const json& j, int cell_index) {
  PhaseCell c;
  c.cell_index = cell_index;
  c.kappa = j.at("kappa").get<double>();
  c.gamma = j.at("gamma").get<double>();
  for (const json& a : j.at("attractors"))
    c.attractors.push_back(attractor_from_json(a));
  c.multistable = j.at("multistable").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.warnings = j.at("warnings").get<std::vector<std::string>>();
  return c;
}

void atomic_write(const fs::path& target, const std::string& content) {
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IntegrityError("cannot open " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw IntegrityError("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

} // namespace

void SweepSpec::validate() const {
  if (kappa_grid.empty() || gamma_grid.empty())
    throw ContractViolation("SweepSpec: grids must be nonempty");
  if (n_initial_conditions < 1)
    throw ContractViolation("SweepSpec: n_initial_conditions must be >= 1");
  if (ic_scales.empty())
    throw ContractViolation("SweepSpec: ic_scales must be nonempty");
  integration.validate();
}

std::string SweepSpec::canonical_json() const { return spec_to_json(*this).dump(); }

std::string SweepSpec::hash() const { return fnv1a64_hex(canonical_json()); }

const char* to_string(AttractorLabel l) {
  switch (l) {
    case AttractorLabel::Vacuum: return "vacuum";
    case AttractorLabel::StaticCondensate: return "static";
    case AttractorLabel::DynamicCW: return "dynamic_cw";
    case AttractorLabel::DynamicCCW: return "dynamic_ccw";
    case AttractorLabel::DynamicMixed: return "dynamic_mixed";
  }
  return "unknown";
}

// ---------------------------------------------------------------------
// Cell computation
// ---------------------------------------------------------------------

namespace {

double edge_extent_from_profile(const std::vector<double>& profile,
                                double scale) {
  double pmax = 0.0;
  for (double p : profile) pmax = std::max(pmax, p);
  if (pmax < 1e-8 * scale) return 0.0; // numerically quiet amplitudes
  const double thr = 0.1 * pmax;
  double extent = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i)
    if (profile[i] > thr) extent = static_cast<double>(i + 1);
  return extent;
}

bool same_attractor(const CellAttractor& a, const CellAttractor& b, double J) {
  if (std::abs(a.omega - b.omega) >= 1e-2 * J) return false;
  if (std::abs(a.q - b.q) >= 1e-2) return false;
  const double amp_scale = std::max({a.amp, b.amp, 1e-12});
  if (std::abs(a.amp - b.amp) / amp_scale >= 1e-2) return false;
  // Hierarchies of edge states share bulk order parameters and differ
  // only in the reach of the edge fluctuations.
  if (std::abs(a.edge_extent - b.edge_extent) > 2.0) return false;
  if (a.label == AttractorLabel::DynamicMixed &&
      b.label == AttractorLabel::DynamicMixed) {
    if (a.period.has_value() != b.period.has_value()) return false;
    if (a.period && std::abs(*a.period - *b.period) >
                        0.01 * std::max(*a.period, *b.period))
      return false;
  }
  return true;
}

std::vector<int> period_site_subset(int N) {
  std::vector<int> sites{0, N / 4, N / 2, (3 * N) / 4, N - 1};
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

} // namespace

PhaseCell compute_cell(const SweepSpec& spec, int gamma_index,
                       int kappa_index) {
  const int n_kappa = static_cast<int>(spec.kappa_grid.size());
  PhaseCell cell;
  cell.cell_index = gamma_index * n_kappa + kappa_index;
  cell.gamma = spec.gamma_grid[gamma_index];
  cell.kappa = spec.kappa_grid[kappa_index];
  cell.seed = seed_combine(spec.base_seed,
                           static_cast<std::uint64_t>(cell.cell_index));

  const ModelParams params =
      spec.params_base.with_gamma(cell.gamma).with_kappa(cell.kappa);
  const double amp_scale = params.kappa() / params.Gamma() + 1.0;
  const auto sites = period_site_subset(params.n_sites());

  std::vector<CellAttractor> found;
  for (int ic = 0; ic < spec.n_initial_conditions; ++ic) {
    const std::uint64_t ic_seed =
        seed_combine(cell.seed, static_cast<std::uint64_t>(ic));
    const double scale = spec.ic_scales[ic % spec.ic_scales.size()];
    CellAttractor att;
    att.count = 1;
    try {
      const LatticeState init = random_initial(params, ic_seed, scale);
      const AttractorRecord rec = find_attractor(params, init, spec.integration);
      if (rec.horizon_extended) {
        std::ostringstream w;
        w << "ic " << ic << ": transient auto-extended";
        cell.warnings.push_back(w.str());
      }
      if (rec.kind == AttractorKind::Diverged) {
        std::ostringstream w;
        w << "ic " << ic << ": diverged (" << rec.diagnostics << ")";
        cell.warnings.push_back(w.str());
        continue;
      }
      const bool vacuum_like =
          rec.window.terminal_state.max_abs() < 1e-4 * std::sqrt(amp_scale);
      if (rec.kind == AttractorKind::FixedPoint) {
        att.label = vacuum_like ? AttractorLabel::Vacuum
                                : AttractorLabel::StaticCondensate;
        att.dynamics_class = to_string(DynamicsClassKind::FixedPoint);
        if (!vacuum_like && spec.compute_order_params) {
          const OrderParameters op =
              order_parameters(rec.window, params.n_sites());
          att.q = op.mean_wavevector;
          att.amp = op.mean_amplitude;
        }
      } else {
        if (spec.compute_order_params) {
          const OrderParameters op =
              order_parameters(rec.window, params.n_sites());
          att.omega = op.mean_frequency;
          att.q = op.mean_wavevector;
          att.amp = op.mean_amplitude;
          att.density_rate = op.mean_density_rate;
          att.edge_extent =
              edge_extent_from_profile(op.edge_density_rate_profile, amp_scale);
          att.label = att.omega > kOmegaTol * params.J()
                          ? AttractorLabel::DynamicCW
                          : (att.omega < -kOmegaTol * params.J()
                                 ? AttractorLabel::DynamicCCW
                                 : AttractorLabel::DynamicMixed);
        } else {
          att.label = AttractorLabel::DynamicMixed;
        }
        if (spec.compute_period) {
          try {
            att.period = detect_period(rec.window, sites);
          } catch (const std::exception& e) {
            std::ostringstream w;
            w << "ic " << ic << ": period detection failed (" << e.what()
              << ")";
            cell.warnings.push_back(w.str());
          }
        }
        if (spec.compute_lces) {
          LyapunovConfig lcfg;
          lcfg.t_total = 5e3; // sweep-scale budget
          lcfg.seed = ic_seed;
          const LyapunovResult lces =
              lyapunov_spectrum(params, rec.window.terminal_state, 4, lcfg);
          const DynamicsClass cls = classify_dynamics(lces, rec);
          att.dynamics_class = to_string(cls.kind);
          if (!cls.conclusive) {
            std::ostringstream w;
            w << "ic " << ic << ": classification inconclusive ("
              << cls.diagnostics << ")";
            cell.warnings.push_back(w.str());
          }
        }
      }
      if (att.label == AttractorLabel::Vacuum) {
        att.omega = att.q = att.amp = att.density_rate = att.edge_extent = 0.0;
        att.period.reset();
      }
    } catch (const std::exception& e) {
      std::ostringstream w;
      w << "ic " << ic << ": " << e.what();
      cell.warnings.push_back(w.str());
      continue;
    }
    found.push_back(std::move(att));
  }

  // Union-find deduplication over the pairwise identity relation; the
  // transitive closure keeps the relation symmetric and well defined.
  const int M = static_cast<int>(found.size());
  std::vector<int> parent(M);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (int i = 0; i < M; ++i)
    for (int j = i + 1; j < M; ++j)
      if (same_attractor(found[i], found[j], params.J())) {
        const int ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }
  std::map<int, CellAttractor> groups;
  for (int i = 0; i < M; ++i) {
    const int r = find(i);
    auto [it, fresh] = groups.try_emplace(r, found[i]);
    if (!fresh) ++it->second.count;
  }
  for (auto& [root, att] : groups) cell.attractors.push_back(att);
  std::sort(cell.attractors.begin(), cell.attractors.end(),
            [](const CellAttractor& a, const CellAttractor& b) {
              if (a.label != b.label) return a.label < b.label;
              if (a.edge_extent != b.edge_extent)
                return a.edge_extent < b.edge_extent;
              if (a.omega != b.omega) return a.omega < b.omega;
              return a.q < b.q;
            });
  cell.multistable = cell.attractors.size() >= 2;
  return cell;
}

// ---------------------------------------------------------------------
// Sweep runner with checkpoint journal
// ---------------------------------------------------------------------

namespace {

class Journal {
public:
  Journal(fs::path dir) : dir_(std::move(dir)) {}

  void restore_line(int cell_index, std::string cell_dump) {
    lines_[cell_index] = std::move(cell_dump);
  }

  // Appends a completed cell and rewrites the checkpoint atomically.
  void record(int cell_index, const std::string& cell_dump) {
    lines_[cell_index] = cell_dump;
    std::ostringstream out;
    for (const auto& [idx, dump] : lines_) {
      json line{{"cell_index", idx}, {"crc", fnv1a64_hex(dump)},
                {"cell", json::parse(dump)}};
      out << line.dump() << "\n";
    }
    atomic_write(dir_ / "checkpoint.ndjson", out.str());
  }

  bool has(int cell_index) const { return lines_.count(cell_index) > 0; }
  const std::map<int, std::string>& lines() const { return lines_; }

private:
  fs::path dir_;
  std::map<int, std::string> lines_;
};

PhaseDiagram run_cells(const SweepSpec& spec, Journal& journal,
                       const std::function<bool(int, int)>& progress) {
  const int n_kappa = static_cast<int>(spec.kappa_grid.size());
  const int n_gamma = static_cast<int>(spec.gamma_grid.size());
  const int total = n_kappa * n_gamma;

  std::vector<int> pending;
  for (int i = 0; i < total; ++i)
    if (!journal.has(i)) pending.push_back(i);

  std::atomic<std::size_t> next{0};
  std::atomic<bool> cancel{false};
  std::atomic<int> done{total - static_cast<int>(pending.size())};
  std::mutex write_mutex;
  std::exception_ptr first_error;

  auto worker = [&] {
    for (;;) {
      if (cancel.load()) return;
      const std::size_t slot = next.fetch_add(1);
      if (slot >= pending.size()) return;
      const int idx = pending[slot];
      try {
        const PhaseCell cell =
            compute_cell(spec, idx / n_kappa, idx % n_kappa);
        const std::string dump = cell_to_json(cell).dump();
        std::lock_guard<std::mutex> lock(write_mutex);
        journal.record(idx, dump);
        const int d = ++done;
        if (progress && !progress(d, total)) cancel.store(true);
      } catch (...) {
        std::lock_guard<std::mutex> lock(write_mutex);
        if (!first_error) first_error = std::current_exception();
        cancel.store(true);
        return;
      }
    }
  };

  int n_threads = spec.threads > 0
                      ? spec.threads
                      : static_cast<int>(std::thread::hardware_concurrency());
  const int max_useful = std::max(1, static_cast<int>(pending.size()));
  n_threads = std::clamp(n_threads, 1, max_useful);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  PhaseDiagram diagram;
  diagram.spec = spec;
  for (const auto& [idx, dump] : journal.lines())
    diagram.cells.push_back(cell_from_json(json::parse(dump), idx));

  if (!cancel.load()) {
    // Final canonical output; byte content depends only on the spec.
    std::ostringstream out;
    for (const auto& [idx, dump] : journal.lines()) out << dump << "\n";
    const fs::path target = fs::path(spec.output_path) / "cells.ndjson";
    std::string previous;
    if (fs::exists(target)) {
      std::ifstream in(target, std::ios::binary);
      std::ostringstream buf;
      buf << in.rdbuf();
      previous = buf.str();
    }
    if (previous != out.str()) atomic_write(target, out.str());
  }
  return diagram;
}

void write_manifest(const SweepSpec& spec) {
  json manifest{{"format", "nrc-sweep-v1"},
                {"spec_hash", spec.hash()},
                {"code_version",
                 std::string(kVersion) + "+" + kGitRevision},
                {"spec", json::parse(spec.canonical_json())}};
  atomic_write(fs::path(spec.output_path) / "manifest.json",
               manifest.dump(2) + "\n");
}

} // namespace

PhaseDiagram run_sweep(const SweepSpec& spec,
                       const std::function<bool(int, int)>& progress) {
  spec.validate();
  if (spec.output_path.empty())
    throw ContractViolation("run_sweep: output_path must be set");
  fs::create_directories(spec.output_path);
  write_manifest(spec);
  // Fresh run: drop any stale journal.
  fs::remove(fs::path(spec.output_path) / "checkpoint.ndjson");
  Journal journal(spec.output_path);
  return run_cells(spec, journal, progress);
}

namespace {

json read_json_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IntegrityError("cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IntegrityError("malformed JSON in " + p.string() + ": " + e.what());
  }
  return j;
}

SweepSpec load_manifest(const std::string& output_path,
                        const std::string& expected_spec_hash) {
  const json manifest = read_json_file(fs::path(output_path) / "manifest.json");
  SweepSpec spec;
  try {
    spec = spec_from_json(manifest.at("spec"), output_path);
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("malformed manifest spec: ") + e.what());
  }
  const std::string stored = manifest.at("spec_hash").get<std::string>();
  if (stored != spec.hash())
    throw IntegrityError("manifest spec hash mismatch (stored " + stored +
                         ", recomputed " + spec.hash() + ")");
  if (!expected_spec_hash.empty() && expected_spec_hash != stored)
    throw IntegrityError("refusing to resume: provided spec hash " +
                         expected_spec_hash + " != checkpoint hash " + stored);
  return spec;
}

void load_journal(const std::string& output_path, Journal& journal,
                  int total) {
  const fs::path cp = fs::path(output_path) / "checkpoint.ndjson";
  if (!fs::exists(cp)) return;
  std::ifstream in(cp, std::ios::binary);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      std::ostringstream msg;
      msg << "corrupted checkpoint line " << lineno << " (parse failure)";
      throw IntegrityError(msg.str());
    }
    const int idx = j.at("cell_index").get<int>();
    const std::string dump = j.at("cell").dump();
    if (j.at("crc").get<std::string>() != fnv1a64_hex(dump)) {
      std::ostringstream msg;
      msg << "corrupted checkpoint line " << lineno << " (checksum mismatch)";
      throw IntegrityError(msg.str());
    }
    if (idx < 0 || idx >= total)
      throw IntegrityError("checkpoint cell index out of range");
    journal.restore_line(idx, dump);
  }
}

} // namespace

PhaseDiagram resume_sweep(const std::string& output_path,
                          const std::string& expected_spec_hash,
                          const std::function<bool(int, int)>& progress) {
  SweepSpec spec = load_manifest(output_path, expected_spec_hash);
  const int total = static_cast<int>(spec.kappa_grid.size()) *
                    static_cast<int>(spec.gamma_grid.size());
  Journal journal(output_path);
  load_journal(output_path, journal, total);
  return run_cells(spec, journal, progress);
}

PhaseDiagram load_sweep(const std::string& output_path) {
  SweepSpec spec = load_manifest(output_path, "");
  const fs::path cellsfile = fs::path(output_path) / "cells.ndjson";
  if (!fs::exists(cellsfile))
    throw IntegrityError("no cells.ndjson in " + output_path +
                         " (sweep incomplete?)");
  PhaseDiagram diagram;
  diagram.spec = spec;
  std::ifstream in(cellsfile, std::ios::binary);
  std::string line;
  int idx = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      diagram.cells.push_back(cell_from_json(json::parse(line), idx));
    } catch (const json::exception& e) {
      throw IntegrityError(std::string("malformed cell line: ") + e.what());
    }
    ++idx;
  }
  return diagram;
}

// ---------------------------------------------------------------------
// Boundary extraction (marching squares over dominant labels)
// ---------------------------------------------------------------------

std::vector<std::vector<std::pair<double, double>>> extract_boundary(
    const PhaseDiagram& diagram, AttractorLabel a, AttractorLabel b) {
  const int n_kappa = static_cast<int>(diagram.spec.kappa_grid.size());
  const int n_gamma = static_cast<int>(diagram.spec.gamma_grid.size());
  const auto& kg = diagram.spec.kappa_grid;
  const auto& gg = diagram.spec.gamma_grid;

  // Dominant label per cell: highest IC count, ties to the smaller enum.
  constexpr int kMasked = -1;
  std::vector<int> value(static_cast<std::size_t>(n_kappa) * n_gamma, kMasked);
  for (const PhaseCell& cell : diagram.cells) {
    if (cell.cell_index < 0 || cell.cell_index >= n_kappa * n_gamma) continue;
    const CellAttractor* best = nullptr;
    for (const CellAttractor& att : cell.attractors)
      if (!best || att.count > best->count ||
          (att.count == best->count && att.label < best->label))
        best = &att;
    if (!best) continue;
    if (best->label == a)
      value[cell.cell_index] = 0;
    else if (best->label == b)
      value[cell.cell_index] = 1;
  }

  using Point = std::pair<double, double>; // (gamma, kappa)
  struct Segment {
    Point p, q;
  };
  std::vector<Segment> segments;
  auto at = [&](int ig, int ik) { return value[ig * n_kappa + ik]; };

  for (int ig = 0; ig + 1 < n_gamma; ++ig) {
    for (int ik = 0; ik + 1 < n_kappa; ++ik) {
      const int c0 = at(ig, ik), c1 = at(ig + 1, ik), c2 = at(ig + 1, ik + 1),
                c3 = at(ig, ik + 1);
      if (c0 == kMasked || c1 == kMasked || c2 == kMasked || c3 == kMasked)
        continue;
      const double gmid = 0.5 * (gg[ig] + gg[ig + 1]);
      const double kmid = 0.5 * (kg[ik] + kg[ik + 1]);
      const Point e01{gmid, kg[ik]};      // between c0 and c1
      const Point e12{gg[ig + 1], kmid};  // between c1 and c2
      const Point e23{gmid, kg[ik + 1]};  // between c2 and c3
      const Point e30{gg[ig], kmid};      // between c3 and c0
      std::vector<Point> crossings;
      if (c0 != c1) crossings.push_back(e01);
      if (c1 != c2) crossings.push_back(e12);
      if (c2 != c3) crossings.push_back(e23);
      if (c3 != c0) crossings.push_back(e30);
      if (crossings.size() == 2) {
        segments.push_back({crossings[0], crossings[1]});
      } else if (crossings.size() == 4) {
        // Saddle: pair deterministically.
        segments.push_back({e01, e30});
        segments.push_back({e12, e23});
      }
    }
  }

  // Chain segments into polylines: walk from degree-1 endpoints first,
  // then any remaining loops, in sorted order for determinism.
  std::map<Point, std::vector<std::size_t>> touch;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    touch[segments[s].p].push_back(s);
    touch[segments[s].q].push_back(s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<std::vector<Point>> polylines;

  auto walk = [&](Point start) {
    std::vector<Point> line{start};
    Point cur = start;
    for (;;) {
      const auto it = touch.find(cur);
      std::size_t next_seg = segments.size();
      if (it != touch.end())
        for (std::size_t s : it->second)
          if (!used[s]) {
            next_seg = s;
            break;
          }
      if (next_seg == segments.size()) break;
      used[next_seg] = true;
      cur = segments[next_seg].p == cur ? segments[next_seg].q
                                        : segments[next_seg].p;
      line.push_back(cur);
    }
    return line;
  };

  for (const auto& [pt, segs] : touch) {
    std::size_t open = 0;
    for (std::size_t s : segs)
      if (!used[s]) ++open;
    if (open == 1) polylines.push_back(walk(pt));
  }
  for (const auto& [pt, segs] : touch)
    for (std::size_t s : segs)
      if (!used[s]) polylines.push_back(walk(pt));
  return polylines;
}

} // namespace nrc
