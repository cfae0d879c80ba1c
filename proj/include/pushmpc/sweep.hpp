#pragma once

// Robustness sweep: the full factor grid of plant-side friction, mass, path,
// and mean velocity, with the controller model pinned at its nominal
// parameters. Cells run independently (optionally across threads); per-run
// failures are recorded and the sweep continues.

#include <atomic>
#include <functional>
#include <mutex>
#include <thread>

#include "pushmpc/runner.hpp"

namespace pushmpc {

struct SweepCell {
  int index{0};
  double mu{0.35};
  double mass{0.2843};
  PathKind path{PathKind::Line};
  double velocity{0.0313};
  int rep{0};
  unsigned long long seed{0};
};

struct SweepRow {
  SweepCell cell;
  RunMetrics metrics;
  bool ok{false};
  std::string error;
};

struct SweepSpec {
  std::vector<double> mu_levels{0.35, 0.28, 0.33};
  std::vector<double> mass_levels{0.1649, 0.2843, 0.4097};
  std::vector<PathKind> paths{PathKind::Line, PathKind::Curve};
  std::vector<double> velocities{0.0313, 0.0391, 0.0521, 0.0782};
  int repetitions{3};
  double path_length{0.5};  // run duration = path_length / velocity
};

inline std::vector<SweepCell> sweep_grid(const SweepSpec& spec, unsigned long long base_seed) {
  std::vector<SweepCell> cells;
  int idx = 0;
  for (double mu : spec.mu_levels) {
    for (double mass : spec.mass_levels) {
      for (PathKind path : spec.paths) {
        for (double v : spec.velocities) {
          for (int rep = 0; rep < spec.repetitions; ++rep) {
            SweepCell c;
            c.index = idx;
            c.mu = mu;
            c.mass = mass;
            c.path = path;
            c.velocity = v;
            c.rep = rep;
            c.seed = base_seed + static_cast<unsigned long long>(idx);
            cells.push_back(c);
            ++idx;
          }
        }
      }
    }
  }
  return cells;
}

/// Applies a sweep cell to a base profile: the plant object gets the cell's
/// parameters while the controller keeps the profile's nominal model.
inline ScenarioConfig cell_config(const ScenarioConfig& base, const SweepCell& cell,
                                  double path_length) {
  ScenarioConfig c = base;
  c.model_object = base.controller_object();  // controller stays nominal
  c.object.mu_ground = cell.mu;
  c.object.mass = cell.mass;
  c.path = cell.path;
  c.mean_velocity = cell.velocity;
  c.duration = path_length / cell.velocity;
  c.seed = cell.seed;
  c.disturbance = DisturbanceSpec{};
  return c;
}

inline std::vector<SweepRow> run_sweep(const ScenarioConfig& base, const SweepSpec& spec,
                                       int jobs = 1,
                                       std::function<void(const SweepRow&)> on_row = {}) {
  const auto cells = sweep_grid(spec, base.seed);
  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex cb_mutex;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      SweepRow row;
      row.cell = cells[i];
      try {
        ScenarioRunner runner(cell_config(base, cells[i], spec.path_length));
        const RunResult res = runner.run(/*keep_trace=*/false);
        row.metrics = res.metrics;
        row.ok = !res.aborted;
        if (res.aborted) row.error = res.abort_reason;
      } catch (const std::exception& e) {
        row.ok = false;
        row.error = e.what();
      }
      rows[i] = row;
      if (on_row) {
        std::lock_guard<std::mutex> lk(cb_mutex);
        on_row(rows[i]);
      }
    }
  };

  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  CsvWriter w(path, {"index", "mu", "mass", "path", "velocity", "rep", "seed", "ok", "error",
                     "rmse_pos", "rmse_rot", "max_abs_pos_err", "max_abs_rot_err",
                     "overall_rmse_pos", "overall_rmse_rot", "max_force_norm", "tank_min",
                     "alpha_zero_fraction", "solve_count", "infeasible_steps",
                     "nonconverged_steps", "max_solver_compl", "mean_sqp_iters"});
  for (const auto& r : rows) {
    w.field(r.cell.index);
    w.field(r.cell.mu);
    w.field(r.cell.mass);
    w.field(std::string(to_string(r.cell.path)));
    w.field(r.cell.velocity);
    w.field(r.cell.rep);
    w.field(static_cast<long>(r.cell.seed));
    w.field(r.ok ? 1 : 0);
    w.field(r.error);
    w.field(r.metrics.rmse_pos);
    w.field(r.metrics.rmse_rot);
    w.field(r.metrics.max_abs_pos_err);
    w.field(r.metrics.max_abs_rot_err);
    w.field(r.metrics.overall_rmse_pos);
    w.field(r.metrics.overall_rmse_rot);
    w.field(r.metrics.max_force_norm);
    w.field(r.metrics.tank_min);
    w.field(r.metrics.alpha_zero_fraction);
    w.field(r.metrics.solve_count);
    w.field(r.metrics.infeasible_steps);
    w.field(r.metrics.nonconverged_steps);
    w.field(r.metrics.max_solver_compl);
    w.field(r.metrics.mean_sqp_iters);
    w.end_row();
  }
}

}  // namespace pushmpc
