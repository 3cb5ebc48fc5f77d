#pragma once

#include "tvx/certificate.hpp"
#include "tvx/finite_solver.hpp"
#include "tvx/problem.hpp"

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tvx {

enum class UpdateRule { AllLocalMaxima, SingleArgmax };

struct ExchangeConfig {
  int max_iter = 40;
  double stop_feas_tol = 1e-7;
  UpdateRule rule = UpdateRule::AllLocalMaxima;
  std::optional<MaximizerConfig> extract;  // defaults_for(domain) when unset
  SolverOptions solver;
  int initial_grid_n = 0;      // > 0: uniform grid; 0: the problem's suggested grid
  PointSet initial_points;     // explicit initial grid, overrides the two above
  bool solve_on_maximizers = true;
  // Certified cell subdivision instead of the coarse scan; margin eps0 * 2^-k at step k.
  bool certified = false;
  double certified_diam_tol = 1e-3;
  double certified_eps0 = 0.1;
  // Maximisers closer than this (relative to diam) to a grid point are not re-added.
  double grid_merge_radius = 1e-9;
  // Radius (relative to diam) for merging the atoms of the reported measure.
  double output_merge_radius = 1e-7;
  double constants_inflation = 1.05;
  bool stop_on_solver_failure = false;
  // When nothing fresh can be added the state is a fixed point; false keeps iterating
  // it up to max_iter so that every run has the same number of rows.
  bool stop_when_stalled = true;
};

/// Optional reference solution used for error metrics.
struct Reference {
  PointSet xi;
  std::optional<DiscreteMeasure> measure;
  std::optional<Vector> q_star;
  std::optional<double> J_star;
};

struct MetricsRow {
  static constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  int k = 0;
  double J = nan;
  double J_hat = nan;
  long grid_size = 0;
  long Xk_size = 0;
  double feas_excess = nan;
  double dist_grid_xi = nan;
  double dist_xi_Xk = nan;
  double dist_Xk_xi = nan;
  double q_err = nan;
  double J_gap = nan;

  // diagnostics outside the fixed CSV schema
  double q_norm = nan;
  double grid_feas_excess = nan;  // max(0, max over the grid of |A*q_k| - 1)
  double dist_grid_Xk = nan;
  double solver_gap = nan;
  int solver_iterations = 0;
  bool solver_converged = true;
  long added = 0;
  int unconverged_ascents = 0;
  int slide_iters = 0;
  double post_slide_J = nan;
  long atoms = 0;  // atoms of the reported measure
};

struct ExchangeState {
  int k = 0;
  PointSet grid;
  Matrix design;      // columns A(x) for x in grid
  Vector amplitudes;  // aligned with grid; warm start for the next solve
  DiscreteMeasure measure;
  Vector dual;
  Vector dual_feasible;
  Maximizers maximizers;
  DiscreteMeasure hat_measure;  // solution of the problem restricted to the maximisers
  std::vector<MetricsRow> history;
  std::vector<PointSet> added_points;
  double kappa_hess = 0.0;  // curvature bound handed to the extractor
  bool flagged = false;     // some solve hit max_iter
  bool finished = false;
};

ExchangeState init_exchange(const Problem& problem, const ExchangeConfig& cfg);

/// Solve on the current grid, extract maximisers, record a metrics row and refine.
ExchangeState exchange_step(ExchangeState state, const Problem& problem, const ExchangeConfig& cfg,
                            const Reference* reference = nullptr);

struct ExchangeResult {
  DiscreteMeasure measure;
  Vector dual;
  std::vector<MetricsRow> history;
  std::vector<Vector> duals;
  std::vector<DiscreteMeasure> hat_measures;
  std::vector<PointSet> maximizers;
  ExchangeState final_state;
  bool flagged = false;
};

ExchangeResult run_exchange(const Problem& problem, const ExchangeConfig& cfg, const Reference* reference = nullptr);

/// Appends the points of `candidates` that are farther than `radius` from every grid point.
/// Returns the appended columns.
PointSet refine_grid(ExchangeState& state, const MeasurementOperator& op, const PointSet& candidates, double radius);

/// Measure with the nonzero amplitudes on the given points, merged within `radius`.
DiscreteMeasure measure_from_grid(const PointSet& grid, const Vector& amplitudes, double radius);

/// Fills the reference-dependent metric columns.
void fill_reference_metrics(MetricsRow& row, const PointSet& grid, const PointSet& maximizers, const Vector& dual,
                            const Reference* reference);

/// The initial grid selected by the configuration.
PointSet initial_grid(const Problem& problem, const ExchangeConfig& cfg);

}  // namespace tvx
