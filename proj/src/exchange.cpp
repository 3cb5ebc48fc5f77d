#include "tvx/exchange.hpp"

#include <cmath>

namespace tvx {

PointSet initial_grid(const Problem& problem, const ExchangeConfig& cfg) {
  const Domain& domain = problem.domain();
  PointSet grid;
  if (cfg.initial_points.cols() > 0) {
    grid = cfg.initial_points;
  } else if (cfg.initial_grid_n > 0) {
    grid = uniform_grid(domain, cfg.initial_grid_n);
  } else if (problem.initial_grid.cols() > 0) {
    grid = problem.initial_grid;
  } else {
    throw Error("exchange: no initial grid");
  }
  if (grid.rows() != domain.dim()) throw Error("exchange: initial grid has the wrong dimension");
  for (Index j = 0; j < grid.cols(); ++j) {
    domain.require(grid.col(j), "exchange: initial grid");
    grid.col(j) = domain.canonical(grid.col(j));
  }
  return grid;
}

DiscreteMeasure measure_from_grid(const PointSet& grid, const Vector& amplitudes, double radius) {
  DiscreteMeasure mu(static_cast<int>(grid.rows()));
  for (Index j = 0; j < grid.cols(); ++j) {
    if (amplitudes(j) != 0.0) mu.push_back({grid.col(j), amplitudes(j)});
  }
  return merge_atoms(mu, radius, 0.0);
}

PointSet refine_grid(ExchangeState& state, const MeasurementOperator& op, const PointSet& candidates, double radius) {
  PointSet fresh(op.dim(), 0);
  for (Index j = 0; j < candidates.cols(); ++j) {
    const Point x = op.domain().canonical(candidates.col(j));
    if (distance_to_set(state.grid, x) <= radius) continue;
    if (distance_to_set(fresh, x) <= radius) continue;
    fresh.conservativeResize(Eigen::NoChange, fresh.cols() + 1);
    fresh.col(fresh.cols() - 1) = x;
  }
  if (fresh.cols() == 0) return fresh;
  const Index p = state.grid.cols();
  state.grid = concat_points(state.grid, fresh);
  const Matrix extra = op.design_matrix(fresh);
  state.design.conservativeResize(Eigen::NoChange, p + fresh.cols());
  state.design.rightCols(fresh.cols()) = extra;
  state.amplitudes.conservativeResize(p + fresh.cols());
  state.amplitudes.tail(fresh.cols()).setZero();
  return fresh;
}

void fill_reference_metrics(MetricsRow& row, const PointSet& grid, const PointSet& maximizers, const Vector& dual,
                            const Reference* reference) {
  if (reference == nullptr) return;
  if (reference->xi.cols() > 0) {
    if (grid.cols() > 0) row.dist_grid_xi = set_distance(grid, reference->xi);
    if (maximizers.cols() > 0) {
      row.dist_xi_Xk = set_distance(reference->xi, maximizers);
      row.dist_Xk_xi = set_distance(maximizers, reference->xi);
    }
  }
  if (reference->q_star) row.q_err = (dual - *reference->q_star).norm();
  if (reference->J_star) row.J_gap = row.J - *reference->J_star;
}

ExchangeState init_exchange(const Problem& problem, const ExchangeConfig& cfg) {
  if (cfg.max_iter < 1) throw Error("exchange: max_iter must be at least 1");
  if (!(cfg.stop_feas_tol >= 0)) throw Error("exchange: stop_feas_tol must be non-negative");
  ExchangeState state;
  state.grid = initial_grid(problem, cfg);
  state.design = problem.op.design_matrix(state.grid);
  state.amplitudes = Vector::Zero(state.grid.cols());
  state.measure = DiscreteMeasure(problem.op.dim());
  state.hat_measure = DiscreteMeasure(problem.op.dim());
  const MaximizerConfig mcfg = cfg.extract.value_or(MaximizerConfig::defaults_for(problem.domain()));
  state.kappa_hess = mcfg.kappa_hess > 0
                         ? mcfg.kappa_hess
                         : problem.op.constants(64).inflated(cfg.constants_inflation).kappa_hess;
  return state;
}

namespace {

Maximizers keep_argmax(const Maximizers& all) {
  if (all.points.cols() <= 1) return all;
  Index best = 0;
  all.values.maxCoeff(&best);
  Maximizers one = all;
  one.points = all.points.col(best);
  one.values = Vector::Constant(1, all.values(best));
  return one;
}

}  // namespace

ExchangeState exchange_step(ExchangeState state, const Problem& problem, const ExchangeConfig& cfg,
                            const Reference* reference) {
  const MeasurementOperator& op = problem.op;
  const QuadraticFidelity& f = problem.fidelity;
  const double diam = problem.domain().diameter();

  const SolveReport rep = solve_lasso(state.design, f, cfg.solver, &state.amplitudes);
  if (!rep.converged) state.flagged = true;
  state.amplitudes = rep.amplitudes;
  state.measure = measure_from_grid(state.grid, rep.amplitudes, 0.0);
  state.dual = rep.dual;
  state.dual_feasible = rep.dual_feasible;

  MaximizerConfig mcfg = cfg.extract.value_or(MaximizerConfig::defaults_for(problem.domain()));
  mcfg.kappa_hess = state.kappa_hess;
  Maximizers found;
  if (cfg.certified) {
    const double margin = cfg.certified_eps0 * std::ldexp(1.0, -state.k);
    found = certified_extract(op, rep.dual, mcfg, state.kappa_hess, cfg.certified_diam_tol, margin);
  } else {
    found = extract_maximizers(op, rep.dual, mcfg);
  }
  if (cfg.rule == UpdateRule::SingleArgmax) found = keep_argmax(found);
  state.maximizers = found;

  MetricsRow row;
  row.k = state.k;
  row.J = rep.primal_value;
  row.grid_size = state.grid.cols();
  row.Xk_size = found.points.cols();
  row.feas_excess = found.sup_estimate - 1.0;
  row.q_norm = rep.dual.norm();
  row.grid_feas_excess = rep.kkt_inf_norm;
  row.solver_gap = rep.gap;
  row.solver_iterations = rep.iterations;
  row.solver_converged = rep.converged;
  row.unconverged_ascents = found.unconverged;
  if (found.points.cols() > 0) row.dist_grid_Xk = set_distance(state.grid, found.points);

  state.hat_measure = DiscreteMeasure(op.dim());
  if (cfg.solve_on_maximizers && found.points.cols() > 0) {
    const SolveReport hat = solve_lasso(op.design_matrix(found.points), f, cfg.solver);
    if (!hat.converged) state.flagged = true;
    row.J_hat = hat.primal_value;
    state.hat_measure = measure_from_grid(found.points, hat.amplitudes, 0.0);
  }
  fill_reference_metrics(row, state.grid, found.points, rep.dual, reference);

  const bool violated = found.points.cols() > 0 && found.values.maxCoeff() > 1.0 + cfg.stop_feas_tol;
  if (!violated) {
    state.finished = true;
  } else {
    const PointSet fresh = refine_grid(state, op, found.points, cfg.grid_merge_radius * diam);
    row.added = fresh.cols();
    state.added_points.push_back(fresh);
    if (fresh.cols() == 0 && cfg.stop_when_stalled) state.finished = true;
  }
  if (cfg.stop_on_solver_failure && !rep.converged) state.finished = true;

  state.history.push_back(row);
  ++state.k;
  return state;
}

ExchangeResult run_exchange(const Problem& problem, const ExchangeConfig& cfg, const Reference* reference) {
  ExchangeResult out;
  ExchangeState state = init_exchange(problem, cfg);
  while (!state.finished && state.k < cfg.max_iter) {
    state = exchange_step(std::move(state), problem, cfg, reference);
    out.duals.push_back(state.dual);
    out.hat_measures.push_back(state.hat_measure);
    out.maximizers.push_back(state.maximizers.points);
  }
  out.measure = merge_atoms(state.measure, cfg.output_merge_radius * problem.domain().diameter(), 0.0);
  out.dual = state.dual;
  out.history = state.history;
  out.flagged = state.flagged;
  out.final_state = std::move(state);
  return out;
}

}  // namespace tvx
