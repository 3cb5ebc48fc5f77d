#include "tvx/hybrid.hpp"

#include "tvx/finite_solver.hpp"

namespace tvx {

long count_atoms(const DiscreteMeasure& mu, double radius, double relative_prune) {
  if (mu.empty()) return 0;
  const DiscreteMeasure merged = merge_atoms(mu, radius, 0.0);
  if (merged.empty()) return 0;
  const double cut = relative_prune * merged.amplitudes.cwiseAbs().maxCoeff();
  return static_cast<long>((merged.amplitudes.array().abs() > cut).count());
}

HybridResult run_hybrid(const Problem& problem, const HybridConfig& cfg, const Reference* reference) {
  const MeasurementOperator& op = problem.op;
  const QuadraticFidelity& f = problem.fidelity;
  const double diam = problem.domain().diameter();
  ExchangeConfig xcfg = cfg.exchange;
  xcfg.solve_on_maximizers = true;

  HybridResult out;
  ExchangeState state = init_exchange(problem, xcfg);
  DiscreteMeasure best(op.dim());
  double best_J = f.value(Vector::Zero(op.channels()));
  auto offer = [&](const DiscreteMeasure& mu) {
    const double J = objective_J(mu, op, f);
    if (J < best_J) {
      best_J = J;
      best = mu;
    }
    return J;
  };

  MaximizerConfig mcfg = xcfg.extract.value_or(MaximizerConfig::defaults_for(problem.domain()));
  bool finished = false;
  while (!finished && state.k < xcfg.max_iter) {
    state = exchange_step(std::move(state), problem, xcfg, reference);
    MetricsRow& row = state.history.back();
    out.duals.push_back(state.dual);
    out.maximizers.push_back(state.maximizers.points);
    out.hat_measures.push_back(state.hat_measure);
    offer(state.measure);
    DiscreteMeasure reported = state.measure;
    const Maximizers& found = state.maximizers;
    const bool grid_optimal =
        found.points.cols() == 0 || found.values.maxCoeff() <= 1.0 + xcfg.stop_feas_tol;

    if (!grid_optimal) {
      const DiscreteMeasure start = prune_atoms(state.hat_measure, cfg.slide.eps_amp);
      if (cfg.slide_every && !start.empty()) {
        SlideResult slide = run_sliding(start, op, f, cfg.slide);
        if (slide.flagged) state.flagged = true;
        row.slide_iters = slide.iterations;
        const PointSet slid = slide.final.positions;
        if (cfg.refit && slid.cols() > 0) {
          const SolveReport rep = solve_lasso(op.design_matrix(slid), f, xcfg.solver);
          if (!rep.converged) state.flagged = true;
          reported = measure_from_grid(slid, rep.amplitudes, 0.0);
        } else {
          reported = slide.final;
        }
        row.post_slide_J = offer(reported);
        if (cfg.feed_back && slid.cols() > 0) {
          const PointSet fresh = refine_grid(state, op, slid, xcfg.grid_merge_radius * diam);
          row.added += fresh.cols();
          if (!state.added_points.empty()) {
            state.added_points.back() = concat_points(state.added_points.back(), fresh);
          }
        }
        out.slides.push_back(std::move(slide));
      }
    }
    row.atoms = count_atoms(reported, cfg.count_merge_radius * diam, cfg.count_prune);

    if (grid_optimal) {
      finished = true;
    } else {
      // Stopping rule evaluated with the dual of the best measure.
      mcfg.kappa_hess = state.kappa_hess;
      const Vector q = -f.gradient(op.forward(best));
      const Maximizers post = extract_maximizers(op, q, mcfg);
      const bool violated = post.points.cols() > 0 && post.values.maxCoeff() > 1.0 + xcfg.stop_feas_tol;
      finished = !violated || (row.added == 0 && xcfg.stop_when_stalled);
    }
    state.finished = finished;
  }
  out.measure = merge_atoms(best, xcfg.output_merge_radius * diam, 0.0);
  out.dual = -f.gradient(op.forward(best));
  out.history = state.history;
  out.flagged = state.flagged;
  out.final_state = std::move(state);
  return out;
}

}  // namespace tvx
