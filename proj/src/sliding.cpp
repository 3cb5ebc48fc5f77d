#include "tvx/sliding.hpp"

#include "tvx/linalg.hpp"

#include <algorithm>
#include <limits>

namespace tvx {

void SlideConfig::validate() const {
  if (!(c1 > 0 && c1 < 0.5)) throw Error("SlideConfig: c1 must lie in (0, 0.5)");
  if (!(c2 > c1 && c2 < 1)) throw Error("SlideConfig: c2 must lie in (c1, 1)");
  if (!(grad_tol >= 0)) throw Error("SlideConfig: grad_tol must be non-negative");
  if (!(eps_amp >= 0)) throw Error("SlideConfig: eps_amp must be non-negative");
}

double objective_G(const Vector& alpha, const PointSet& X, const MeasurementOperator& op,
                   const QuadraticFidelity& f) {
  if (alpha.size() != X.cols()) throw Error("objective_G: amplitude and position counts differ");
  for (Index i = 0; i < X.cols(); ++i) op.domain().require(X.col(i), "objective_G");
  const Vector z = X.cols() > 0 ? Vector(op.design_matrix(X) * alpha) : Vector::Zero(op.channels());
  return alpha.lpNorm<1>() + f.value(z);
}

namespace {

struct Evaluation {
  double G = 0.0;
  GradientG grad;
};

Evaluation evaluate(const Vector& alpha, const PointSet& X, const MeasurementOperator& op,
                    const QuadraticFidelity& f, double eps_amp) {
  const Index p = alpha.size();
  const int d = op.dim();
  for (Index i = 0; i < p; ++i) {
    if (!(std::abs(alpha(i)) > eps_amp)) throw Error("gradient_G: nondifferentiable point (zero amplitude)");
  }
  const Matrix M = op.design_matrix(X);
  const Vector z = M * alpha;
  const Vector q = -f.gradient(z);
  const Vector cert = M.transpose() * q;
  const Vector dcert = op.design_jacobian(X).transpose() * q;

  Evaluation e;
  e.G = alpha.lpNorm<1>() + f.value(z);
  e.grad.d_amplitudes = alpha.array().sign() - cert.array();
  e.grad.d_positions.resize(d, p);
  for (Index i = 0; i < p; ++i) {
    for (int a = 0; a < d; ++a) e.grad.d_positions(a, i) = -alpha(i) * dcert(i * d + a);
  }
  return e;
}

double dot(const GradientG& g, const Vector& da, const PointSet& dx) {
  return g.d_amplitudes.dot(da) + (g.d_positions.array() * dx.array()).sum();
}

// Largest t keeping every |alpha_i + t da_i| >= 2 eps_amp on the current sign and every
// position inside a non-periodic box.
double max_step(const Parameterization& z, const Vector& da, const PointSet& dx, const Domain& domain,
                double eps_amp, bool& limited_by_amplitude) {
  double tmax = std::numeric_limits<double>::infinity();
  limited_by_amplitude = false;
  for (Index i = 0; i < da.size(); ++i) {
    const double a = z.amplitudes(i);
    if (a * da(i) < 0) {
      const double t = (std::abs(a) - 2 * eps_amp) / std::abs(da(i));
      if (t < tmax) {
        tmax = std::max(t, 0.0);
        limited_by_amplitude = true;
      }
    }
  }
  if (!domain.periodic) {
    for (Index i = 0; i < dx.cols(); ++i) {
      for (int a = 0; a < dx.rows(); ++a) {
        const double v = dx(a, i), x = z.positions(a, i);
        double t = std::numeric_limits<double>::infinity();
        if (v > 0) t = (domain.upper(a) - x) / v;
        if (v < 0) t = (domain.lower(a) - x) / v;
        if (t < tmax) {
          tmax = std::max(t, 0.0);
          limited_by_amplitude = false;
        }
      }
    }
  }
  return tmax;
}

Parameterization moved(const Parameterization& z, double t, const Vector& da, const PointSet& dx,
                       const Domain& domain) {
  Parameterization out = z;
  out.amplitudes += t * da;
  out.positions += t * dx;
  for (Index i = 0; i < out.positions.cols(); ++i) out.positions.col(i) = domain.canonical(out.positions.col(i));
  return out;
}

}  // namespace

GradientG gradient_G(const Vector& alpha, const PointSet& X, const MeasurementOperator& op,
                     const QuadraticFidelity& f, double eps_amp) {
  if (alpha.size() != X.cols()) throw Error("gradient_G: amplitude and position counts differ");
  for (Index i = 0; i < X.cols(); ++i) op.domain().require(X.col(i), "gradient_G");
  return evaluate(alpha, X, op, f, eps_amp).grad;
}

SlideResult run_sliding(const Parameterization& start, const MeasurementOperator& op, const QuadraticFidelity& f,
                        const SlideConfig& cfg) {
  cfg.validate();
  const Domain& domain = op.domain();
  if (start.dim() != op.dim()) throw Error("run_sliding: dimension mismatch");
  for (Index i = 0; i < start.size(); ++i) domain.require(start.positions.col(i), "run_sliding");

  SlideResult res;
  Parameterization z = start;
  if (z.empty()) {
    res.final = z;
    res.G_history.push_back(objective_G(z.amplitudes, z.positions, op, f));
    res.converged = true;
    res.message = "no atoms";
    return res;
  }
  Evaluation cur = evaluate(z.amplitudes, z.positions, op, f, cfg.eps_amp);
  res.G_history.push_back(cur.G);

  double prev_step = 0.0;
  Vector prev_da;
  PointSet prev_dx;
  GradientG prev_grad;

  int it = 0;
  while (true) {
    const double gnorm = cur.grad.norm();
    res.grad_norm = gnorm;
    if (gnorm <= cfg.grad_tol) {
      res.converged = true;
      break;
    }
    if (it >= cfg.max_iter) {
      res.message = "max_iter reached";
      break;
    }
    const Vector da = -cur.grad.d_amplitudes;
    const PointSet dx = -cur.grad.d_positions;
    const double slope0 = -gnorm * gnorm;

    // Short Barzilai-Borwein trial <s,y>/<y,y>, s the previous step and y the gradient change.
    // The long variant <s,s>/<s,y> fails the Armijo test far more often here.
    double t = 1.0 / std::max(gnorm, 1e-300);
    if (prev_step > 0) {
      const Vector ya = cur.grad.d_amplitudes - prev_grad.d_amplitudes;
      const PointSet yx = cur.grad.d_positions - prev_grad.d_positions;
      const double sy = prev_step * (ya.dot(prev_da) + (yx.array() * prev_dx.array()).sum());
      const double yy = ya.squaredNorm() + yx.squaredNorm();
      t = sy > 0 && yy > 0 ? sy / yy : 2 * prev_step;
    }
    bool amp_limited = false;
    const double tmax = max_step(z, da, dx, domain, cfg.eps_amp, amp_limited);
    t = std::min(t, tmax);

    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    int expansions = 0, bisections = 0;
    bool accepted = false, approximate = false, truncated = false;
    Parameterization trial;
    Evaluation next;
    while (true) {
      if (!(t > 0)) break;
      trial = moved(z, t, da, dx, domain);
      next = evaluate(trial.amplitudes, trial.positions, op, f, cfg.eps_amp);
      const double slope = dot(next.grad, da, dx);
      const bool armijo = next.G <= cur.G + cfg.c1 * t * slope0;
      const bool curvature = slope >= cfg.c2 * slope0;
      const double noise = cfg.rounding_tol * std::max(1.0, std::abs(cur.G));
      const bool lost_in_rounding = std::abs(next.G - cur.G) <= noise && slope <= (2 * cfg.c1 - 1) * slope0;
      // Accepted without a decrease that floating point can represent.
      const bool unresolved = !(next.G < cur.G);
      if (!armijo && !lost_in_rounding) {
        hi = t;
      } else if (!curvature) {
        lo = t;
        if (t >= tmax) {
          truncated = true;
          accepted = true;
          approximate = !armijo || unresolved;
          break;
        }
      } else {
        accepted = true;
        truncated = t >= tmax;
        approximate = !armijo || unresolved;
        break;
      }
      if (std::isfinite(hi)) {
        if (++bisections > cfg.max_bisections) break;
        t = 0.5 * (lo + hi);
      } else {
        if (++expansions > cfg.max_expansions) break;
        t = std::min(2 * t, tmax);
      }
    }
    if (!accepted) {
      res.flagged = true;
      res.message = "line search failed";
      break;
    }

    SlideStep rec;
    rec.iteration = it;
    rec.G = cur.G;
    rec.grad_norm = gnorm;
    rec.step = t;
    rec.slope = slope0;
    rec.G_next = next.G;
    rec.slope_next = dot(next.grad, da, dx);
    rec.approximate = approximate;
    rec.truncated = truncated;

    // Atoms whose amplitude floor set tmax; comparing values after the step is unreliable since
    // alpha + t da carries an absolute rounding error far above 2 eps_amp * 1e-9.
    std::vector<bool> blocking(z.size(), false);
    if (truncated && amp_limited) {
      for (Index i = 0; i < z.size(); ++i) {
        const double a = z.amplitudes(i);
        blocking[i] = a * da(i) < 0 && (std::abs(a) - 2 * cfg.eps_amp) / std::abs(da(i)) <= t * (1 + 1e-9);
      }
    }

    prev_step = t;
    prev_da = da;
    prev_dx = dx;
    prev_grad = cur.grad;
    z = std::move(trial);
    cur = std::move(next);

    if (truncated) {
      ++res.truncations;
      if (amp_limited) {
        Parameterization kept(op.dim());
        for (Index i = 0; i < z.size(); ++i) {
          if (!blocking[i]) kept.push_back(z.atom(i));
        }
        rec.dropped_atoms = static_cast<int>(z.size() - kept.size());
        if (rec.dropped_atoms > 0) {
          z = std::move(kept);
          prev_step = 0.0;
          if (z.empty()) {
            res.steps.push_back(rec);
            res.G_history.push_back(objective_G(z.amplitudes, z.positions, op, f));
            ++it;
            res.converged = true;
            res.message = "all atoms dropped";
            break;
          }
          cur = evaluate(z.amplitudes, z.positions, op, f, cfg.eps_amp);
        }
      }
    }
    res.steps.push_back(rec);
    res.G_history.push_back(cur.G);
    ++it;
  }
  res.iterations = it;
  res.final = z;
  return res;
}

TransitionReport transition_gram(const MeasurementOperator& op, const PointSet& xi) {
  if (xi.cols() == 0) throw Error("transition_gram: empty point set");
  const Index s = xi.cols();
  for (Index i = 0; i < s; ++i) {
    for (Index j = i + 1; j < s; ++j) {
      if ((xi.col(i) - xi.col(j)).norm() == 0.0) throw Error("transition_gram: repeated points");
    }
  }
  Matrix M2(op.channels(), s + s * op.dim());
  M2.leftCols(s) = op.design_matrix(xi);
  M2.rightCols(s * op.dim()) = op.design_jacobian(xi);
  TransitionReport rep;
  rep.T = M2.transpose() * M2;
  rep.T = 0.5 * (rep.T + rep.T.transpose()).eval();
  rep.Gamma = min_eigenvalue(rep.T);
  return rep;
}

std::vector<Index> match_atoms(const DiscreteMeasure& mu_tilde, const DiscreteMeasure& mu_star) {
  const Index s = mu_star.size();
  if (mu_tilde.size() != s) throw Error("match_atoms: atom counts differ");
  double min_sep = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < s; ++i) {
    for (Index j = i + 1; j < s; ++j) {
      min_sep = std::min(min_sep, (mu_star.positions.col(i) - mu_star.positions.col(j)).norm());
    }
  }
  struct Pair {
    double dist;
    Index star, tilde;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(s * s));
  for (Index i = 0; i < s; ++i) {
    for (Index j = 0; j < s; ++j) {
      pairs.push_back({(mu_star.positions.col(i) - mu_tilde.positions.col(j)).norm(), i, j});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.dist < b.dist; });
  std::vector<Index> match(static_cast<std::size_t>(s), -1);
  std::vector<bool> used(static_cast<std::size_t>(s), false);
  for (const Pair& pr : pairs) {
    if (match[pr.star] >= 0 || used[pr.tilde]) continue;
    if (pr.dist > 0.5 * min_sep) throw Error("match_atoms: match farther than half the minimal separation");
    match[pr.star] = pr.tilde;
    used[pr.tilde] = true;
  }
  return match;
}

AmplitudeBound amplitude_error_bound(const DiscreteMeasure& mu_tilde, const DiscreteMeasure& mu_star,
                                     const MeasurementOperator& op, const QuadraticFidelity& f,
                                     const OperatorConstants& constants, std::optional<double> J_star) {
  if (mu_star.empty()) throw Error("amplitude_error_bound: empty reference measure");
  const std::vector<Index> match = match_atoms(mu_tilde, mu_star);
  AmplitudeBound out;
  double diff_sq = 0.0;
  for (Index i = 0; i < mu_star.size(); ++i) {
    const Index j = match[i];
    diff_sq += std::pow(mu_tilde.amplitudes(j) - mu_star.amplitudes(i), 2);
    out.max_match_distance =
        std::max(out.max_match_distance, (mu_tilde.positions.col(j) - mu_star.positions.col(i)).norm());
  }
  out.lhs = std::sqrt(diff_sq);
  out.Gamma = transition_gram(op, mu_star.positions).Gamma;
  const double Jstar = J_star.value_or(tv_norm(mu_star) + f.value(op.forward(mu_star)));
  const double Jtilde = tv_norm(mu_tilde) + f.value(op.forward(mu_tilde));
  const double excess = std::max(0.0, Jtilde - Jstar);
  if (!(out.Gamma > 0)) {
    out.rhs = std::numeric_limits<double>::infinity();
    return out;
  }
  out.rhs = (constants.kappa_grad * tv_norm(mu_tilde) * out.max_match_distance +
             std::sqrt(2.0 / f.strong_convexity() * excess)) /
            std::sqrt(out.Gamma);
  return out;
}

}  // namespace tvx
