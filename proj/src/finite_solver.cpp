#include "tvx/finite_solver.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <initializer_list>
#include <limits>
#include <random>
#include <vector>

namespace tvx {

double power_iteration(const Matrix& gram, int iterations, std::uint64_t seed) {
  const Index p = gram.rows();
  if (p == 0) return 0.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Vector v(p);
  for (Index i = 0; i < p; ++i) v(i) = normal(rng);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const Vector w = gram * v;
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    lambda = v.dot(w);
    v = w / nrm;
  }
  return std::max(lambda, (gram * v).norm());
}

namespace {

// Objective pieces of the Gram-form problem, all O(p) once G x is known.
struct GramForm {
  const Matrix& G;
  const Vector& b;
  double yy;
  double L;

  double residual_sq(const Vector& x, const Vector& Gx) const {
    return std::max(0.0, x.dot(Gx) - 2 * b.dot(x) + yy);
  }
  double objective(const Vector& x, const Vector& Gx) const {
    return x.lpNorm<1>() + 0.5 * L * residual_sq(x, Gx);
  }
  // Primal value minus the dual objective at the rescaled dual candidate.
  double gap(const Vector& x, const Vector& Gx, double primal) const {
    const double scale = std::max(1.0, (L * (Gx - b)).lpNorm<Eigen::Infinity>());
    const double qy = -L * (b.dot(x) - yy);
    const double qq = L * L * residual_sq(x, Gx);
    return primal - qy / scale + qq / (2 * L * scale * scale);
  }
};

// Objective and gradient evaluated from the residual, not the Gram form, so that
// differences near the optimum stay above rounding.
struct DirectForm {
  const Matrix& M;
  const Vector& y;
  double L;

  Vector residual(const Vector& x) const {
    Vector r = -y;
    for (Index i = 0; i < x.size(); ++i) {
      if (x(i) != 0.0) r.noalias() += x(i) * M.col(i);
    }
    return r;
  }
  double objective(const Vector& x) const { return x.lpNorm<1>() + 0.5 * L * residual(x).squaredNorm(); }
};

// Feature-sign search from x: solve on the active set with frozen signs, line search
// through the sign changes, add the most violating zero coordinate. Near-duplicate
// columns make G_S singular; there the step is a pseudo-inverse Newton step plus, when
// the gradient has a null-space part, a linear descent to the next zero crossing.
Vector feature_sign(const Matrix& G, const DirectForm& form, const Vector& x0, int max_steps) {
  const double L = form.L;
  const Index p = x0.size();
  Vector x = x0;
  double Fx = form.objective(x);
  std::vector<double> theta(p, 0.0);
  for (Index i = 0; i < p; ++i) theta[i] = x(i) > 0 ? 1.0 : (x(i) < 0 ? -1.0 : 0.0);

  bool resolved = false;
  for (int step = 0; step < max_steps; ++step) {
    const Vector g = L * (form.M.transpose() * form.residual(x));
    double active_res = 0.0;
    for (Index i = 0; i < p; ++i) {
      if (x(i) != 0.0) active_res = std::max(active_res, std::abs(g(i) + theta[i]));
    }
    // An active set that cannot be solved more accurately counts as solved.
    if (active_res <= 1e-12 || resolved) {
      Index worst = -1;
      double viol = 1.0 + 1e-12;
      for (Index i = 0; i < p; ++i) {
        if (x(i) == 0.0 && std::abs(g(i)) > viol) {
          viol = std::abs(g(i));
          worst = i;
        }
      }
      if (worst < 0) break;
      theta[worst] = g(worst) > 0 ? -1.0 : 1.0;
      resolved = false;
    } else {
      resolved = true;
    }
    std::vector<Index> S;
    for (Index i = 0; i < p; ++i) {
      if (theta[i] != 0.0) S.push_back(i);
    }
    const Index s = static_cast<Index>(S.size());
    Matrix Gs(s, s);
    Vector h(s), xs(s);
    for (Index i = 0; i < s; ++i) {
      for (Index j = 0; j < s; ++j) Gs(i, j) = G(S[i], S[j]);
      h(i) = (g(S[i]) + theta[S[i]]) / L;
      xs(i) = x(S[i]);
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(Gs);
    if (eig.info() != Eigen::Success) break;
    const Vector& lam = eig.eigenvalues();
    const Matrix& V = eig.eigenvectors();
    const double cut = 1e-12 * std::max(lam.maxCoeff(), 0.0);
    const Vector hv = V.transpose() * h;
    Vector newton = Vector::Zero(s), null_part = Vector::Zero(s);
    for (Index j = 0; j < s; ++j) {
      if (lam(j) > cut) {
        newton -= (hv(j) / lam(j)) * V.col(j);
      } else {
        null_part += hv(j) * V.col(j);
      }
    }

    struct Candidate {
      const Vector* dir;
      double t;
      Index zero;
    };
    std::vector<Candidate> cands{{&newton, 1.0, -1}};
    const Vector descent = -null_part;
    for (const Vector* dir : std::initializer_list<const Vector*>{&newton, &descent}) {
      for (Index i = 0; i < s; ++i) {
        const double a = xs(i), d = (*dir)(i);
        if (a != 0.0 && d != 0.0 && (a > 0) != (d > 0)) cands.push_back({dir, -a / d, S[i]});
      }
    }
    const double noise = 1e-14 * (1 + std::abs(Fx));
    Vector best_x = x;
    double best_F = std::numeric_limits<double>::infinity();
    Index best_zero = -1;
    for (const Candidate& c : cands) {
      Vector xt = x;
      for (Index i = 0; i < s; ++i) xt(S[i]) = xs(i) + c.t * (*c.dir)(i);
      if (c.zero >= 0) xt(c.zero) = 0.0;
      const double Ft = form.objective(xt);
      if (Ft < best_F) {
        best_F = Ft;
        best_x = std::move(xt);
        best_zero = c.zero;
      }
    }
    if (!(best_F <= Fx + noise)) {
      if (resolved) continue;
      break;
    }
    x = std::move(best_x);
    Fx = best_F;
    if (best_zero >= 0) resolved = false;
    for (Index i = 0; i < p; ++i) {
      if (x(i) == 0.0) theta[i] = 0.0;
    }
  }
  return x;
}

}  // namespace

SolveReport solve_lasso(const Matrix& design, const QuadraticFidelity& f, const SolverOptions& opts,
                        const Vector* warm) {
  if (!(opts.tol > 0)) throw Error("solve_finite: tol must be positive");
  if (design.rows() != f.size()) throw Error("solve_finite: design and data sizes differ");
  const Index p = design.cols();
  const double L = f.L;

  const Matrix G = design.transpose() * design;
  const Vector b = design.transpose() * f.y;
  const GramForm form{G, b, f.y.squaredNorm(), L};
  const DirectForm direct{design, f.y, L};

  // 1% margin on the power-iteration estimate, which can only undershoot.
  const double lip = 1.01 * L * power_iteration(G, opts.power_iterations, opts.seed);
  const double step = lip > 0 ? 1.0 / lip : 1.0;

  Vector x = Vector::Zero(p);
  if (warm != nullptr) {
    if (warm->size() != p) throw Error("solve_finite: warm start has the wrong length");
    x = *warm;
  }
  Vector Gx = G * x;
  double Fx = form.objective(x, Gx);
  if (warm != nullptr) {
    const double F0 = form.objective(Vector::Zero(p), Vector::Zero(p));
    if (F0 < Fx) {
      x.setZero();
      Gx.setZero();
      Fx = F0;
    }
  }
  Vector ym = x, Gy = Gx;
  double t = 1.0;
  bool plain_step = true;

  const double inner_tol = 0.5 * opts.tol;
  int it = 0;
  bool done = form.gap(x, Gx, Fx) <= inner_tol * (1 + std::abs(Fx));
  while (!done && it < opts.max_iter) {
    ++it;
    const Vector z = ym - step * L * (Gy - b);
    Vector xn = z.unaryExpr([&](double v) { return soft_threshold(v, step); });
    Vector Gxn = G * xn;
    const double Fn = form.objective(xn, Gxn);
    if (Fn > Fx + 1e-15 * std::abs(Fx) && !plain_step) {
      ym = x;
      Gy = Gx;
      t = 1.0;
      plain_step = true;
    } else {
      plain_step = false;
      const double tn = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
      const double beta = (t - 1) / tn;
      if (Fn <= Fx) {
        ym = xn + beta * (xn - x);
        Gy = Gxn + beta * (Gxn - Gx);
        x = std::move(xn);
        Gx = std::move(Gxn);
        Fx = Fn;
      } else {
        // Monotone variant: keep x, extrapolate towards the rejected point.
        ym = x + (t / tn) * (xn - x);
        Gy = Gx + (t / tn) * (Gxn - Gx);
      }
      t = tn;
    }

    if (opts.polish && (it % opts.polish_every == 0 || it == opts.check_every)) {
      Vector xp = feature_sign(G, direct, x, 4 * static_cast<int>(p) + 20);
      const Vector Gxp = G * xp;
      const double Fp = form.objective(xp, Gxp);
      if (direct.objective(xp) < direct.objective(x) || form.gap(xp, Gxp, Fp) < form.gap(x, Gx, Fx)) {
        x = std::move(xp);
        Gx = Gxp;
        Fx = Fp;
        ym = x;
        Gy = Gx;
        t = 1.0;
        plain_step = true;
        done = form.gap(x, Gx, Fx) <= inner_tol * (1 + std::abs(Fx));
        if (done) break;
      }
    }
    if (it % opts.check_every == 0) {
      done = form.gap(x, Gx, Fx) <= inner_tol * (1 + std::abs(Fx));
    }
  }

  SolveReport rep;
  rep.iterations = it;
  rep.amplitudes = x;
  const Vector residual = design * x - f.y;
  rep.dual = -L * residual;
  rep.primal_value = x.lpNorm<1>() + 0.5 * L * residual.squaredNorm();
  const Vector corr = design.transpose() * rep.dual;
  const double sup = p > 0 ? corr.lpNorm<Eigen::Infinity>() : 0.0;
  rep.dual_feasible = rep.dual / std::max(1.0, sup);
  rep.dual_value = f.dual_objective(rep.dual_feasible);
  rep.gap = rep.primal_value - rep.dual_value;
  const KktResiduals kkt = kkt_report(design, f, x, rep.dual);
  rep.kkt_inf_norm = kkt.feasibility_excess;
  rep.sign_residual = kkt.sign_residual;
  rep.converged = rep.gap <= opts.tol * (1 + std::abs(rep.primal_value));
  return rep;
}

SolveReport solve_finite(const FiniteProblem& p, double tol, int max_iter) {
  SolverOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve_finite(p, opts);
}

SolveReport solve_finite(const FiniteProblem& p, const SolverOptions& opts, const Vector* warm) {
  if (p.positions.cols() == 0) throw Error("solve_finite: empty point set");
  return solve_lasso(p.op.design_matrix(p.positions), p.fidelity, opts, warm);
}

KktResiduals kkt_report(const Matrix& design, const QuadraticFidelity& f, const Vector& amplitudes,
                        const Vector& q, double active_threshold) {
  KktResiduals r;
  const Vector corr = design.transpose() * q;
  if (corr.size() > 0) r.feasibility_excess = std::max(0.0, corr.lpNorm<Eigen::Infinity>() - 1.0);
  for (Index i = 0; i < amplitudes.size(); ++i) {
    if (std::abs(amplitudes(i)) > active_threshold) {
      r.sign_residual = std::max(r.sign_residual, std::abs(corr(i) - std::copysign(1.0, amplitudes(i))));
    }
  }
  r.gradient_link = (q + f.gradient(design * amplitudes)).norm();
  return r;
}

KktResiduals kkt_report(const FiniteProblem& p, const Vector& amplitudes, const Vector& q) {
  return kkt_report(p.op.design_matrix(p.positions), p.fidelity, amplitudes, q);
}

double objective_J(const DiscreteMeasure& mu, const MeasurementOperator& op, const QuadraticFidelity& f) {
  return tv_norm(mu) + f.value(op.forward(mu));
}

double duality_gap(const DiscreteMeasure& mu, const Vector& q, const MeasurementOperator& op,
                   const QuadraticFidelity& f) {
  return objective_J(mu, op, f) - f.dual_objective(q);
}

}  // namespace tvx
