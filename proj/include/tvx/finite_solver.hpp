#pragma once

#include "tvx/fidelity.hpp"
#include "tvx/measures.hpp"
#include "tvx/operators.hpp"

#include <cmath>
#include <cstdint>
#include <optional>

namespace tvx {

/// Prox of t|.|.
template <typename Scalar>
Scalar soft_threshold(Scalar v, Scalar t) {
  if (t < Scalar(0)) throw Error("soft_threshold: threshold must be non-negative");
  const Scalar mag = std::abs(v) - t;
  return mag > Scalar(0) ? std::copysign(mag, v) : Scalar(0);
}

/// The discretised primal  min_a |a|_1 + f(M a)  over a fixed point set.
struct FiniteProblem {
  PointSet positions;
  MeasurementOperator op;
  QuadraticFidelity fidelity;
};

struct SolverOptions {
  double tol = 1e-9;
  int max_iter = 200000;
  int power_iterations = 100;
  std::uint64_t seed = 0x5eed;
  int check_every = 10;
  // Re-solve the signed least-squares system on the current support and keep it when
  // it certifies a smaller duality gap.
  bool polish = true;
  int polish_every = 200;
};

struct SolveReport {
  Vector amplitudes;
  Vector dual;           // -grad f(M a), used for maximiser extraction
  Vector dual_feasible;  // dual / max(1, |M^T dual|_inf), used for bounds
  double primal_value = 0.0;
  double dual_value = 0.0;  // -f*(-dual_feasible)
  double gap = 0.0;
  int iterations = 0;
  double kkt_inf_norm = 0.0;
  double sign_residual = 0.0;
  bool converged = false;
};

struct KktResiduals {
  double feasibility_excess = 0.0;  // max(0, |M^T q|_inf - 1)
  double sign_residual = 0.0;       // max over active i of |<A(x_i), q> - sgn(a_i)|
  double gradient_link = 0.0;       // |q + grad f(M a)|_2
};

/// Accelerated proximal gradient (monotone FISTA with function-value restart) on the
/// given design matrix; `warm` optionally seeds the amplitudes.
SolveReport solve_lasso(const Matrix& design, const QuadraticFidelity& f, const SolverOptions& opts = {},
                        const Vector* warm = nullptr);

SolveReport solve_finite(const FiniteProblem& p, double tol = 1e-9, int max_iter = 200000);
SolveReport solve_finite(const FiniteProblem& p, const SolverOptions& opts, const Vector* warm = nullptr);

KktResiduals kkt_report(const Matrix& design, const QuadraticFidelity& f, const Vector& amplitudes,
                        const Vector& q, double active_threshold = 0.0);
KktResiduals kkt_report(const FiniteProblem& p, const Vector& amplitudes, const Vector& q);

/// J(mu) + f*(-q), the gap for a dual vector in the q = -grad f convention.
double duality_gap(const DiscreteMeasure& mu, const Vector& q, const MeasurementOperator& op,
                   const QuadraticFidelity& f);

/// J(mu) = |mu|_TV + f(A mu).
double objective_J(const DiscreteMeasure& mu, const MeasurementOperator& op, const QuadraticFidelity& f);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from a seeded start.
double power_iteration(const Matrix& gram, int iterations, std::uint64_t seed);

}  // namespace tvx
