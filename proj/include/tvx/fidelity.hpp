#pragma once

#include "tvx/measures.hpp"

namespace tvx {

/// f(z) = (L/2) |z - y|^2. Its gradient is L-Lipschitz and f is L-strongly convex.
struct QuadraticFidelity {
  Vector y;
  double L = 1.0;

  QuadraticFidelity() = default;
  QuadraticFidelity(Vector data, double weight);

  Index size() const { return y.size(); }
  double lipschitz() const { return L; }
  double strong_convexity() const { return L; }

  double value(const Vector& z) const;
  Vector gradient(const Vector& z) const;

  /// f*(q) = <q, y> + |q|^2 / (2L).
  double conjugate(const Vector& q) const;

  /// q = -grad f(z).
  Vector dual_candidate(const Vector& z) const;

  /// Dual objective -f*(-q) for a dual vector in the q = -grad f convention, so that
  /// J(mu) >= dual_objective(q) whenever |A*q| <= 1, with equality at the optimum.
  double dual_objective(const Vector& q) const { return -conjugate(-q); }

  /// Minimiser of f*, -L y.
  Vector prox_center() const { return -L * y; }

  /// Bound on every discrete dual solution: sqrt(2L (f*(0) - f*(qbar))) + |qbar|.
  double dual_radius() const;

  /// sqrt(-L <grad f*(p), p>) at p = -q_star, the conjugate's argument in the
  /// q = -grad f convention; NaN when the inner product is positive.
  double rho(const Vector& q_star) const;
};

struct FidelityEval {
  double value = 0.0;
  Vector gradient;
};

FidelityEval fidelity_eval(const QuadraticFidelity& f, const Vector& z);

}  // namespace tvx
