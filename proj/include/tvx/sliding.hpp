#pragma once

#include "tvx/fidelity.hpp"
#include "tvx/measures.hpp"
#include "tvx/operators.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tvx {

/// Amplitudes and positions (alpha, X) of p atoms.
using Parameterization = DiscreteMeasure;

struct SlideConfig {
  double c1 = 1e-4;
  double c2 = 0.9;
  double grad_tol = 1e-10;
  int max_iter = 10000;
  int max_expansions = 60;
  int max_bisections = 100;
  double eps_amp = 1e-12;
  // Relative size below which a change of G is treated as rounding noise; steps that pass
  // the curvature test but whose decrease is lost in rounding are accepted as approximate.
  double rounding_tol = 1e-14;

  void validate() const;
};

/// G(alpha, X) = |alpha|_1 + f(sum_i alpha_i A(x_i)). Atoms are not merged.
double objective_G(const Vector& alpha, const PointSet& X, const MeasurementOperator& op, const QuadraticFidelity& f);

struct GradientG {
  Vector d_amplitudes;  // p
  PointSet d_positions; // d x p

  double norm() const { return std::sqrt(d_amplitudes.squaredNorm() + d_positions.squaredNorm()); }
};

/// (sgn alpha - A*q(X), -alpha_i (A*q)'(x_i)) with q = -grad f(A mu). Throws when some
/// |alpha_i| <= eps_amp.
GradientG gradient_G(const Vector& alpha, const PointSet& X, const MeasurementOperator& op,
                     const QuadraticFidelity& f, double eps_amp = 1e-12);

/// One accepted line-search step.
struct SlideStep {
  int iteration = 0;
  double G = 0.0;          // before the step
  double grad_norm = 0.0;  // before the step
  double step = 0.0;
  double slope = 0.0;      // <grad G, d> at t = 0
  double G_next = 0.0;
  double slope_next = 0.0; // <grad G(next), d>
  bool approximate = false;
  bool truncated = false;
  int dropped_atoms = 0;
};

struct SlideResult {
  Parameterization final;
  std::vector<double> G_history;  // G at the start and after each step
  std::vector<SlideStep> steps;
  int iterations = 0;
  double grad_norm = 0.0;
  bool converged = false;
  bool flagged = false;  // line search ran out of budget
  int truncations = 0;
  std::string message;
};

/// Gradient descent on G with a bracketing/bisection weak-Wolfe line search. The first
/// trial step is the short Barzilai-Borwein step of the previous iteration.
SlideResult run_sliding(const Parameterization& start, const MeasurementOperator& op, const QuadraticFidelity& f,
                        const SlideConfig& cfg = {});

struct TransitionReport {
  Matrix T;
  double Gamma = 0.0;
};

/// T = M2^T M2 with M2 = [A(xi_1) ... A(xi_s) | dA(xi_1) ... dA(xi_s)].
TransitionReport transition_gram(const MeasurementOperator& op, const PointSet& xi);

struct AmplitudeBound {
  double lhs = 0.0;
  double rhs = 0.0;
  double Gamma = 0.0;
  double max_match_distance = 0.0;
  bool holds() const { return lhs <= rhs; }
};

/// Atoms matched greedily by nearest position; throws if the counts differ or a match is
/// farther than half the minimal separation of mu_star.
std::vector<Index> match_atoms(const DiscreteMeasure& mu_tilde, const DiscreteMeasure& mu_star);

/// |alpha~ - alpha*|_2 <= Gamma^-1/2 (kappa_grad |mu~| max_l |xi_l - x~_l|
///                                   + sqrt((2/L)(J(mu~) - J*))).
/// J* defaults to J(mu_star).
AmplitudeBound amplitude_error_bound(const DiscreteMeasure& mu_tilde, const DiscreteMeasure& mu_star,
                                     const MeasurementOperator& op, const QuadraticFidelity& f,
                                     const OperatorConstants& constants, std::optional<double> J_star = std::nullopt);

}  // namespace tvx
