#pragma once

#include "tvx/measures.hpp"
#include "tvx/operators.hpp"

#include <cmath>
#include <vector>

namespace tvx {

/// Heuristic maximiser search: coarse scan, discrete peaks, local ascent, deduplication.
struct MaximizerConfig {
  int scan_n = 1024;              // points per axis of the coarse scan
  double eps1 = 0.1;              // discrete peaks kept when |A*q| > 1 - eps1
  double eps2 = 1e-4;             // ascended points dropped when |A*q| <= 1 - eps2
  double ascent_grad_tol = 1e-10;
  int ascent_max_steps = 200;
  double dedupe_radius = 1e-4;
  double kappa_hess = 0.0;        // curvature bound for the initial ascent step; <= 0 computes one

  /// 1024 scan points in 1D, 128 per axis in 2D, dedupe radius 1e-4 diam.
  static MaximizerConfig defaults_for(const Domain& domain);
};

struct Maximizers {
  PointSet points;      // sorted lexicographically
  Vector values;        // |A*q| at each point
  double sup_estimate = 0.0;  // max of |A*q| over the scan and the ascended points
  int unconverged = 0;  // candidates dropped because the ascent did not reach the tolerance
};

Maximizers extract_maximizers(const MeasurementOperator& op, const Vector& q, const MaximizerConfig& cfg);

/// Axis-aligned cube [lower, lower + side]^d.
struct Cell {
  Vector lower;
  double side = 0.0;

  int dim() const { return static_cast<int>(lower.size()); }
  double diameter() const { return side * std::sqrt(static_cast<double>(lower.size())); }
  Point center() const { return lower.array() + 0.5 * side; }
  Point vertex(unsigned corner) const;
  bool contains(const Eigen::Ref<const Point>& x, double slack = 0.0) const;
  std::vector<Cell> children() const;
};

/// Second-order Taylor sandwich I_minus <= sup_{x in cell} |A*q(x)| <= I_plus, anchored at
/// the cell vertices with curvature bound kappa_hess * |q|.
struct CellBounds {
  double lower = 0.0;
  double upper = 0.0;
};

CellBounds cell_bounds(const MeasurementOperator& op, const Vector& q, const Cell& cell, double kappa_hess);

/// Cubes of side `side` tiling the domain box (the box widths must be multiples of it).
std::vector<Cell> tile_domain(const Domain& domain, double side);

struct CertifiedCells {
  std::vector<Cell> confirmed;   // diam <= diam_tol, I_minus >= 1, may hold a critical point
  std::vector<Cell> undecided;   // diam <= diam_tol, I_minus < 1 < I_plus + margin, may hold a critical point
  std::vector<Cell> noncritical; // may exceed 1 but provably hold no critical point
  long cells_visited = 0;
};

/// Thrown when the branch-and-bound exceeds its cell budget; carries what was found so far.
class CellBudgetExceeded : public Error {
 public:
  CellBudgetExceeded(CertifiedCells partial_result)
      : Error("certified_maximizers: cell budget exceeded"), partial(std::move(partial_result)) {}
  CertifiedCells partial;
};

/// Branch-and-bound over cells. A cell is discarded when I_plus <= 1 - margin, set aside
/// as noncritical when |grad A*q(center)| > kappa_hess |q| diam / 2, and subdivided
/// otherwise until its diameter reaches diam_tol. Every x with |A*q(x)| >= 1 lies in a
/// returned cell.
CertifiedCells certified_maximizers(const MeasurementOperator& op, const Vector& q,
                                    const std::vector<Cell>& start_cells, double kappa_hess, double diam_tol,
                                    double margin, long max_cells = 4'000'000);

/// Maximiser extraction seeded from the certified cells instead of the coarse scan.
Maximizers certified_extract(const MeasurementOperator& op, const Vector& q, const MaximizerConfig& cfg,
                             double kappa_hess, double diam_tol, double margin);

struct NondegeneracyReport {
  Vector curvature;   // smallest eigenvalue of -sgn(A*q)(A*q)'' at each spike
  double gamma_hat = 0.0;
  double tau0_hat = 0.0;
  int saturation_points = 0;  // far samples with |A*q| >= 1 - 1e-6
  bool nondegenerate() const { return gamma_hat > 0 && tau0_hat > 0; }
};

NondegeneracyReport nondegeneracy_report(const MeasurementOperator& op, const Vector& q_star, const PointSet& xi,
                                         const std::vector<double>& tau_grid, int scan_n = 0);

}  // namespace tvx
