#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace tvx {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// A point of R^d.
using Point = Eigen::VectorXd;

/// Finite ordered point set stored column-wise: a d x n matrix, one column per point.
using PointSet = Eigen::MatrixXd;

/// Raised when an operation is called outside its contract (bad sizes, empty sets,
/// points outside the domain, ...).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned box. A periodic domain is treated as a torus: coordinates are taken
/// modulo the box width.
struct Domain {
  Vector lower;
  Vector upper;
  bool periodic = false;

  Domain() = default;
  Domain(Vector lo, Vector hi, bool is_periodic = false);

  static Domain unit_torus();
  static Domain square(double lo, double hi);

  int dim() const { return static_cast<int>(lower.size()); }
  Vector width() const { return upper - lower; }
  double diameter() const { return width().norm(); }

  bool contains(const Eigen::Ref<const Point>& x, double slack = 1e-12) const;

  /// Maps x into the box: modulo the width on a torus, clamped otherwise.
  Point canonical(const Eigen::Ref<const Point>& x) const;

  /// Shortest displacement from a to b (torus-aware).
  Point displacement(const Eigen::Ref<const Point>& a, const Eigen::Ref<const Point>& b) const;

  /// Throws Error when x is outside the closed box.
  void require(const Eigen::Ref<const Point>& x, const char* what) const;
};

struct Atom {
  Point position;
  double amplitude = 0.0;
};

/// Finite sum of weighted Dirac masses, sum_i a_i delta_{x_i}.
struct DiscreteMeasure {
  PointSet positions;  // d x s
  Vector amplitudes;   // s

  DiscreteMeasure() = default;
  explicit DiscreteMeasure(int dim) : positions(dim, 0), amplitudes(0) {}
  DiscreteMeasure(PointSet pos, Vector amp);

  Index size() const { return amplitudes.size(); }
  int dim() const { return static_cast<int>(positions.rows()); }
  bool empty() const { return size() == 0; }

  Atom atom(Index i) const { return {positions.col(i), amplitudes(i)}; }
  void push_back(const Atom& a);
};

/// Total variation of an atomic measure: the l1 norm of its amplitudes.
template <typename Derived>
typename Derived::Scalar tv_norm(const Eigen::MatrixBase<Derived>& amplitudes) {
  return amplitudes.template lpNorm<1>();
}

double tv_norm(const DiscreteMeasure& mu);

/// One-sided set distance: max over q in `to` of min over p in `from` of |p - q|_2.
/// It is not symmetric. Both sets must be non-empty and of equal dimension.
double set_distance(const PointSet& from, const PointSet& to);

/// Euclidean distance from x to the closest column of `set` (+inf when the set is empty).
double distance_to_set(const PointSet& set, const Eigen::Ref<const Point>& x);

/// Greedily unions atoms that lie within `radius` of each other until no pair is closer
/// than `radius`. Merged atoms carry the summed amplitude and the |amplitude|-weighted
/// mean position. Atoms with |amplitude| <= prune are dropped afterwards.
DiscreteMeasure merge_atoms(const DiscreteMeasure& mu, double radius, double prune = 1e-12);

/// Drops atoms with |amplitude| <= threshold.
DiscreteMeasure prune_atoms(const DiscreteMeasure& mu, double threshold);

/// Appends the columns of `extra` to `base`.
PointSet concat_points(const PointSet& base, const PointSet& extra);

/// Uniform tensor grid with n points per axis. On a torus the upper face is excluded
/// ({lo, lo + w/n, ...}); on a box both faces are included.
PointSet uniform_grid(const Domain& domain, int n);

/// Sorts columns lexicographically.
PointSet sorted_points(const PointSet& points);

}  // namespace tvx
