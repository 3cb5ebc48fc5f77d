#include "tvx/measures.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace tvx {

Domain::Domain(Vector lo, Vector hi, bool is_periodic)
    : lower(std::move(lo)), upper(std::move(hi)), periodic(is_periodic) {
  if (lower.size() != upper.size() || lower.size() == 0) {
    throw Error("domain: bounds must be non-empty and of equal dimension");
  }
  if ((upper.array() <= lower.array()).any()) {
    throw Error("domain: lower bound must be strictly below upper bound on every axis");
  }
}

Domain Domain::unit_torus() {
  return Domain(Vector::Zero(1), Vector::Ones(1), true);
}

Domain Domain::square(double lo, double hi) {
  return Domain(Vector::Constant(2, lo), Vector::Constant(2, hi), false);
}

bool Domain::contains(const Eigen::Ref<const Point>& x, double slack) const {
  if (x.size() != lower.size() || !x.allFinite()) return false;
  return ((x.array() >= lower.array() - slack) && (x.array() <= upper.array() + slack)).all();
}

Point Domain::canonical(const Eigen::Ref<const Point>& x) const {
  Point out = x;
  for (Index i = 0; i < out.size(); ++i) {
    if (periodic) {
      const double w = upper(i) - lower(i);
      double t = std::fmod(out(i) - lower(i), w);
      if (t < 0) t += w;
      if (t >= w) t = 0;
      out(i) = lower(i) + t;
    } else {
      out(i) = std::clamp(out(i), lower(i), upper(i));
    }
  }
  return out;
}

Point Domain::displacement(const Eigen::Ref<const Point>& a, const Eigen::Ref<const Point>& b) const {
  Point d = b - a;
  if (periodic) {
    for (Index i = 0; i < d.size(); ++i) {
      const double w = upper(i) - lower(i);
      d(i) -= w * std::round(d(i) / w);
    }
  }
  return d;
}

void Domain::require(const Eigen::Ref<const Point>& x, const char* what) const {
  if (!contains(x)) {
    throw Error(std::string(what) + ": point outside the domain");
  }
}

DiscreteMeasure::DiscreteMeasure(PointSet pos, Vector amp)
    : positions(std::move(pos)), amplitudes(std::move(amp)) {
  if (positions.cols() != amplitudes.size()) {
    throw Error("measure: position and amplitude counts differ");
  }
}

void DiscreteMeasure::push_back(const Atom& a) {
  if (positions.rows() == 0 && positions.cols() == 0) positions.resize(a.position.size(), 0);
  if (a.position.size() != positions.rows()) throw Error("measure: atom dimension mismatch");
  const Index n = size();
  positions.conservativeResize(Eigen::NoChange, n + 1);
  amplitudes.conservativeResize(n + 1);
  positions.col(n) = a.position;
  amplitudes(n) = a.amplitude;
}

double tv_norm(const DiscreteMeasure& mu) { return tv_norm(mu.amplitudes); }

double distance_to_set(const PointSet& set, const Eigen::Ref<const Point>& x) {
  if (set.cols() == 0) return std::numeric_limits<double>::infinity();
  return (set.colwise() - x).colwise().norm().minCoeff();
}

double set_distance(const PointSet& from, const PointSet& to) {
  if (from.cols() == 0 || to.cols() == 0) {
    throw Error("set_distance: both point sets must be non-empty");
  }
  if (from.rows() != to.rows()) throw Error("set_distance: dimension mismatch");
  double worst = 0.0;
  for (Index j = 0; j < to.cols(); ++j) {
    worst = std::max(worst, distance_to_set(from, to.col(j)));
  }
  return worst;
}

namespace {

// One greedy pass: each unassigned atom seeds a cluster of all later unassigned atoms
// within radius of it. Returns true when something was merged.
bool merge_pass(DiscreteMeasure& mu, double radius) {
  const Index n = mu.size();
  std::vector<bool> used(n, false);
  DiscreteMeasure out(mu.dim());
  bool merged = false;
  for (Index i = 0; i < n; ++i) {
    if (used[i]) continue;
    used[i] = true;
    std::vector<Index> cluster{i};
    for (Index j = i + 1; j < n; ++j) {
      if (!used[j] && (mu.positions.col(j) - mu.positions.col(i)).norm() <= radius) {
        used[j] = true;
        cluster.push_back(j);
      }
    }
    if (cluster.size() == 1) {
      out.push_back(mu.atom(i));
      continue;
    }
    merged = true;
    double amp = 0.0, weight = 0.0;
    Point pos = Point::Zero(mu.dim());
    for (Index c : cluster) {
      amp += mu.amplitudes(c);
      weight += std::abs(mu.amplitudes(c));
      pos += std::abs(mu.amplitudes(c)) * mu.positions.col(c);
    }
    if (weight > 0) {
      pos /= weight;
    } else {
      pos.setZero();
      for (Index c : cluster) pos += mu.positions.col(c);
      pos /= static_cast<double>(cluster.size());
    }
    out.push_back({pos, amp});
  }
  mu = std::move(out);
  return merged;
}

}  // namespace

DiscreteMeasure merge_atoms(const DiscreteMeasure& mu, double radius, double prune) {
  if (radius < 0) throw Error("merge_atoms: radius must be non-negative");
  DiscreteMeasure out = mu;
  while (merge_pass(out, radius)) {
  }
  return prune_atoms(out, prune);
}

DiscreteMeasure prune_atoms(const DiscreteMeasure& mu, double threshold) {
  DiscreteMeasure out(mu.dim());
  for (Index i = 0; i < mu.size(); ++i) {
    if (std::abs(mu.amplitudes(i)) > threshold) out.push_back(mu.atom(i));
  }
  return out;
}

PointSet concat_points(const PointSet& base, const PointSet& extra) {
  if (base.cols() == 0) return extra;
  if (extra.cols() == 0) return base;
  if (base.rows() != extra.rows()) throw Error("concat_points: dimension mismatch");
  PointSet out(base.rows(), base.cols() + extra.cols());
  out << base, extra;
  return out;
}

PointSet uniform_grid(const Domain& domain, int n) {
  if (n < 1) throw Error("uniform_grid: need at least one point per axis");
  const int d = domain.dim();
  std::vector<Vector> axes(d);
  for (int a = 0; a < d; ++a) {
    axes[a].resize(n);
    const double lo = domain.lower(a), w = domain.upper(a) - lo;
    for (int i = 0; i < n; ++i) {
      axes[a](i) = domain.periodic ? lo + w * i / n : (n == 1 ? lo + w / 2 : lo + w * i / (n - 1));
    }
  }
  Index total = 1;
  for (int a = 0; a < d; ++a) total *= n;
  PointSet out(d, total);
  for (Index idx = 0; idx < total; ++idx) {
    Index rem = idx;
    for (int a = d - 1; a >= 0; --a) {
      out(a, idx) = axes[a](rem % n);
      rem /= n;
    }
  }
  return out;
}

PointSet sorted_points(const PointSet& points) {
  std::vector<Index> order(points.cols());
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    for (Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return a < b;
  });
  PointSet out(points.rows(), points.cols());
  for (Index j = 0; j < points.cols(); ++j) out.col(j) = points.col(order[j]);
  return out;
}

}  // namespace tvx
