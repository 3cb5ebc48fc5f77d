#include "tvx/certificate.hpp"

#include "tvx/linalg.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>

namespace tvx {

MaximizerConfig MaximizerConfig::defaults_for(const Domain& domain) {
  MaximizerConfig cfg;
  cfg.scan_n = domain.dim() == 1 ? 1024 : 128;
  cfg.dedupe_radius = 1e-4 * domain.diameter();
  return cfg;
}

namespace {

std::vector<Vector> scan_axes(const Domain& domain, int n) {
  std::vector<Vector> axes(domain.dim());
  for (int a = 0; a < domain.dim(); ++a) {
    const double lo = domain.lower(a), hi = domain.upper(a);
    if (domain.periodic) {
      axes[a] = Vector::LinSpaced(n, 0, n - 1) * ((hi - lo) / n);
      axes[a].array() += lo;
    } else {
      axes[a] = Vector::LinSpaced(n, lo, hi);
    }
  }
  return axes;
}

// Flat indices of the scan points that strictly dominate all of their axis and diagonal
// neighbours and exceed `threshold` in absolute value.
std::vector<Index> discrete_peaks(const Vector& values, const Domain& domain, int n, double threshold) {
  const int d = domain.dim();
  std::vector<Index> peaks;
  const Index total = values.size();
  std::vector<int> idx(d);
  for (Index flat = 0; flat < total; ++flat) {
    const double v = std::abs(values(flat));
    if (v <= threshold) continue;
    Index rem = flat;
    for (int a = d - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % n);
      rem /= n;
    }
    bool peak = true;
    int offsets = 1;
    for (int a = 0; a < d; ++a) offsets *= 3;
    for (int o = 0; o < offsets && peak; ++o) {
      int code = o;
      bool self = true, valid = true;
      Index nb = 0;
      for (int a = 0; a < d; ++a) {
        const int delta = code % 3 - 1;
        code /= 3;
        if (delta != 0) self = false;
        int j = idx[a] + delta;
        if (domain.periodic) {
          j = (j + n) % n;
        } else if (j < 0 || j >= n) {
          valid = false;
        }
        nb = nb * n + j;
      }
      if (self || !valid || nb == flat) continue;
      if (std::abs(values(nb)) >= v) peak = false;
    }
    if (peak) peaks.push_back(flat);
  }
  return peaks;
}

Point scan_point(const std::vector<Vector>& axes, Index flat, int n) {
  const int d = static_cast<int>(axes.size());
  Point x(d);
  for (int a = d - 1; a >= 0; --a) {
    x(a) = axes[a](flat % n);
    flat /= n;
  }
  return x;
}

struct AscentResult {
  Point x;
  double value = 0.0;  // |A*q(x)|
  double grad_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool aborted = false;
};

// Ascent on sgn(A*q(x0)) A*q from x0: a Newton step when the Hessian is negative definite
// (capped at `max_newton`), otherwise gradient steps halved from `step0` until Armijo holds.
AscentResult ascend(const MeasurementOperator& op, const Vector& q, Point x, double step0, double grad_tol,
                    int max_steps, double max_newton) {
  const Domain& dom = op.domain();
  CertificateValue c = op.certificate(q, x, 2);
  const double sign = c.value >= 0 ? 1.0 : -1.0;
  AscentResult r;
  for (int step = 0;; ++step) {
    const double val = sign * c.value;
    const Vector g = sign * c.gradient;
    r.x = x;
    r.value = std::abs(c.value);
    r.grad_norm = g.norm();
    if (r.grad_norm <= grad_tol) {
      r.converged = true;
      return r;
    }
    if (step >= max_steps) return r;

    bool moved = false;
    const Matrix neg_h = -sign * c.hessian;
    Eigen::LLT<Matrix> llt(neg_h);
    if (llt.info() == Eigen::Success) {
      Vector dx = llt.solve(g);
      const double len = dx.norm();
      if (len > max_newton) dx *= max_newton / len;
      const Point xn = dom.canonical(x + dx);
      CertificateValue cn = op.certificate(q, xn, 2);
      if (sign * cn.value < 0) {
        r.aborted = true;
        return r;
      }
      if (sign * cn.value >= val - 1e-13 * (1 + std::abs(val))) {
        x = xn;
        c = std::move(cn);
        moved = true;
      }
    }
    if (!moved) {
      double eta = step0;
      for (int halving = 0; halving < 60; ++halving, eta *= 0.5) {
        const Point xn = dom.canonical(x + eta * g);
        const double vn = sign * op.certificate(q, xn, 0).value;
        if (vn < 0) {
          r.aborted = true;
          return r;
        }
        if (vn >= val + 0.5 * eta * g.squaredNorm()) {
          x = xn;
          c = op.certificate(q, x, 2);
          moved = true;
          break;
        }
      }
    }
    if (!moved) return r;
  }
}

struct Candidate {
  Point x;
  double value;
};

Maximizers finalize(const Domain& dom, std::vector<Candidate> cands, const MaximizerConfig& cfg, double sup) {
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value > b.value; });
  std::vector<Candidate> kept;
  for (const Candidate& c : cands) {
    bool dup = false;
    for (const Candidate& k : kept) {
      if (dom.displacement(k.x, c.x).norm() <= cfg.dedupe_radius) {
        dup = true;
        break;
      }
    }
    if (!dup && c.value > 1 - cfg.eps2) kept.push_back(c);
  }
  Maximizers out;
  out.sup_estimate = sup;
  PointSet pts(dom.dim(), static_cast<Index>(kept.size()));
  for (size_t i = 0; i < kept.size(); ++i) {
    pts.col(static_cast<Index>(i)) = kept[i].x;
    out.sup_estimate = std::max(out.sup_estimate, kept[i].value);
  }
  out.points = sorted_points(pts);
  out.values.resize(out.points.cols());
  for (Index j = 0; j < out.points.cols(); ++j) {
    for (const Candidate& k : kept) {
      if ((k.x - out.points.col(j)).norm() == 0.0) {
        out.values(j) = k.value;
        break;
      }
    }
  }
  return out;
}

double resolve_kappa_hess(const MeasurementOperator& op, double kappa_hess) {
  return kappa_hess > 0 ? kappa_hess : op.constants(64).inflated(1.05).kappa_hess;
}

}  // namespace

Maximizers extract_maximizers(const MeasurementOperator& op, const Vector& q, const MaximizerConfig& cfg) {
  if (cfg.scan_n < 2) throw Error("extract_maximizers: scan_n must be at least 2");
  if (!(cfg.eps2 > 0 && cfg.eps2 <= cfg.eps1 && cfg.eps1 < 1)) {
    throw Error("extract_maximizers: need 0 < eps2 <= eps1 < 1");
  }
  if (!q.allFinite()) throw Error("extract_maximizers: non-finite dual vector");
  const Domain& dom = op.domain();
  const std::vector<Vector> axes = scan_axes(dom, cfg.scan_n);
  const Vector values = op.certificate_on_grid(q, axes);
  const double scan_sup = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  const std::vector<Index> peaks = discrete_peaks(values, dom, cfg.scan_n, 1 - cfg.eps1);

  const double qn = q.norm();
  const double kh = resolve_kappa_hess(op, cfg.kappa_hess);
  const double step0 = (kh * qn > 0) ? 1.0 / (kh * qn) : 1.0;
  double spacing = std::numeric_limits<double>::infinity();
  for (const Vector& ax : axes) spacing = std::min(spacing, ax.size() > 1 ? ax(1) - ax(0) : 1.0);

  std::vector<Candidate> cands;
  int unconverged = 0;
  for (Index flat : peaks) {
    const AscentResult r = ascend(op, q, scan_point(axes, flat, cfg.scan_n), step0, cfg.ascent_grad_tol,
                                  cfg.ascent_max_steps, 0.5 * spacing);
    if (r.aborted) continue;
    if (!r.converged) {
      ++unconverged;
      continue;
    }
    cands.push_back({r.x, r.value});
  }
  Maximizers out = finalize(dom, std::move(cands), cfg, scan_sup);
  out.unconverged = unconverged;
  return out;
}

Point Cell::vertex(unsigned corner) const {
  Point v = lower;
  for (int a = 0; a < dim(); ++a) {
    if (corner & (1u << a)) v(a) += side;
  }
  return v;
}

bool Cell::contains(const Eigen::Ref<const Point>& x, double slack) const {
  return ((x.array() >= lower.array() - slack) && (x.array() <= lower.array() + side + slack)).all();
}

std::vector<Cell> Cell::children() const {
  const unsigned count = 1u << dim();
  std::vector<Cell> out;
  out.reserve(count);
  for (unsigned c = 0; c < count; ++c) {
    Cell child{lower, side / 2};
    for (int a = 0; a < dim(); ++a) {
      if (c & (1u << a)) child.lower(a) += side / 2;
    }
    out.push_back(std::move(child));
  }
  return out;
}

CellBounds cell_bounds(const MeasurementOperator& op, const Vector& q, const Cell& cell, double kappa_hess) {
  const int d = cell.dim();
  const double K = kappa_hess * q.norm();
  const double l = cell.side;
  CellBounds b{-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  for (unsigned corner = 0; corner < (1u << d); ++corner) {
    const Point v = cell.vertex(corner);
    const CertificateValue c = op.certificate(q, v, 1);
    const double s = c.value >= 0 ? 1.0 : -1.0;
    // Along axis a the cell spans t in [0, l] from a lower vertex and [-l, 0] from an upper one.
    double lower = s * c.value;
    for (int a = 0; a < d; ++a) {
      const double lo = (corner & (1u << a)) ? -l : 0.0, hi = lo + l;
      const double ga = s * c.gradient(a);
      double t = K > 0 ? ga / K : (ga >= 0 ? hi : lo);
      t = std::clamp(t, lo, hi);
      lower += ga * t - 0.5 * K * t * t;
    }
    double upper = -std::numeric_limits<double>::infinity();
    for (double sigma : {1.0, -1.0}) {
      double u = sigma * c.value;
      for (int a = 0; a < d; ++a) {
        const double lo = (corner & (1u << a)) ? -l : 0.0, hi = lo + l;
        const double ga = sigma * c.gradient(a);
        u += std::max(ga * lo + 0.5 * K * lo * lo, ga * hi + 0.5 * K * hi * hi);
      }
      upper = std::max(upper, u);
    }
    b.lower = std::max(b.lower, lower);
    b.upper = std::min(b.upper, upper);
  }
  return b;
}

std::vector<Cell> tile_domain(const Domain& domain, double side) {
  const int d = domain.dim();
  std::vector<int> counts(d);
  Index total = 1;
  for (int a = 0; a < d; ++a) {
    const double ratio = (domain.upper(a) - domain.lower(a)) / side;
    counts[a] = static_cast<int>(std::lround(ratio));
    if (counts[a] < 1 || std::abs(ratio - counts[a]) > 1e-9 * std::max(1.0, ratio)) {
      throw Error("tile_domain: the domain widths must be multiples of the cell side");
    }
    total *= counts[a];
  }
  std::vector<Cell> cells;
  cells.reserve(total);
  for (Index flat = 0; flat < total; ++flat) {
    Cell c{Vector(d), side};
    Index rem = flat;
    for (int a = d - 1; a >= 0; --a) {
      c.lower(a) = domain.lower(a) + side * static_cast<double>(rem % counts[a]);
      rem /= counts[a];
    }
    cells.push_back(std::move(c));
  }
  return cells;
}

CertifiedCells certified_maximizers(const MeasurementOperator& op, const Vector& q,
                                    const std::vector<Cell>& start_cells, double kappa_hess, double diam_tol,
                                    double margin, long max_cells) {
  if (!(diam_tol > 0)) throw Error("certified_maximizers: diam_tol must be positive");
  const double K = kappa_hess * q.norm();
  CertifiedCells out;
  std::deque<Cell> queue(start_cells.begin(), start_cells.end());
  while (!queue.empty()) {
    if (++out.cells_visited > max_cells) throw CellBudgetExceeded(std::move(out));
    Cell cell = std::move(queue.front());
    queue.pop_front();
    const CellBounds b = cell_bounds(op, q, cell, kappa_hess);
    if (b.upper <= 1 - margin) continue;
    const double diam = cell.diameter();
    const CertificateValue mid = op.certificate(q, cell.center(), 1);
    if (mid.gradient.norm() > 0.5 * K * diam) {
      out.noncritical.push_back(std::move(cell));
      continue;
    }
    if (diam <= diam_tol) {
      (b.lower >= 1 ? out.confirmed : out.undecided).push_back(std::move(cell));
      continue;
    }
    for (Cell& child : cell.children()) queue.push_back(std::move(child));
  }
  return out;
}

Maximizers certified_extract(const MeasurementOperator& op, const Vector& q, const MaximizerConfig& cfg,
                             double kappa_hess, double diam_tol, double margin) {
  const Domain& dom = op.domain();
  const double side0 = (dom.upper - dom.lower).minCoeff() / 8;
  const CertifiedCells cells = certified_maximizers(op, q, tile_domain(dom, side0), kappa_hess, diam_tol, margin);
  const double step0 = kappa_hess * q.norm() > 0 ? 1.0 / (kappa_hess * q.norm()) : 1.0;
  std::vector<Candidate> cands;
  int unconverged = 0;
  double sup = 0.0;
  for (const auto* group : {&cells.confirmed, &cells.undecided}) {
    for (const Cell& c : *group) {
      const AscentResult r =
          ascend(op, q, c.center(), step0, cfg.ascent_grad_tol, cfg.ascent_max_steps, c.diameter());
      if (r.aborted) continue;
      sup = std::max(sup, r.value);
      if (!r.converged) {
        ++unconverged;
        continue;
      }
      cands.push_back({r.x, r.value});
    }
  }
  Maximizers out = finalize(dom, std::move(cands), cfg, sup);
  out.unconverged = unconverged;
  return out;
}

NondegeneracyReport nondegeneracy_report(const MeasurementOperator& op, const Vector& q_star, const PointSet& xi,
                                         const std::vector<double>& tau_grid, int scan_n) {
  if (xi.cols() == 0) throw Error("nondegeneracy_report: empty spike set");
  const Domain& dom = op.domain();
  const int d = dom.dim();
  if (scan_n <= 0) scan_n = d == 1 ? 4096 : 160;

  auto curvature_at = [&](const Point& x) {
    const CertificateValue c = op.certificate(q_star, x, 2);
    const double s = c.value >= 0 ? 1.0 : -1.0;
    return min_eigenvalue(-s * c.hessian);
  };
  auto dist_to_xi = [&](const Point& x) {
    double best = std::numeric_limits<double>::infinity();
    for (Index i = 0; i < xi.cols(); ++i) best = std::min(best, dom.displacement(xi.col(i), x).norm());
    return best;
  };

  NondegeneracyReport rep;
  rep.curvature.resize(xi.cols());
  for (Index i = 0; i < xi.cols(); ++i) rep.curvature(i) = curvature_at(dom.canonical(xi.col(i)));
  rep.gamma_hat = rep.curvature.minCoeff();

  const std::vector<Vector> axes = scan_axes(dom, scan_n);
  const Vector values = op.certificate_on_grid(q_star, axes);
  std::vector<Point> scan(values.size());
  std::vector<double> scan_dist(values.size());
  for (Index f = 0; f < values.size(); ++f) {
    scan[f] = scan_point(axes, f, scan_n);
    scan_dist[f] = dist_to_xi(scan[f]);
  }

  std::vector<double> taus(tau_grid);
  std::sort(taus.begin(), taus.end());
  constexpr int kRadii = 8, kDirections = 16;
  for (double tau : taus) {
    if (!(tau > 0)) continue;
    // Curvature over the tau-balls: radial samples around each spike plus scan points.
    double gamma = rep.gamma_hat;
    for (Index i = 0; i < xi.cols(); ++i) {
      for (int r = 1; r <= kRadii; ++r) {
        const int dirs = d == 1 ? 2 : kDirections;
        for (int k = 0; k < dirs; ++k) {
          Point u(d);
          if (d == 1) {
            u(0) = k == 0 ? 1.0 : -1.0;
          } else {
            const double th = 2 * std::numbers::pi * k / dirs;
            u << std::cos(th), std::sin(th);
          }
          const Point x = xi.col(i) + tau * r / kRadii * u;
          if (!dom.periodic && !dom.contains(x)) continue;
          gamma = std::min(gamma, curvature_at(dom.canonical(x)));
        }
      }
    }
    for (Index f = 0; f < values.size(); ++f) {
      if (scan_dist[f] <= tau) gamma = std::min(gamma, curvature_at(scan[f]));
    }
    if (!(gamma > 0)) break;
    bool far_ok = true;
    for (Index f = 0; f < values.size() && far_ok; ++f) {
      if (scan_dist[f] >= tau && std::abs(values(f)) > 1 - gamma * tau * tau / 2) far_ok = false;
    }
    if (!far_ok) continue;
    rep.tau0_hat = tau;
  }
  const double far = rep.tau0_hat > 0 ? rep.tau0_hat : (taus.empty() ? 0.0 : taus.front());
  for (Index f = 0; f < values.size(); ++f) {
    if (scan_dist[f] >= far && std::abs(values(f)) >= 1 - 1e-6) ++rep.saturation_points;
  }
  return rep;
}

}  // namespace tvx
