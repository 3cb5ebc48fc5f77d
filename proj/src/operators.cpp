#include "tvx/operators.hpp"

#include <Eigen/LU>

#include <cmath>
#include <numbers>

namespace tvx {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// Gaussian factor g(t) = exp(-t^2 / (2 sigma^2)) and its first two derivatives,
// evaluated at t = x - c for every center c.
struct AxisFactors {
  Vector g, dg, d2g;
};

AxisFactors axis_factors(const Vector& centers, double x, double sigma, int order) {
  const double inv_s2 = 1.0 / (sigma * sigma);
  const Vector t = x - centers.array();
  AxisFactors f;
  f.g = (-0.5 * inv_s2 * t.array().square()).exp();
  if (order >= 1) f.dg = -inv_s2 * t.array() * f.g.array();
  if (order >= 2) f.d2g = (t.array().square() * inv_s2 * inv_s2 - inv_s2) * f.g.array();
  return f;
}

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

Vector Gaussian2D::centers(int axis) const {
  return Vector::LinSpaced(grid_n, grid_box(axis, 0), grid_box(axis, 1));
}

OperatorConstants OperatorConstants::inflated(double factor) const {
  if (exact) return *this;
  return {kappa * factor, kappa_grad * factor, kappa_hess * factor, false};
}

MeasurementOperator::MeasurementOperator(Fourier1D fourier)
    : kind_(std::move(fourier)), domain_(Domain::unit_torus()) {
  const auto& f = std::get<Fourier1D>(kind_);
  if (f.frequencies.empty()) throw Error("fourier1d: need at least one frequency");
  channels_ = 2 * static_cast<Index>(f.frequencies.size());
}

MeasurementOperator::MeasurementOperator(Gaussian2D gauss, Domain domain)
    : kind_(std::move(gauss)), domain_(std::move(domain)) {
  const auto& g = std::get<Gaussian2D>(kind_);
  if (g.grid_n < 1) throw Error("gauss2d: grid_n must be positive");
  if (!(g.sigma > 0)) throw Error("gauss2d: sigma must be positive");
  if (domain_.dim() != 2) throw Error("gauss2d: domain must be two-dimensional");
  channels_ = static_cast<Index>(g.grid_n) * g.grid_n;
}

MeasurementOperator MeasurementOperator::fourier1d(int kmin, int kmax) {
  if (kmax < kmin) throw Error("fourier1d: empty frequency range");
  Fourier1D f;
  for (int k = kmin; k <= kmax; ++k) f.frequencies.push_back(k);
  return MeasurementOperator(std::move(f));
}

MeasurementOperator MeasurementOperator::gauss2d(int grid_n, double sigma, Domain domain) {
  Gaussian2D g;
  g.grid_n = grid_n;
  g.sigma = sigma;
  return MeasurementOperator(g, std::move(domain));
}

void MeasurementOperator::check_q(const Vector& q) const {
  if (q.size() != channels_) throw Error("certificate: dual vector has the wrong length");
}

AtomResponse MeasurementOperator::atom_response(const Eigen::Ref<const Point>& x, int order) const {
  domain_.require(x, "atom_response");
  const int d = dim();
  AtomResponse r;
  r.value.resize(channels_);
  if (order >= 1) r.jacobian.resize(channels_, d);
  if (order >= 2) r.hessian.resize(channels_, d * d);
  std::visit(overloaded{
                 [&](const Fourier1D& f) {
                   for (size_t j = 0; j < f.frequencies.size(); ++j) {
                     const double w = kTwoPi * f.frequencies[j];
                     const double c = std::cos(w * x(0)), s = std::sin(w * x(0));
                     const Index ci = 2 * static_cast<Index>(j), si = ci + 1;
                     r.value(ci) = c;
                     r.value(si) = -s;
                     if (order >= 1) {
                       r.jacobian(ci, 0) = -w * s;
                       r.jacobian(si, 0) = -w * c;
                     }
                     if (order >= 2) {
                       r.hessian(ci, 0) = -w * w * c;
                       r.hessian(si, 0) = w * w * s;
                     }
                   }
                 },
                 [&](const Gaussian2D& g) {
                   const int n = g.grid_n;
                   const AxisFactors a = axis_factors(g.centers(0), x(0), g.sigma, order);
                   const AxisFactors b = axis_factors(g.centers(1), x(1), g.sigma, order);
                   for (int i = 0; i < n; ++i) {
                     for (int k = 0; k < n; ++k) {
                       const Index ch = static_cast<Index>(i) * n + k;
                       r.value(ch) = a.g(i) * b.g(k);
                       if (order >= 1) {
                         r.jacobian(ch, 0) = a.dg(i) * b.g(k);
                         r.jacobian(ch, 1) = a.g(i) * b.dg(k);
                       }
                       if (order >= 2) {
                         const double cross = a.dg(i) * b.dg(k);
                         r.hessian(ch, 0) = a.d2g(i) * b.g(k);
                         r.hessian(ch, 1) = cross;
                         r.hessian(ch, 2) = cross;
                         r.hessian(ch, 3) = a.g(i) * b.d2g(k);
                       }
                     }
                   }
                 }},
             kind_);
  return r;
}

Matrix MeasurementOperator::design_matrix(const PointSet& points) const {
  if (points.rows() != dim()) throw Error("design_matrix: dimension mismatch");
  Matrix out(channels_, points.cols());
  for (Index j = 0; j < points.cols(); ++j) out.col(j) = atom_response(points.col(j), 0).value;
  return out;
}

Matrix MeasurementOperator::design_jacobian(const PointSet& points) const {
  if (points.rows() != dim()) throw Error("design_jacobian: dimension mismatch");
  const int d = dim();
  Matrix out(channels_, points.cols() * d);
  for (Index j = 0; j < points.cols(); ++j) {
    out.middleCols(j * d, d) = atom_response(points.col(j), 1).jacobian;
  }
  return out;
}

Vector MeasurementOperator::forward(const DiscreteMeasure& mu) const {
  if (mu.empty()) return Vector::Zero(channels_);
  return design_matrix(mu.positions) * mu.amplitudes;
}

CertificateValue MeasurementOperator::certificate(const Vector& q, const Eigen::Ref<const Point>& x,
                                                  int order) const {
  check_q(q);
  domain_.require(x, "certificate");
  const int d = dim();
  CertificateValue c;
  c.gradient = Vector::Zero(d);
  c.hessian = Matrix::Zero(d, d);
  std::visit(overloaded{
                 [&](const Fourier1D& f) {
                   double v = 0, g = 0, h = 0;
                   for (size_t j = 0; j < f.frequencies.size(); ++j) {
                     const double w = kTwoPi * f.frequencies[j];
                     const double cs = std::cos(w * x(0)), sn = std::sin(w * x(0));
                     const double qc = q(2 * j), qs = q(2 * j + 1);
                     v += qc * cs - qs * sn;
                     g += -w * (qc * sn + qs * cs);
                     h += -w * w * (qc * cs - qs * sn);
                   }
                   c.value = v;
                   if (order >= 1) c.gradient(0) = g;
                   if (order >= 2) c.hessian(0, 0) = h;
                 },
                 [&](const Gaussian2D& g) {
                   const int n = g.grid_n;
                   Eigen::Map<const RowMajorMatrix> Q(q.data(), n, n);
                   const AxisFactors a = axis_factors(g.centers(0), x(0), g.sigma, order);
                   const AxisFactors b = axis_factors(g.centers(1), x(1), g.sigma, order);
                   const Vector Qb = Q * b.g;
                   c.value = a.g.dot(Qb);
                   if (order >= 1) {
                     const Vector Qdb = Q * b.dg;
                     c.gradient(0) = a.dg.dot(Qb);
                     c.gradient(1) = a.g.dot(Qdb);
                     if (order >= 2) {
                       c.hessian(0, 0) = a.d2g.dot(Qb);
                       c.hessian(0, 1) = c.hessian(1, 0) = a.dg.dot(Qdb);
                       c.hessian(1, 1) = a.g.dot(Q * b.d2g);
                     }
                   }
                 }},
             kind_);
  return c;
}

Vector MeasurementOperator::certificate_on_grid(const Vector& q, const std::vector<Vector>& axes) const {
  check_q(q);
  if (static_cast<int>(axes.size()) != dim()) throw Error("certificate_on_grid: wrong axis count");
  return std::visit(
      overloaded{[&](const Fourier1D& f) -> Vector {
                   const Vector& t = axes[0];
                   Vector out = Vector::Zero(t.size());
                   for (size_t j = 0; j < f.frequencies.size(); ++j) {
                     const double w = kTwoPi * f.frequencies[j];
                     const double qc = q(2 * j), qs = q(2 * j + 1);
                     out.array() += qc * (w * t.array()).cos() - qs * (w * t.array()).sin();
                   }
                   return out;
                 },
                 [&](const Gaussian2D& g) -> Vector {
                   const int n = g.grid_n;
                   Eigen::Map<const RowMajorMatrix> Q(q.data(), n, n);
                   const double inv_s2 = 1.0 / (g.sigma * g.sigma);
                   auto factor_matrix = [&](const Vector& t, const Vector& centers) {
                     Matrix E(t.size(), n);
                     for (Index r = 0; r < t.size(); ++r) {
                       E.row(r) = (-0.5 * inv_s2 * (t(r) - centers.array()).square()).exp().transpose();
                     }
                     return E;
                   };
                   const Matrix E0 = factor_matrix(axes[0], g.centers(0));
                   const Matrix E1 = factor_matrix(axes[1], g.centers(1));
                   const RowMajorMatrix values = E0 * Q * E1.transpose();
                   return Eigen::Map<const Vector>(values.data(), values.size());
                 }},
      kind_);
}

OperatorConstants MeasurementOperator::constants(int sampling_n) const {
  return std::visit(
      overloaded{
          [&](const Fourier1D& f) {
            double s2 = 0, s4 = 0;
            for (int k : f.frequencies) {
              s2 += static_cast<double>(k) * k;
              s4 += std::pow(static_cast<double>(k), 4);
            }
            OperatorConstants c;
            c.kappa = std::sqrt(static_cast<double>(f.frequencies.size()));
            c.kappa_grad = kTwoPi * std::sqrt(s2);
            c.kappa_hess = kTwoPi * kTwoPi * std::sqrt(s4);
            c.exact = true;
            return c;
          },
          [&](const Gaussian2D& g) {
            if (sampling_n < 2) throw Error("operator constants: sampling_n must be at least 2");
            // Every quantity factorises over the two axes; precompute the per-axis
            // inner products of (g, g', g'') at each sample.
            struct AxisGram {
              double gg, gd, dd, g2g, g2d, g2g2;  // <g,g>, <g,g'>, <g',g'>, <g'',g>, <g'',g'>, <g'',g''>
            };
            auto axis_grams = [&](int axis) {
              const Vector centers = g.centers(axis);
              const Vector t = Vector::LinSpaced(sampling_n, domain_.lower(axis), domain_.upper(axis));
              std::vector<AxisGram> out(sampling_n);
              for (int i = 0; i < sampling_n; ++i) {
                const AxisFactors a = axis_factors(centers, t(i), g.sigma, 2);
                out[i] = {a.g.squaredNorm(), a.g.dot(a.dg),   a.dg.squaredNorm(),
                          a.d2g.dot(a.g),    a.d2g.dot(a.dg), a.d2g.squaredNorm()};
              }
              return out;
            };
            const auto ax = axis_grams(0);
            const auto ay = axis_grams(1);
            constexpr int kAngles = 360;
            Eigen::Matrix<double, 3, kAngles> w;
            for (int t = 0; t < kAngles; ++t) {
              const double th = std::numbers::pi * t / kAngles;
              const double v1 = std::cos(th), v2 = std::sin(th);
              w.col(t) << v1 * v1, 2 * v1 * v2, v2 * v2;
            }
            double k0 = 0, k1 = 0, k2 = 0;
            for (const AxisGram& a : ax) {
              for (const AxisGram& b : ay) {
                k0 = std::max(k0, a.gg * b.gg);
                Eigen::Matrix2d jtj;
                jtj << a.dd * b.gg, a.gd * b.gd, a.gd * b.gd, a.gg * b.dd;
                const double tr = jtj.trace(), det = jtj.determinant();
                k1 = std::max(k1, 0.5 * (tr + std::sqrt(std::max(0.0, tr * tr - 4 * det))));
                // vectors e1 = g''(x)g(y), e2 = g'(x)g'(y), e3 = g(x)g''(y)
                Eigen::Matrix3d gram;
                gram(0, 0) = a.g2g2 * b.gg;
                gram(1, 1) = a.dd * b.dd;
                gram(2, 2) = a.gg * b.g2g2;
                gram(0, 1) = gram(1, 0) = a.g2d * b.gd;
                gram(0, 2) = gram(2, 0) = a.g2g * b.g2g;
                gram(1, 2) = gram(2, 1) = a.gd * b.g2d;
                const double best = (w.array() * (gram * w).array()).colwise().sum().maxCoeff();
                k2 = std::max(k2, best);
              }
            }
            OperatorConstants c;
            c.kappa = std::sqrt(k0);
            c.kappa_grad = std::sqrt(k1);
            c.kappa_hess = std::sqrt(k2);
            c.exact = false;
            return c;
          }},
      kind_);
}

}  // namespace tvx
