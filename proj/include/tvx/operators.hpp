#pragma once

#include "tvx/measures.hpp"

#include <variant>
#include <vector>

namespace tvx {

/// Fourier moments on the unit torus. Frequency k contributes the two real channels
/// cos(2 pi k x) and -sin(2 pi k x) (real and imaginary part of exp(-i 2 pi k x)).
struct Fourier1D {
  std::vector<int> frequencies;
};

/// Gaussian blur sampled at a tensor grid of centers c_ij:
/// a_ij(x) = exp(-|x - c_ij|^2 / (2 sigma^2)). Channel index is i * n + j where i runs
/// over the first axis.
struct Gaussian2D {
  int grid_n = 64;
  Eigen::Matrix2d grid_box = (Eigen::Matrix2d() << -0.5, 0.5, -0.5, 0.5).finished();
  double sigma = 0.05;

  Vector centers(int axis) const;
};

/// A(x), A'(x) and the per-channel Hessians at one point.
struct AtomResponse {
  Vector value;     // m
  Matrix jacobian;  // m x d
  Matrix hessian;   // m x (d*d), row j holds channel j's Hessian in row-major order
};

/// Value, gradient and Hessian of the certificate x -> <A(x), q>.
struct CertificateValue {
  double value = 0.0;
  Vector gradient;
  Matrix hessian;
};

/// Uniform bounds kappa = sup ||A(x)||, kappa_grad = sup ||A'(x)||, kappa_hess =
/// sup_{|q|<=1} ||(A*q)''||. `exact` is false for sampled estimates (lower bounds).
struct OperatorConstants {
  double kappa = 0.0;
  double kappa_grad = 0.0;
  double kappa_hess = 0.0;
  bool exact = false;

  /// Scales the sampled constants by `factor`; exact constants are returned unchanged.
  OperatorConstants inflated(double factor) const;
};

class MeasurementOperator {
 public:
  using Variant = std::variant<Fourier1D, Gaussian2D>;

  MeasurementOperator(Fourier1D fourier);
  MeasurementOperator(Gaussian2D gauss, Domain domain);

  /// Frequencies kmin..kmax inclusive.
  static MeasurementOperator fourier1d(int kmin, int kmax);
  static MeasurementOperator gauss2d(int grid_n, double sigma, Domain domain = Domain::square(-1, 1));

  const Variant& kind() const { return kind_; }
  const Domain& domain() const { return domain_; }
  int dim() const { return domain_.dim(); }
  Index channels() const { return channels_; }

  AtomResponse atom_response(const Eigen::Ref<const Point>& x, int order) const;

  /// m x p matrix whose columns are A(x_j).
  Matrix design_matrix(const PointSet& points) const;

  /// m x (p*d) matrix whose column j*d + a is d/dx_a A(x_j).
  Matrix design_jacobian(const PointSet& points) const;

  /// sum_i a_i A(x_i).
  Vector forward(const DiscreteMeasure& mu) const;

  CertificateValue certificate(const Vector& q, const Eigen::Ref<const Point>& x, int order) const;

  /// <A(x), q> on the tensor grid axes[0] x ... x axes[d-1]; the first axis varies slowest.
  Vector certificate_on_grid(const Vector& q, const std::vector<Vector>& axes) const;

  /// Closed form for Fourier1D; dense sampling with sampling_n points per axis otherwise.
  OperatorConstants constants(int sampling_n = 256) const;

 private:
  void check_q(const Vector& q) const;

  Variant kind_;
  Domain domain_;
  Index channels_ = 0;
};

}  // namespace tvx
