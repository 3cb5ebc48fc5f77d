#include "tvx/fidelity.hpp"

#include <cmath>
#include <limits>

namespace tvx {

QuadraticFidelity::QuadraticFidelity(Vector data, double weight) : y(std::move(data)), L(weight) {
  if (!(L > 0)) throw Error("quadratic fidelity: L must be positive");
}

double QuadraticFidelity::value(const Vector& z) const {
  if (z.size() != y.size()) throw Error("fidelity: size mismatch");
  return 0.5 * L * (z - y).squaredNorm();
}

Vector QuadraticFidelity::gradient(const Vector& z) const {
  if (z.size() != y.size()) throw Error("fidelity: size mismatch");
  return L * (z - y);
}

double QuadraticFidelity::conjugate(const Vector& q) const {
  if (q.size() != y.size()) throw Error("fidelity: size mismatch");
  return q.dot(y) + q.squaredNorm() / (2 * L);
}

Vector QuadraticFidelity::dual_candidate(const Vector& z) const { return -gradient(z); }

double QuadraticFidelity::dual_radius() const {
  const Vector qbar = prox_center();
  const double drop = conjugate(Vector::Zero(y.size())) - conjugate(qbar);
  return std::sqrt(std::max(0.0, 2 * L * drop)) + qbar.norm();
}

double QuadraticFidelity::rho(const Vector& q_star) const {
  const Vector p = -q_star;
  const Vector w = p / L + y;
  const double s = -L * w.dot(p);
  return s >= 0 ? std::sqrt(s) : std::numeric_limits<double>::quiet_NaN();
}

FidelityEval fidelity_eval(const QuadraticFidelity& f, const Vector& z) {
  return {f.value(z), f.gradient(z)};
}

}  // namespace tvx
