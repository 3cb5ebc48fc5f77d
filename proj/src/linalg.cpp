#include "tvx/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace tvx {

SymmetricEigen jacobi_eigen(const Matrix& a, double tol, int max_sweeps) {
  if (a.rows() != a.cols()) throw Error("jacobi_eigen: matrix must be square");
  const Index n = a.rows();
  Matrix m = 0.5 * (a + a.transpose());
  Matrix v = Matrix::Identity(n, n);
  const double scale = std::max(m.norm(), 1e-300);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) off += m(p, q) * m(p, q);
    if (std::sqrt(2 * off) <= tol * scale) break;
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = m(p, q);
        if (apq == 0.0) continue;
        const double theta = (m(q, q) - m(p, p)) / (2 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double mkp = m(k, p), mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (Index k = 0; k < n; ++k) {
          const double mpk = m(p, k), mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index i, Index j) { return m(i, i) < m(j, j); });
  SymmetricEigen out{Vector(n), Matrix(n, n)};
  for (Index i = 0; i < n; ++i) {
    out.values(i) = m(order[i], order[i]);
    out.vectors.col(i) = v.col(order[i]);
  }
  return out;
}

}  // namespace tvx
