#pragma once

#include "tvx/measures.hpp"

namespace tvx {

struct SymmetricEigen {
  Vector values;  // ascending
  Matrix vectors; // columns match `values`
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps in fixed row-major
/// order until the off-diagonal mass drops below tol * |A|_F.
SymmetricEigen jacobi_eigen(const Matrix& a, double tol = 1e-15, int max_sweeps = 100);

inline double min_eigenvalue(const Matrix& a) {
  return a.size() == 0 ? 0.0 : jacobi_eigen(a).values(0);
}

}  // namespace tvx
