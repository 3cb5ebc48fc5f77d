#pragma once

#include "tvx/measures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace tvx::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline double uniform(std::mt19937_64& gen, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(gen);
}

inline Vector random_vector(std::mt19937_64& gen, Index n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = uniform(gen, lo, hi);
  return v;
}

inline PointSet random_points(std::mt19937_64& gen, const Domain& domain, Index n) {
  PointSet p(domain.dim(), n);
  for (Index j = 0; j < n; ++j)
    for (int a = 0; a < domain.dim(); ++a) p(a, j) = uniform(gen, domain.lower(a), domain.upper(a));
  return p;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

}  // namespace tvx::test
