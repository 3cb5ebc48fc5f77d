#include "support.hpp"
#include "tvx/finite_solver.hpp"
#include "tvx/harness.hpp"
#include "tvx/linalg.hpp"
#include "tvx/sliding.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace tvx;

namespace {

struct Flat {
  Vector v;
  Index p;
  int d;
};

Flat flatten(const Vector& alpha, const PointSet& X) {
  Flat f{Vector(alpha.size() + X.size()), alpha.size(), static_cast<int>(X.rows())};
  f.v << alpha, Eigen::Map<const Vector>(X.data(), X.size());
  return f;
}

double G_at(const Flat& f, const Vector& v, const MeasurementOperator& op, const QuadraticFidelity& fid) {
  PointSet X = Eigen::Map<const PointSet>(v.data() + f.p, f.d, f.p);
  for (Index j = 0; j < X.cols(); ++j) X.col(j) = op.domain().canonical(X.col(j));
  return objective_G(v.head(f.p), X, op, fid);
}

Vector grad_flat(const GradientG& g) {
  Vector out(g.d_amplitudes.size() + g.d_positions.size());
  out << g.d_amplitudes, Eigen::Map<const Vector>(g.d_positions.data(), g.d_positions.size());
  return out;
}

Vector fd_gradient(const Vector& alpha, const PointSet& X, const MeasurementOperator& op,
                   const QuadraticFidelity& fid, double h) {
  const Flat f = flatten(alpha, X);
  Vector g(f.v.size());
  for (Index i = 0; i < f.v.size(); ++i) {
    Vector vp = f.v, vm = f.v;
    vp(i) += h;
    vm(i) -= h;
    g(i) = (G_at(f, vp, op, fid) - G_at(f, vm, op, fid)) / (2 * h);
  }
  return g;
}

// Random differentiable point: amplitudes bounded away from zero, positions inside the box.
std::pair<Vector, PointSet> random_point(std::mt19937_64& gen, const MeasurementOperator& op, Index p) {
  Vector alpha = test::random_vector(gen, p, 0.3, 1.5);
  for (Index i = 0; i < p; ++i)
    if (gen() % 2) alpha(i) = -alpha(i);
  PointSet X(op.dim(), p);
  for (Index j = 0; j < p; ++j)
    for (int a = 0; a < op.dim(); ++a)
      X(a, j) = test::uniform(gen, op.domain().lower(a) + 0.05, op.domain().upper(a) - 0.05);
  return {alpha, X};
}

PointSet wrapped(PointSet X, const Domain& dom) {
  for (Index j = 0; j < X.cols(); ++j) X.col(j) = dom.canonical(X.col(j));
  return X;
}

// 1D positions moved by one offset per atom.
PointSet shifted(const PointSet& X, const Vector& delta, const Domain& dom) {
  return wrapped(X + delta.transpose(), dom);
}

}  // namespace

TEST_SUITE("sliding") {

TEST_CASE("objective examples") {
  const Problem prob = gen_fourier1d(11);
  const QuadraticFidelity& f = prob.fidelity;
  const double f0 = f.value(Vector::Zero(f.size()));
  const PointSet X = uniform_grid(prob.domain(), 4);
  CHECK(objective_G(Vector::Zero(4), X, prob.op, f) == f0);

  auto gen = test::rng(61);
  for (int t = 0; t < 100; ++t) {
    auto [alpha, Y] = random_point(gen, prob.op, 1 + t % 6);
    CHECK(objective_G(alpha, Y, prob.op, f) == objective_J(DiscreteMeasure(Y, alpha), prob.op, f));
  }

  PointSet twice(1, 2);
  twice << 0.4, 0.4;
  Vector pm(2);
  pm << 1.0, -1.0;
  CHECK(objective_G(pm, twice, prob.op, f) == doctest::Approx(2 + f0).epsilon(1e-14));
  const DiscreteMeasure merged = merge_atoms(DiscreteMeasure(twice, pm), 1e-9, 1e-12);
  CHECK(objective_J(merged, prob.op, f) == doctest::Approx(f0).epsilon(1e-14));
}

TEST_CASE("gradient matches central differences") {
  auto gen = test::rng(62);
  const Problem fourier = gen_fourier1d(12);
  const Problem gauss = gen_gauss2d(12);
  for (const Problem* prob : {&fourier, &gauss}) {
    for (int t = 0; t < 100; ++t) {
      auto [alpha, X] = random_point(gen, prob->op, 1 + t % 5);
      const Vector g = grad_flat(gradient_G(alpha, X, prob->op, prob->fidelity));
      const Vector fd = fd_gradient(alpha, X, prob->op, prob->fidelity, 1e-6);
      CHECK((fd - g).norm() <= 1e-5 * g.norm());
    }
  }
}

TEST_CASE("gradient is undefined at zero amplitude") {
  const Problem prob = gen_fourier1d(13);
  PointSet X(1, 2);
  X << 0.1, 0.6;
  Vector alpha(2);
  alpha << 1.0, 0.0;
  CHECK_THROWS_AS(gradient_G(alpha, X, prob.op, prob.fidelity), Error);
}

TEST_CASE("config validation") {
  SlideConfig cfg;
  cfg.c1 = 0.6;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.c1 = 1e-4;
  cfg.c2 = 1e-5;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("descent at the optimum and from a perturbed start") {
  const Problem prob = gen_fourier1d(14);
  const Reference ref = compute_reference(prob);
  REQUIRE(ref.measure.has_value());
  const DiscreteMeasure& star = *ref.measure;
  const GradientG g = gradient_G(star.amplitudes, star.positions, prob.op, prob.fidelity);
  CHECK(g.norm() <= 1e-7);

  SlideConfig loose;
  loose.grad_tol = 1e-6;
  const SlideResult none = run_sliding(star, prob.op, prob.fidelity, loose);
  CHECK(none.iterations == 0);
  CHECK(none.converged);

  auto gen = test::rng(64);
  SlideConfig cfg;
  for (int t = 0; t < 5; ++t) {
    DiscreteMeasure start = star;
    start.amplitudes += 0.02 * test::random_vector(gen, star.size());
    start.positions = shifted(star.positions, 0.002 * test::random_vector(gen, star.size()), prob.domain());
    const SlideResult res = run_sliding(start, prob.op, prob.fidelity, cfg);
    CHECK(res.converged);
    CHECK(res.final.size() == start.size());
    CHECK((res.final.amplitudes.array().sign() == start.amplitudes.array().sign()).all());
    CHECK((res.final.amplitudes - star.amplitudes).norm() <= 1e-6);
    for (size_t k = 0; k < res.steps.size(); ++k) {
      const SlideStep& s = res.steps[k];
      const double noise = cfg.rounding_tol * std::max(1.0, std::abs(s.G));
      CHECK(s.G_next <= s.G + cfg.c1 * s.step * s.slope + noise);
      if (!s.truncated) CHECK(s.slope_next >= cfg.c2 * s.slope);
      CHECK(res.G_history[k + 1] <= res.G_history[k] + noise);
      if (!s.approximate) CHECK(res.G_history[k + 1] < res.G_history[k]);
    }
  }
}

TEST_CASE("G is locally convex around the optimum") {
  const Problem prob = gen_fourier1d(15);
  const Reference ref = compute_reference(prob);
  REQUIRE(ref.measure.has_value());
  const DiscreteMeasure& star = *ref.measure;
  auto gen = test::rng(65);
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    Vector alpha = star.amplitudes + 0.01 * test::random_vector(gen, star.size());
    PointSet X = shifted(star.positions, 0.001 * test::random_vector(gen, star.size()), prob.domain());
    const Flat f = flatten(alpha, X);
    const Index n = f.v.size();
    Matrix H(n, n);
    for (Index i = 0; i < n; ++i) {
      Vector vp = f.v, vm = f.v;
      vp(i) += h;
      vm(i) -= h;
      const PointSet Xp = wrapped(Eigen::Map<const PointSet>(vp.data() + f.p, f.d, f.p), prob.domain());
      const PointSet Xm = wrapped(Eigen::Map<const PointSet>(vm.data() + f.p, f.d, f.p), prob.domain());
      H.col(i) = (grad_flat(gradient_G(vp.head(f.p), Xp, prob.op, prob.fidelity)) -
                  grad_flat(gradient_G(vm.head(f.p), Xm, prob.op, prob.fidelity))) / (2 * h);
    }
    CHECK(min_eigenvalue(0.5 * (H + H.transpose())) > 0);
  }
}

TEST_CASE("transition gram") {
  // One frequency: A(x) = (cos, -sin), A'(x) = -2 pi k (sin, cos), orthogonal columns.
  const auto single = MeasurementOperator::fourier1d(1, 1);
  const TransitionReport one = transition_gram(single, PointSet::Constant(1, 1, 0.3));
  const double w2 = 4 * std::numbers::pi * std::numbers::pi;
  CHECK(one.T(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(one.T(0, 1)) <= 1e-14);
  CHECK(one.T(1, 1) == doctest::Approx(w2).epsilon(1e-14));
  CHECK(one.Gamma == doctest::Approx(1.0).epsilon(1e-12));

  auto gen = test::rng(66);
  const auto op = MeasurementOperator::fourier1d(-2, 2);
  for (int t = 0; t < 20; ++t) {
    const TransitionReport r = transition_gram(op, PointSet::Constant(1, 1, test::uniform(gen, 0, 1)));
    const double a = r.T(0, 0), b = r.T(0, 1), c = r.T(1, 1);
    const double disc = std::sqrt((a - c) * (a - c) + 4 * b * b);
    CHECK(r.Gamma == doctest::Approx(0.5 * (a + c - disc)).epsilon(1e-12));
    const SymmetricEigen e = jacobi_eigen(r.T);
    CHECK(e.values(1) == doctest::Approx(0.5 * (a + c + disc)).epsilon(1e-12));
  }

  const auto gauss = MeasurementOperator::gauss2d(16, 0.1);
  for (int t = 0; t < 100; ++t) {
    const PointSet xi = test::random_points(gen, Domain::square(-0.6, 0.6), 1 + t % 4);
    const TransitionReport r = transition_gram(gauss, xi);
    CHECK(r.T.rows() == xi.cols() * 3);
    CHECK(r.T.isApprox(r.T.transpose(), 0));
    CHECK(r.Gamma >= -1e-10);
  }
  CHECK_THROWS_AS(transition_gram(gauss, PointSet::Zero(2, 2)), Error);
}

TEST_CASE("amplitude error bound") {
  const Problem prob = gen_fourier1d(16);
  const Reference ref = compute_reference(prob);
  REQUIRE(ref.measure.has_value());
  const DiscreteMeasure& star = *ref.measure;
  const OperatorConstants c = prob.op.constants();
  const AmplitudeBound same = amplitude_error_bound(star, star, prob.op, prob.fidelity, c);
  CHECK(same.lhs == 0.0);
  CHECK(same.rhs == 0.0);
  CHECK(same.holds());

  DiscreteMeasure bumped = star;
  bumped.amplitudes(0) += 0.01;
  const AmplitudeBound b = amplitude_error_bound(bumped, star, prob.op, prob.fidelity, c, ref.J_star);
  CHECK(b.lhs == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(b.holds());

  DiscreteMeasure fewer = star;
  fewer.positions.conservativeResize(Eigen::NoChange, star.size() - 1);
  fewer.amplitudes.conservativeResize(star.size() - 1);
  CHECK_THROWS_AS(amplitude_error_bound(fewer, star, prob.op, prob.fidelity, c), Error);
}

}  // TEST_SUITE
