#include "support.hpp"
#include "tvx/finite_solver.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>

using namespace tvx;

namespace {

FiniteProblem scalar_problem() {
  PointSet x = PointSet::Zero(1, 1);
  Vector y(2);
  y << 2.0, 0.0;
  return {x, MeasurementOperator::fourier1d(0, 0), QuadraticFidelity(y, 1.0)};
}

// Random Fourier instance: data from a sparse measure plus noise, grid of p random points.
FiniteProblem random_problem(std::mt19937_64& gen, int m_max, int p_max) {
  const int freqs = 2 + static_cast<int>(gen() % (m_max / 2 - 1));
  const int kmin = -freqs / 2;
  const auto op = MeasurementOperator::fourier1d(kmin, kmin + freqs - 1);
  const Index p = 5 + static_cast<Index>(gen() % (p_max - 4));
  const PointSet grid = test::random_points(gen, op.domain(), p);
  DiscreteMeasure truth(test::random_points(gen, op.domain(), 3), test::random_vector(gen, 3, -2, 2));
  const Vector y = op.forward(truth) + 0.1 * test::random_vector(gen, op.channels());
  return {grid, op, QuadraticFidelity(y, test::uniform(gen, 0.5, 2.0))};
}

// Projected gradient on min 1'(u + v) + f(M(u - v)) over u, v >= 0.
Vector split_oracle(const Matrix& M, const QuadraticFidelity& f, int iterations) {
  const Index p = M.cols();
  const double lmax = Eigen::SelfAdjointEigenSolver<Matrix>(M.transpose() * M).eigenvalues().maxCoeff();
  const double step = 1.0 / (2.0 * f.L * lmax);
  Vector u = Vector::Zero(p), v = Vector::Zero(p);
  for (int it = 0; it < iterations; ++it) {
    const Vector g = M.transpose() * f.gradient(M * (u - v));
    u = (u - step * (Vector::Ones(p) + g)).cwiseMax(0.0);
    v = (v - step * (Vector::Ones(p) - g)).cwiseMax(0.0);
  }
  return u - v;
}

}  // namespace

TEST_SUITE("finite_solver") {

TEST_CASE("soft threshold") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(-3.0, 1.0) == -2.0);
  CHECK_THROWS_AS(soft_threshold(1.0, -1.0), Error);
}

TEST_CASE("zero data gives the zero solution") {
  const auto op = MeasurementOperator::fourier1d(-3, 3);
  auto gen = test::rng(41);
  const FiniteProblem prob{test::random_points(gen, op.domain(), 9), op, QuadraticFidelity(Vector::Zero(14), 1.0)};
  const SolveReport rep = solve_finite(prob);
  CHECK(rep.amplitudes.isZero(0));
  CHECK(rep.dual.isZero(0));
  CHECK(rep.gap == 0.0);
  CHECK(rep.converged);
}

TEST_CASE("scalar lasso in closed form") {
  const FiniteProblem prob = scalar_problem();
  const SolveReport rep = solve_finite(prob);
  REQUIRE(rep.amplitudes.size() == 1);
  CHECK(rep.amplitudes(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rep.primal_value == doctest::Approx(1.5).epsilon(1e-9));

  Vector alpha = Vector::Constant(1, 1.0);
  Vector q(2);
  q << 1.0, 0.0;
  const KktResiduals exact = kkt_report(prob, alpha, q);
  CHECK(exact.feasibility_excess <= 1e-12);
  CHECK(exact.sign_residual <= 1e-12);
  CHECK(exact.gradient_link <= 1e-12);

  alpha(0) += 0.1;
  CHECK(kkt_report(prob, alpha, q).gradient_link > 0.0);
}

TEST_CASE("matches a slow projected gradient oracle") {
  auto gen = test::rng(42);
  const Matrix M = Matrix::NullaryExpr(10, 15, [&] { return std::normal_distribution<double>()(gen); });
  const QuadraticFidelity f(2.0 * test::random_vector(gen, 10), 1.0);
  const Vector oracle = split_oracle(M, f, 1'000'000);
  const double oracle_primal = oracle.lpNorm<1>() + f.value(M * oracle);
  const Vector q = f.dual_candidate(M * oracle);
  const double oracle_dual = f.dual_objective(q / std::max(1.0, (M.transpose() * q).lpNorm<Eigen::Infinity>()));

  const SolveReport rep = solve_lasso(M, f);
  CHECK(rep.converged);
  CHECK(std::abs(rep.primal_value - oracle_primal) <= 1e-6);
  CHECK(std::abs(rep.dual_value - oracle_dual) <= 1e-6);
  CHECK((rep.amplitudes - oracle).norm() <= 1e-4);
}

TEST_CASE("random instances converge with certified gap") {
  auto gen = test::rng(43);
  for (int trial = 0; trial < 20; ++trial) {
    const FiniteProblem prob = random_problem(gen, 60, 100);
    const double tol = 1e-9;
    const SolveReport rep = solve_finite(prob, tol, 200000);
    CHECK(rep.converged);
    CHECK(rep.gap <= tol * (1 + std::abs(rep.primal_value)));
    CHECK(rep.gap >= -tol);
    CHECK(rep.kkt_inf_norm <= 10 * tol);
    const Matrix M = prob.op.design_matrix(prob.positions);
    CHECK((M.transpose() * rep.dual).lpNorm<Eigen::Infinity>() <= 1 + 10 * tol);
    CHECK(rep.dual.isApprox(prob.fidelity.dual_candidate(M * rep.amplitudes)));

    // A different start reaches the same value.
    SolverOptions opts;
    opts.tol = tol;
    const Vector warm = test::random_vector(gen, prob.positions.cols());
    const SolveReport other = solve_finite(prob, opts, &warm);
    CHECK(std::abs(other.primal_value - rep.primal_value) <= 2 * tol * (1 + std::abs(rep.primal_value)));
  }
}

TEST_CASE("sign residual vanishes on the support of the optimum") {
  auto gen = test::rng(44);
  for (int trial = 0; trial < 10; ++trial) {
    const FiniteProblem prob = random_problem(gen, 30, 40);
    const SolveReport rep = solve_finite(prob, 1e-11, 200000);
    CHECK(rep.sign_residual <= 1e-5);
  }
}

TEST_CASE("duality gap") {
  auto gen = test::rng(45);
  const FiniteProblem prob = random_problem(gen, 40, 30);
  const QuadraticFidelity& f = prob.fidelity;
  CHECK(duality_gap(DiscreteMeasure(1), Vector::Zero(f.size()), prob.op, f) ==
        doctest::Approx(0.5 * f.L * f.y.squaredNorm()).epsilon(1e-14));

  const SolveReport rep = solve_finite(prob, 1e-10, 200000);
  const DiscreteMeasure mu(prob.positions, rep.amplitudes);
  const double gap = duality_gap(mu, rep.dual_feasible, prob.op, f);
  CHECK(std::abs(gap) <= 1e-10 * (1 + rep.primal_value));
  CHECK(gap == doctest::Approx(rep.gap).epsilon(1e-12));

  std::vector<Index> order(mu.size());
  for (Index i = 0; i < mu.size(); ++i) order[i] = mu.size() - 1 - i;
  DiscreteMeasure permuted(prob.positions(Eigen::all, order), rep.amplitudes(order));
  CHECK(duality_gap(permuted, rep.dual_feasible, prob.op, f) == doctest::Approx(gap).epsilon(1e-12).scale(1));
}

TEST_CASE("power iteration") {
  auto gen = test::rng(46);
  const Matrix M = Matrix::NullaryExpr(20, 12, [&] { return std::normal_distribution<double>()(gen); });
  const Matrix G = M.transpose() * M;
  const double exact = Eigen::SelfAdjointEigenSolver<Matrix>(G).eigenvalues().maxCoeff();
  const double est = power_iteration(G, 100, 7);
  CHECK(est <= exact * (1 + 1e-12));
  CHECK(est >= 0.9 * exact);
  CHECK(est == power_iteration(G, 100, 7));
}

TEST_CASE("solves are fast") {
  auto gen = test::rng(47);
  for (int trial = 0; trial < 5; ++trial) {
    const FiniteProblem prob = random_problem(gen, 60, 100);
    const auto start = std::chrono::steady_clock::now();
    solve_finite(prob);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 1.0);
  }
}

}  // TEST_SUITE
