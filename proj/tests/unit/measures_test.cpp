#include "support.hpp"
#include "tvx/measures.hpp"

#include <doctest.h>

#include <vector>

using namespace tvx;

namespace {

PointSet line(std::initializer_list<double> xs) {
  PointSet p(1, static_cast<Index>(xs.size()));
  Index j = 0;
  for (double x : xs) p(0, j++) = x;
  return p;
}

DiscreteMeasure measure1d(std::initializer_list<double> xs, std::initializer_list<double> as) {
  return DiscreteMeasure(line(xs), Eigen::Map<const Vector>(as.begin(), static_cast<Index>(as.size())));
}

}  // namespace

TEST_SUITE("measures") {

TEST_CASE("tv_norm of small measures") {
  CHECK(tv_norm(DiscreteMeasure(1)) == 0.0);
  CHECK(tv_norm(measure1d({0.3, 0.7}, {2.0, -1.0})) == 3.0);
  CHECK(tv_norm(measure1d({0.5}, {-0.25})) == 0.25);
}

TEST_CASE("tv_norm is absolutely homogeneous") {
  auto gen = test::rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Index s = 1 + trial % 7;
    DiscreteMeasure mu(test::random_points(gen, Domain::square(-1, 1), s), test::random_vector(gen, s, -3, 3));
    const double c = test::uniform(gen, -4, 4);
    DiscreteMeasure scaled(mu.positions, c * mu.amplitudes);
    CHECK(tv_norm(scaled) == doctest::Approx(std::abs(c) * tv_norm(mu)).epsilon(1e-14));
  }
}

TEST_CASE("set_distance examples") {
  CHECK(set_distance(line({0.0}), line({0.0})) == 0.0);
  CHECK(set_distance(line({0.0}), line({0.0, 1.0})) == 1.0);
  CHECK(set_distance(line({0.0, 1.0}), line({0.0})) == 0.0);
  CHECK(set_distance(line({0.2, 0.8}), line({0.5})) == doctest::Approx(0.3).epsilon(1e-15));
  CHECK_THROWS_AS(set_distance(PointSet(1, 0), line({0.5})), Error);
  CHECK_THROWS_AS(set_distance(line({0.5}), PointSet(1, 0)), Error);
}

TEST_CASE("set_distance vanishes exactly on subsets") {
  auto gen = test::rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const PointSet p = test::random_points(gen, Domain::square(0, 1), 12);
    PointSet sub(2, 4);
    for (Index j = 0; j < 4; ++j) sub.col(j) = p.col((3 * j + trial) % 12);
    CHECK(set_distance(p, sub) == 0.0);
    PointSet moved = sub;
    moved(0, 2) += 1e-13;
    CHECK(set_distance(p, moved) > 0.0);
  }
}

TEST_CASE("one-sided triangle inequality") {
  auto gen = test::rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const Domain box = Domain::square(-1, 1);
    const PointSet p = test::random_points(gen, box, 1 + trial % 5);
    const PointSet q = test::random_points(gen, box, 1 + trial % 7);
    const PointSet r = test::random_points(gen, box, 1 + trial % 3);
    CHECK(set_distance(p, r) <= set_distance(p, q) + set_distance(q, r) + 1e-15);
  }
}

TEST_CASE("merge_atoms examples") {
  const DiscreteMeasure sparse = measure1d({0.1, 0.5, 0.9}, {1.0, -2.0, 0.5});
  const DiscreteMeasure same = merge_atoms(sparse, 1e-6);
  CHECK(same.positions == sparse.positions);
  CHECK(same.amplitudes == sparse.amplitudes);

  const DiscreteMeasure pair = merge_atoms(measure1d({0.5, 0.5 + 1e-9}, {1.0, 1.0}), 1e-6);
  REQUIRE(pair.size() == 1);
  CHECK(pair.amplitudes(0) == 2.0);
  CHECK(pair.positions(0, 0) == doctest::Approx(0.5 + 5e-10).epsilon(1e-15));

  CHECK(merge_atoms(measure1d({0.5, 0.5}, {1.0, -1.0}), 1e-6, 1e-12).empty());
}

TEST_CASE("merge_atoms separates and is idempotent") {
  auto gen = test::rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const Index s = 20;
    DiscreteMeasure mu(test::random_points(gen, Domain::square(0, 1), s), test::random_vector(gen, s, 0.1, 1.0));
    const double radius = 0.15;
    const DiscreteMeasure once = merge_atoms(mu, radius);
    for (Index i = 0; i < once.size(); ++i)
      for (Index j = i + 1; j < once.size(); ++j)
        CHECK((once.positions.col(i) - once.positions.col(j)).norm() > radius);
    CHECK(tv_norm(once) == doctest::Approx(tv_norm(mu)).epsilon(1e-14));
    const DiscreteMeasure twice = merge_atoms(once, radius);
    CHECK(twice.positions == once.positions);
    CHECK(twice.amplitudes == once.amplitudes);
  }
}

TEST_CASE("uniform grids") {
  const PointSet torus = uniform_grid(Domain::unit_torus(), 8);
  REQUIRE(torus.cols() == 8);
  CHECK(torus(0, 0) == 0.0);
  CHECK(torus(0, 7) == doctest::Approx(7.0 / 8));
  const PointSet box = uniform_grid(Domain::square(-1, 1), 3);
  CHECK(box.cols() == 9);
  CHECK(box.rowwise().maxCoeff().isApprox(Vector::Ones(2)));
}

}  // TEST_SUITE
