#include "support.hpp"
#include "tvx/harness.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace tvx;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("tvx_unit_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Smallest value v such that at least p percent of the values are <= v.
double rank_oracle(const std::vector<double>& values, double p) {
  double best = std::numeric_limits<double>::infinity();
  for (double v : values) {
    const auto below = std::count_if(values.begin(), values.end(), [&](double w) { return w <= v; });
    if (100.0 * below >= p * values.size() && v < best) best = v;
  }
  return best;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("fourier generator") {
  const Problem p = gen_fourier1d(7);
  REQUIRE(p.truth.has_value());
  CHECK(p.truth->measure.size() == 5);
  CHECK(p.op.channels() == 60);
  CHECK(p.initial_grid.cols() == 8);
  CHECK(p.truth->measure.amplitudes.cwiseAbs().maxCoeff() <= 1.1);
  CHECK(p.truth->measure.amplitudes.cwiseAbs().minCoeff() >= 0.9);
  CHECK(p.fidelity.y.isApprox(p.op.forward(p.truth->measure), 1e-15));
  CHECK(to_json(p).dump() == to_json(gen_fourier1d(7)).dump());
  CHECK(to_json(p).dump() != to_json(gen_fourier1d(8)).dump());
  Fourier1DParams bad;
  bad.s = 30;
  CHECK_THROWS_AS(gen_fourier1d(1, bad), Error);
}

TEST_CASE("gaussian generator") {
  const Problem p = gen_gauss2d(3);
  REQUIRE(p.truth.has_value());
  const DiscreteMeasure& mu0 = p.truth->measure;
  CHECK(p.op.channels() == 4096);
  CHECK(mu0.size() == 11);
  CHECK((mu0.amplitudes.array() > 0).all());
  CHECK(mu0.positions.cwiseAbs().maxCoeff() <= 0.4);

  Gauss2DParams clean;
  clean.noise_std = 0.0;
  const Problem q = gen_gauss2d(3, clean);
  CHECK(q.fidelity.y == q.op.forward(q.truth->measure));

  Gauss2DParams a, b;
  a.noise_seed = 100;
  b.noise_seed = 101;
  const Problem pa = gen_gauss2d(3, a), pb = gen_gauss2d(3, b);
  CHECK(pa.truth->measure.positions == pb.truth->measure.positions);
  CHECK(pa.truth->measure.amplitudes == pb.truth->measure.amplitudes);
  CHECK(pa.fidelity.y != pb.fidelity.y);

  const Problem hard = generate("gauss2d", 3, Json{{"preset", "hard"}});
  CHECK(hard.truth->measure.size() == 30);
  CHECK_THROWS_AS(generate("nope", 1, Json::object()), Error);
}

TEST_CASE("problem files round-trip") {
  const Problem p = gen_gauss2d(4);
  const Problem back = problem_from_json(to_json(p));
  CHECK(back.fidelity.y == p.fidelity.y);
  CHECK(back.truth->measure.positions == p.truth->measure.positions);
  CHECK(to_json(back).dump() == to_json(p).dump());
}

TEST_CASE("nearest rank percentiles") {
  std::vector<double> v;
  for (int i = 20; i >= 1; --i) v.push_back(i);
  CHECK(nearest_rank(v, 5) == 1.0);
  CHECK(nearest_rank(v, 50) == 10.0);
  CHECK(nearest_rank(v, 95) == 19.0);
  CHECK(nearest_rank({3.5}, 50) == 3.5);
  CHECK(std::isnan(nearest_rank({}, 50)));
  auto gen = test::rng(71);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> w(1 + t % 37);
    for (double& x : w) x = std::floor(test::uniform(gen, 0, 10));
    for (double p : {5.0, 50.0, 95.0, 100.0}) CHECK(nearest_rank(w, p) == rank_oracle(w, p));
  }
}

TEST_CASE("batch aggregation and determinism") {
  BatchSpec spec;
  spec.generator = "fourier1d";
  spec.seeds = {0, 1, 2};
  spec.config.exchange.max_iter = 5;
  spec.config.exchange.stop_feas_tol = 0.0;
  spec.config.exchange.stop_when_stalled = false;
  spec.reference = ReferenceMode::None;
  spec.out_dir = scratch("batch_a");
  const BatchResult res = run_batch(spec);
  CHECK(res.completed.size() == 3);
  CHECK(res.failures.empty());
  const CsvTable agg = read_csv(spec.out_dir / "aggregate.csv");
  CHECK(agg.rows.size() == 5);
  const CsvTable one = read_csv(spec.out_dir / "seed_0" / "metrics.csv");
  CHECK(agg.header.size() == 2 + 3 * (one.header.size() - 1));
  CHECK(agg.column("J_p50") >= 0);
  CHECK(fs::exists(spec.out_dir / "batch.json"));

  const fs::path first = spec.out_dir;
  spec.out_dir = scratch("batch_b");
  run_batch(spec);
  CHECK(slurp(first / "aggregate.csv") == slurp(spec.out_dir / "aggregate.csv"));
  CHECK(slurp(first / "seed_1" / "metrics.csv") == slurp(spec.out_dir / "seed_1" / "metrics.csv"));

  spec.seeds = {2};
  spec.out_dir = scratch("batch_c");
  run_batch(spec);
  const CsvTable single = read_csv(spec.out_dir / "aggregate.csv");
  const CsvTable run = read_csv(spec.out_dir / "seed_2" / "metrics.csv");
  for (size_t r = 0; r < run.rows.size(); ++r) {
    CHECK(single.rows[r][single.column("J_p50")] == run.rows[r][run.column("J")]);
    CHECK(single.rows[r][single.column("grid_size_p05")] == run.rows[r][run.column("grid_size")]);
  }

  spec.seeds = {1, 1};
  CHECK_THROWS_AS(run_batch(spec), Error);
}

TEST_CASE("basin study at zero perturbation") {
  const Problem prob = gen_fourier1d(31);
  const Reference ref = compute_reference(prob);
  BasinSpec spec;
  spec.gammas = {0.0, 0.01};
  spec.runs_per_gamma = 5;
  const std::vector<BasinRow> rows = basin_study(prob, *ref.measure, spec);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].successes == 5);
  CHECK(rows[0].runs == 5);
  CHECK(rows[1].runs == 5);
  const fs::path dir = scratch("basin");
  write_basin_csv(dir / "basin.csv", rows);
  CHECK(slurp(dir / "basin.csv").rfind("gamma,successes,runs\n0,5,5\n", 0) == 0);
}

TEST_CASE("bounds on a written fourier run") {
  const Problem prob = gen_fourier1d(32);
  const Reference ref = compute_reference(prob);
  HybridConfig cfg;
  cfg.exchange.max_iter = 12;
  const RunOutput run = run_algorithm(prob, Algorithm::Exchange, cfg, &ref);
  const OperatorConstants c = prob.op.constants();
  const BoundReport rep = check_bounds(prob, run, &ref, cfg.exchange.solver.tol, c);
  CHECK(rep.has_reference);
  CHECK(rep.violations() == 0);
  CHECK(rep.checks.size() >= 2 * run.history.size());

  const fs::path dir = scratch("bounds");
  write_run(dir, prob, Algorithm::Exchange, cfg, run, &ref);
  for (const char* name : {"problem.json", "config.json", "metrics.csv", "diagnostics.csv", "measure_final.json",
                           "dual_final.json", "grids.json", "iterates.json", "reference.json"}) {
    CHECK(fs::exists(dir / name));
  }
  CHECK(slurp(dir / "metrics.csv").rfind("k,J,J_hat,grid_size,Xk_size,feas_excess,dist_grid_xi,dist_xi_Xk,dist_Xk_xi,q_err,J_gap\n", 0) == 0);
  const BoundReport from_disk = check_bounds(dir, c);
  CHECK(from_disk.violations() == 0);
  CHECK(from_disk.checks.size() == rep.checks.size());
}

TEST_CASE("norm growth bound with a maximiser on the grid") {
  const Problem prob = gen_fourier1d(33);
  RunOutput run;
  MetricsRow row;
  row.k = 0;
  row.grid_size = 8;
  row.feas_excess = 5e-9;
  row.grid_feas_excess = 0.0;
  run.history.push_back(row);
  run.final_grid = prob.initial_grid;
  run.duals.push_back(Vector::Zero(prob.op.channels()));
  run.maximizers.push_back(prob.initial_grid.col(3));
  const BoundReport rep = check_bounds(prob, run, nullptr, 1e-9, prob.op.constants());
  REQUIRE(rep.checks.size() == 2);
  CHECK(rep.checks[1].name == "norm_growth");
  CHECK(rep.checks[1].rhs == doctest::Approx(1 + 10 * 1e-9).epsilon(1e-15));
  CHECK(rep.checks[1].ok());
}

TEST_CASE("stable hash") {
  CHECK(stable_hash("") == 0xcbf29ce484222325ULL);
  CHECK(stable_hash("a") == 0xaf63dc4c8601ec8cULL);
}

}  // TEST_SUITE
