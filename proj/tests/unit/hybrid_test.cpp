#include "support.hpp"
#include "tvx/harness.hpp"
#include "tvx/hybrid.hpp"

#include <doctest.h>

using namespace tvx;

TEST_SUITE("hybrid") {

TEST_CASE("atom counting merges close atoms and ignores tiny ones") {
  PointSet X(1, 4);
  X << 0.1, 0.1 + 1e-6, 0.5, 0.9;
  Vector a(4);
  a << 1.0, 0.5, -2.0, 1e-9;
  CHECK(count_atoms(DiscreteMeasure(X, a), 1e-4, 1e-6) == 2);
  CHECK(count_atoms(DiscreteMeasure(X, a), 1e-8, 0.0) == 4);
  CHECK(count_atoms(DiscreteMeasure(1), 1e-4, 1e-6) == 0);
}

TEST_CASE("reported J is monotone and the output is feasible") {
  for (std::uint64_t seed : {21, 22}) {
    const Problem prob = gen_fourier1d(seed);
    HybridConfig cfg;
    cfg.exchange.max_iter = 10;
    const HybridResult res = run_hybrid(prob, cfg);
    double best = std::numeric_limits<double>::infinity();
    for (const MetricsRow& row : res.history) {
      const double J = std::min(row.J, std::isnan(row.post_slide_J) ? row.J : row.post_slide_J);
      best = std::min(best, J);
    }
    const double J_out = objective_J(res.measure, prob.op, prob.fidelity);
    CHECK(J_out <= best + 2 * cfg.exchange.solver.tol * (1 + best));

    const Maximizers post = extract_maximizers(prob.op, res.dual, MaximizerConfig::defaults_for(prob.domain()));
    if (!res.flagged && res.history.size() < 10) CHECK(post.sup_estimate - 1 <= cfg.exchange.stop_feas_tol);
    CHECK(res.dual.isApprox(-prob.fidelity.gradient(prob.op.forward(res.measure))));
  }
}

TEST_CASE("hybrid is never worse than exchange on the same budget") {
  for (std::uint64_t seed : {23, 24, 25}) {
    const Problem prob = gen_fourier1d(seed);
    HybridConfig cfg;
    cfg.exchange.max_iter = 6;
    const HybridResult hyb = run_hybrid(prob, cfg);
    const ExchangeResult ex = run_exchange(prob, cfg.exchange);
    const double Jh = objective_J(hyb.measure, prob.op, prob.fidelity);
    const double Je = objective_J(ex.measure, prob.op, prob.fidelity);
    CHECK(Jh <= Je + 2 * cfg.exchange.solver.tol * (1 + Je));
  }
}

TEST_CASE("slide columns are recorded") {
  const Problem prob = gen_fourier1d(26);
  HybridConfig cfg;
  cfg.exchange.max_iter = 4;
  const HybridResult res = run_hybrid(prob, cfg);
  REQUIRE_FALSE(res.history.empty());
  CHECK(res.history.front().slide_iters >= 0);
  CHECK(res.slides.size() <= res.history.size());
  CHECK(res.duals.size() == res.history.size());
  for (const MetricsRow& row : res.history) CHECK(row.atoms >= 0);
}

TEST_CASE("refit changes only the reported amplitudes") {
  const Problem prob = gen_fourier1d(27);
  HybridConfig on, off;
  on.exchange.max_iter = off.exchange.max_iter = 4;
  off.refit = false;
  const HybridResult a = run_hybrid(prob, on), b = run_hybrid(prob, off);
  const size_t n = std::min(a.history.size(), b.history.size());
  for (size_t k = 0; k < n; ++k) CHECK(a.history[k].grid_size == b.history[k].grid_size);
}

TEST_CASE("easy gaussian setting stops after one outer iteration") {
  // From the default 8x8 start the first certificate resolves only 10 of the 11 peaks.
  Gauss2DParams params;
  params.initial_n = 16;
  const Problem prob = gen_gauss2d(1, params);
  HybridConfig cfg;
  const HybridResult res = run_hybrid(prob, cfg);
  CHECK(res.history.size() == 1);
  CHECK(res.history.front().atoms == 11);
}

}  // TEST_SUITE
