#include "tvx/harness.hpp"

#include "tvx/finite_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <cstdio>
#include <random>
#include <thread>

namespace tvx {

namespace fs = std::filesystem;

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw Error(std::string(what) + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; }) == allowed.end()) {
      throw Error(std::string(what) + ": unknown key '" + it.key() + "'");
    }
  }
}

constexpr std::uint64_t kNoiseSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

std::uint64_t stable_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------------------------------
// generators

Problem gen_fourier1d(std::uint64_t seed, const Fourier1DParams& params) {
  const int freqs = params.kmax - params.kmin + 1;
  if (freqs < 1) throw Error("gen_fourier1d: empty frequency range");
  if (params.s < 1) throw Error("gen_fourier1d: s must be positive");
  if (params.s >= freqs) throw Error("gen_fourier1d: s must be smaller than the frequency count");
  if (!(params.amp_lo > 0 && params.amp_hi >= params.amp_lo)) throw Error("gen_fourier1d: bad amplitude band");
  if (!(params.jitter >= 0 && params.jitter < 0.5)) throw Error("gen_fourier1d: jitter must lie in [0, 0.5)");

  MeasurementOperator op = MeasurementOperator::fourier1d(params.kmin, params.kmax);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shift = unit(rng);
  DiscreteMeasure mu0(1);
  for (int i = 0; i < params.s; ++i) {
    const double jitter = params.jitter * (2 * unit(rng) - 1);
    double x = shift + (i + jitter) / params.s;
    x -= std::floor(x);
    const double mag = params.amp_lo + (params.amp_hi - params.amp_lo) * unit(rng);
    const double sign = unit(rng) < 0.5 ? -1.0 : 1.0;
    mu0.push_back({Point::Constant(1, x), sign * mag});
  }
  Vector y = op.forward(mu0);
  if (params.noise_std > 0) {
    std::mt19937_64 noise_rng(seed ^ kNoiseSalt);
    std::normal_distribution<double> normal(0.0, params.noise_std);
    for (Index i = 0; i < y.size(); ++i) y(i) += normal(noise_rng);
  }
  Problem p{op, QuadraticFidelity(y, params.L), GroundTruth{mu0, seed ^ kNoiseSalt},
            uniform_grid(op.domain(), params.initial_n), "fourier1d-seed" + std::to_string(seed)};
  return p;
}

Gauss2DParams Gauss2DParams::hard() {
  Gauss2DParams p;
  p.s = 30;
  p.noise_rel = 0.02;
  return p;
}

Problem gen_gauss2d(std::uint64_t seed, const Gauss2DParams& params) {
  if (params.s < 1) throw Error("gen_gauss2d: s must be positive");
  MeasurementOperator op = MeasurementOperator::gauss2d(params.grid_n, params.sigma);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coord(-params.spike_box, params.spike_box);
  std::uniform_real_distribution<double> amp(params.amp_lo, params.amp_hi);
  DiscreteMeasure mu0(2);
  int attempts = 0;
  while (mu0.size() < params.s) {
    if (++attempts > 1'000'000) throw Error("gen_gauss2d: cannot place the spikes with the requested separation");
    Point x(2);
    x(0) = coord(rng);
    x(1) = coord(rng);
    if (distance_to_set(mu0.positions, x) < params.min_separation) continue;
    mu0.push_back({x, amp(rng)});
  }
  Vector y = op.forward(mu0);
  const double std_dev = params.noise_std.value_or(params.noise_rel * y.cwiseAbs().maxCoeff());
  const std::uint64_t noise_seed = params.noise_seed.value_or(seed ^ kNoiseSalt);
  if (std_dev > 0) {
    std::mt19937_64 noise_rng(noise_seed);
    std::normal_distribution<double> normal(0.0, std_dev);
    for (Index i = 0; i < y.size(); ++i) y(i) += normal(noise_rng);
  }
  Problem p{op, QuadraticFidelity(y, params.L), GroundTruth{mu0, noise_seed},
            uniform_grid(op.domain(), params.initial_n), "gauss2d-seed" + std::to_string(seed)};
  return p;
}

Fourier1DParams fourier1d_params_from_json(const Json& j) {
  check_keys(j, {"kmin", "kmax", "s", "amp_lo", "amp_hi", "jitter", "initial_n", "noise_std", "L"}, "fourier1d params");
  Fourier1DParams p;
  read_opt(j, "kmin", p.kmin);
  read_opt(j, "kmax", p.kmax);
  read_opt(j, "s", p.s);
  read_opt(j, "amp_lo", p.amp_lo);
  read_opt(j, "amp_hi", p.amp_hi);
  read_opt(j, "jitter", p.jitter);
  read_opt(j, "initial_n", p.initial_n);
  read_opt(j, "noise_std", p.noise_std);
  read_opt(j, "L", p.L);
  return p;
}

Gauss2DParams gauss2d_params_from_json(const Json& j) {
  check_keys(j,
             {"preset", "grid_n", "sigma", "s", "spike_box", "amp_lo", "amp_hi", "min_separation", "noise_rel",
              "noise_std", "noise_seed", "initial_n", "L"},
             "gauss2d params");
  Gauss2DParams p;
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "hard") {
      p = Gauss2DParams::hard();
    } else if (preset != "default") {
      throw Error("gauss2d params: unknown preset '" + preset + "'");
    }
  }
  read_opt(j, "grid_n", p.grid_n);
  read_opt(j, "sigma", p.sigma);
  read_opt(j, "s", p.s);
  read_opt(j, "spike_box", p.spike_box);
  read_opt(j, "amp_lo", p.amp_lo);
  read_opt(j, "amp_hi", p.amp_hi);
  read_opt(j, "min_separation", p.min_separation);
  read_opt(j, "noise_rel", p.noise_rel);
  if (j.contains("noise_std")) p.noise_std = j.at("noise_std").get<double>();
  if (j.contains("noise_seed")) p.noise_seed = j.at("noise_seed").get<std::uint64_t>();
  read_opt(j, "initial_n", p.initial_n);
  read_opt(j, "L", p.L);
  return p;
}

Problem generate(const std::string& generator, std::uint64_t seed, const Json& params) {
  const Json& pj = params.is_null() ? Json::object() : params;
  if (generator == "fourier1d") return gen_fourier1d(seed, fourier1d_params_from_json(pj));
  if (generator == "gauss2d") return gen_gauss2d(seed, gauss2d_params_from_json(pj));
  throw Error("unknown generator '" + generator + "'");
}

// ---------------------------------------------------------------------------------------
// reference solutions and runs

OperatorConstants default_constants(const MeasurementOperator& op) { return op.constants(256).inflated(1.05); }

Reference compute_reference(const Problem& problem, const ReferenceOptions& opts) {
  const MeasurementOperator& op = problem.op;
  const QuadraticFidelity& f = problem.fidelity;
  const double diam = problem.domain().diameter();

  HybridConfig hc;
  hc.exchange.max_iter = opts.exchange_iters;
  hc.exchange.solver.tol = opts.solver_tol;
  hc.exchange.stop_feas_tol = 1e-10;
  hc.slide.grad_tol = opts.grad_tol;
  const HybridResult hr = run_hybrid(problem, hc);

  DiscreteMeasure start = merge_atoms(hr.measure, opts.merge_radius * diam, 0.0);
  if (!start.empty()) start = prune_atoms(start, 1e-9 * start.amplitudes.cwiseAbs().maxCoeff());

  DiscreteMeasure best = hr.measure;
  double best_J = objective_J(best, op, f);
  if (!start.empty()) {
    SlideConfig sc;
    sc.grad_tol = opts.grad_tol;
    sc.max_iter = opts.slide_max_iter;
    const SlideResult sr = run_sliding(start, op, f, sc);
    const double J = objective_J(sr.final, op, f);
    if (J <= best_J + 1e-12 * (1 + std::abs(best_J))) {
      best = sr.final;
      best_J = J;
    }
  }
  Reference ref;
  ref.measure = best;
  ref.xi = best.positions;
  ref.q_star = -f.gradient(op.forward(best));
  ref.J_star = best_J;
  return ref;
}

RunOutput run_algorithm(const Problem& problem, Algorithm algorithm, const HybridConfig& cfg,
                        const Reference* reference) {
  RunOutput out;
  out.initial_grid = initial_grid(problem, cfg.exchange);
  if (algorithm == Algorithm::Exchange) {
    ExchangeResult r = run_exchange(problem, cfg.exchange, reference);
    out.measure = std::move(r.measure);
    out.dual = std::move(r.dual);
    out.history = std::move(r.history);
    out.duals = std::move(r.duals);
    out.maximizers = std::move(r.maximizers);
    out.hat_measures = std::move(r.hat_measures);
    out.final_grid = r.final_state.grid;
    out.flagged = r.flagged;
  } else {
    HybridResult r = run_hybrid(problem, cfg, reference);
    out.measure = std::move(r.measure);
    out.dual = std::move(r.dual);
    out.history = std::move(r.history);
    out.duals = std::move(r.duals);
    out.maximizers = std::move(r.maximizers);
    out.hat_measures = std::move(r.hat_measures);
    out.final_grid = r.final_state.grid;
    out.flagged = r.flagged;
  }
  return out;
}

void write_run(const fs::path& dir, const Problem& problem, Algorithm algorithm, const HybridConfig& cfg,
               const RunOutput& run, const Reference* reference) {
  fs::create_directories(dir);
  write_json(dir / "problem.json", to_json(problem));
  Json config = algorithm == Algorithm::Exchange ? Json{{"algorithm", "exchange"}, {"config", to_json(cfg.exchange)}}
                                                  : Json{{"algorithm", "hybrid"}, {"config", to_json(cfg)}};
  write_json(dir / "config.json", config);
  write_metrics_csv(dir / "metrics.csv", run.history, algorithm == Algorithm::Hybrid);
  write_diagnostics_csv(dir / "diagnostics.csv", run.history);
  write_json(dir / "measure_final.json", to_json(run.measure));
  write_json(dir / "dual_final.json", Json{{"q", vector_to_json(run.dual)}});
  Json grid_sizes = Json::array();
  for (const MetricsRow& r : run.history) grid_sizes.push_back(r.grid_size);
  write_json(dir / "grids.json", Json{{"d", problem.op.dim()},
                                      {"initial", points_to_json(run.initial_grid)},
                                      {"final", points_to_json(run.final_grid)},
                                      {"grid_sizes", grid_sizes}});
  Json iterates = Json::array();
  for (std::size_t k = 0; k < run.duals.size(); ++k) {
    iterates.push_back(Json{{"k", k},
                            {"dual", vector_to_json(run.duals[k])},
                            {"maximizers", points_to_json(run.maximizers[k])},
                            {"hat_measure", to_json(run.hat_measures[k])}});
  }
  write_json(dir / "iterates.json", Json{{"d", problem.op.dim()}, {"iterates", iterates}});
  if (reference != nullptr) write_json(dir / "reference.json", to_json(*reference));
}

// ---------------------------------------------------------------------------------------
// batches

BatchSpec batch_spec_from_json(const Json& j) {
  check_keys(j, {"generator", "params", "seeds", "algorithm", "config", "reference", "out_dir", "threads"}, "batch");
  BatchSpec s;
  read_opt(j, "generator", s.generator);
  if (j.contains("params")) s.params = j.at("params");
  if (j.contains("seeds")) {
    const Json& seeds = j.at("seeds");
    if (seeds.is_object()) {
      const std::uint64_t first = seeds.value("first", std::uint64_t{0});
      const std::uint64_t count = seeds.at("count").get<std::uint64_t>();
      for (std::uint64_t i = 0; i < count; ++i) s.seeds.push_back(first + i);
    } else {
      s.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
  }
  if (j.contains("algorithm")) {
    const std::string a = j.at("algorithm").get<std::string>();
    if (a == "exchange") {
      s.algorithm = Algorithm::Exchange;
    } else if (a == "hybrid") {
      s.algorithm = Algorithm::Hybrid;
    } else {
      throw Error("batch: unknown algorithm '" + a + "'");
    }
  }
  if (j.contains("config")) {
    if (s.algorithm == Algorithm::Exchange) {
      s.config.exchange = exchange_config_from_json(j.at("config"));
    } else {
      s.config = hybrid_config_from_json(j.at("config"));
    }
  }
  if (j.contains("reference")) {
    const std::string r = j.at("reference").get<std::string>();
    if (r == "none") {
      s.reference = ReferenceMode::None;
    } else if (r == "long_run") {
      s.reference = ReferenceMode::LongRun;
    } else {
      throw Error("batch: unknown reference mode '" + r + "'");
    }
  }
  if (j.contains("out_dir")) s.out_dir = j.at("out_dir").get<std::string>();
  read_opt(j, "threads", s.threads);
  return s;
}

double nearest_rank(std::vector<double> values, double p) {
  if (values.empty()) return std::nan("");
  if (!(p >= 0 && p <= 100)) throw Error("nearest_rank: p must lie in [0, 100]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

void write_aggregate_csv(const fs::path& path, const std::vector<CsvTable>& tables) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  if (tables.empty()) {
    out << "k,n\n";
    return;
  }
  const std::vector<std::string>& header = tables.front().header;
  for (const CsvTable& t : tables) {
    if (t.header != header) throw Error("aggregate: metric tables have different headers");
  }
  const int kcol = tables.front().column("k");
  out << "k,n";
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) == kcol) continue;
    out << ',' << header[c] << "_p05," << header[c] << "_p50," << header[c] << "_p95";
  }
  out << '\n';
  std::size_t rows = 0;
  for (const CsvTable& t : tables) rows = std::max(rows, t.rows.size());
  for (std::size_t r = 0; r < rows; ++r) {
    int n = 0;
    for (const CsvTable& t : tables) n += r < t.rows.size() ? 1 : 0;
    out << r << ',' << n;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (static_cast<int>(c) == kcol) continue;
      std::vector<double> vals;
      for (const CsvTable& t : tables) {
        if (r < t.rows.size() && c < t.rows[r].size() && !std::isnan(t.rows[r][c])) vals.push_back(t.rows[r][c]);
      }
      out << ',' << format_number(nearest_rank(vals, 5)) << ',' << format_number(nearest_rank(vals, 50)) << ','
          << format_number(nearest_rank(vals, 95));
    }
    out << '\n';
  }
}

BatchResult run_batch(const BatchSpec& spec) {
  std::vector<std::uint64_t> seeds = spec.seeds;
  if (seeds.empty()) {
    for (std::uint64_t s = 0; s < 100; ++s) seeds.push_back(s);
  }
  {
    std::vector<std::uint64_t> sorted = seeds;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw Error("batch: seeds must be distinct");
  }
  if (spec.out_dir.empty()) throw Error("batch: out_dir is required");
  fs::create_directories(spec.out_dir);

  struct Outcome {
    bool ok = false;
    std::string error;
    std::vector<MetricsRow> history;
  };
  std::vector<Outcome> outcomes(seeds.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < seeds.size(); i = next++) {
      const std::uint64_t seed = seeds[i];
      try {
        const Problem problem = generate(spec.generator, seed, spec.params);
        std::optional<Reference> ref;
        if (spec.reference == ReferenceMode::LongRun) ref = compute_reference(problem);
        const RunOutput run = run_algorithm(problem, spec.algorithm, spec.config, ref ? &*ref : nullptr);
        write_run(spec.out_dir / ("seed_" + std::to_string(seed)), problem, spec.algorithm, spec.config, run,
                  ref ? &*ref : nullptr);
        outcomes[i].ok = true;
        outcomes[i].history = run.history;
      } catch (const std::exception& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const int threads = std::max(1, spec.threads);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  BatchResult res;
  std::vector<CsvTable> tables;
  Json completed = Json::array(), failures = Json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (outcomes[i].ok) {
      res.completed.push_back(seeds[i]);
      res.histories.push_back(outcomes[i].history);
      tables.push_back(read_csv(spec.out_dir / ("seed_" + std::to_string(seeds[i])) / "metrics.csv"));
      completed.push_back(seeds[i]);
    } else {
      res.failures.emplace_back(seeds[i], outcomes[i].error);
      failures.push_back(Json{{"seed", seeds[i]}, {"error", outcomes[i].error}});
    }
  }
  write_aggregate_csv(spec.out_dir / "aggregate.csv", tables);

  const Json config = spec.algorithm == Algorithm::Exchange ? to_json(spec.config.exchange) : to_json(spec.config);
  const std::string config_text = config.dump();
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(stable_hash(config_text)));
  write_json(spec.out_dir / "batch.json",
             Json{{"generator", spec.generator},
                  {"params", spec.params},
                  {"prng", "std::mt19937_64"},
                  {"seeds", seeds},
                  {"algorithm", spec.algorithm == Algorithm::Exchange ? "exchange" : "hybrid"},
                  {"reference", spec.reference == ReferenceMode::LongRun ? "long_run" : "none"},
                  {"config", config},
                  {"config_hash", hash},
                  {"quantiles", "nearest-rank: ceil(p/100 n)-th smallest of the finite per-seed values"},
                  {"completed", completed},
                  {"failures", failures}});
  return res;
}

// ---------------------------------------------------------------------------------------
// basin of attraction

std::vector<BasinRow> basin_study(const Problem& problem, const DiscreteMeasure& reference, const BasinSpec& spec) {
  if (reference.empty()) throw Error("basin_study: empty reference");
  const Index s = reference.size();
  const int d = reference.dim();
  const Index n = s + s * d;
  Vector star(n);
  star.head(s) = reference.amplitudes;
  star.tail(s * d) = Eigen::Map<const Vector>(reference.positions.data(), s * d);
  const double scale = star.norm();

  SlideConfig sc = spec.slide;
  sc.max_iter = spec.max_descent_iters;

  std::vector<BasinRow> rows;
  for (std::size_t g = 0; g < spec.gammas.size(); ++g) {
    BasinRow row;
    row.gamma = spec.gammas[g];
    std::mt19937_64 rng(spec.seed ^ stable_hash("basin/" + std::to_string(g)));
    std::normal_distribution<double> normal;
    for (int r = 0; r < spec.runs_per_gamma; ++r) {
      ++row.runs;
      Vector delta(n);
      for (Index i = 0; i < n; ++i) delta(i) = normal(rng);
      const Vector start_vec = star + (row.gamma * scale / delta.norm()) * delta;
      DiscreteMeasure start(d);
      start.amplitudes = start_vec.head(s);
      start.positions = Eigen::Map<const Matrix>(start_vec.tail(s * d).data(), d, s);
      bool inside = true;
      for (Index i = 0; i < s; ++i) inside = inside && problem.domain().contains(start.positions.col(i), 0.0);
      if (!inside) continue;
      if ((start.amplitudes.array().abs() <= sc.eps_amp).any()) continue;
      SlideResult res;
      try {
        res = run_sliding(start, problem.op, problem.fidelity, sc);
      } catch (const Error&) {
        continue;
      }
      if (res.final.size() != s) {
        row.worst_distance = std::numeric_limits<double>::infinity();
        continue;
      }
      Vector fin(n);
      fin.head(s) = res.final.amplitudes;
      fin.tail(s * d) = Eigen::Map<const Vector>(res.final.positions.data(), s * d);
      row.worst_distance = std::max(row.worst_distance, (fin - star).norm());
      if ((fin - star).norm() <= spec.success_tol) {
        ++row.successes;
        row.max_iterations = std::max(row.max_iterations, res.iterations);
      }
    }
    rows.push_back(row);
  }
  return rows;
}

void write_basin_csv(const fs::path& path, const std::vector<BasinRow>& rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "gamma,successes,runs\n";
  for (const BasinRow& r : rows) out << format_number(r.gamma) << ',' << r.successes << ',' << r.runs << '\n';
}

// ---------------------------------------------------------------------------------------
// theory bounds

int BoundReport::violations() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const BoundCheck& c) { return !c.ok(); }));
}

Json BoundReport::to_json() const {
  Json list = Json::array();
  for (const BoundCheck& c : checks) {
    list.push_back(Json{{"check", c.name},
                        {"k", c.k},
                        {"lhs", number_json(c.lhs)},
                        {"rhs", number_json(c.rhs)},
                        {"margin", number_json(c.rhs - c.lhs)},
                        {"ok", c.ok()}});
  }
  return Json{{"violations", violations()},
              {"checks_run", checks.size()},
              {"skipped", skipped},
              {"has_reference", has_reference},
              {"constants",
               Json{{"kappa", constants.kappa},
                    {"kappa_grad", constants.kappa_grad},
                    {"kappa_hess", constants.kappa_hess},
                    {"exact", constants.exact}}},
              {"dual_radius", dual_radius},
              {"checks", list}};
}

BoundReport check_bounds(const Problem& problem, const RunOutput& run, const Reference* reference, double solver_tol,
                         const OperatorConstants& constants) {
  const MeasurementOperator& op = problem.op;
  const QuadraticFidelity& f = problem.fidelity;
  BoundReport rep;
  rep.constants = constants;
  rep.dual_radius = f.dual_radius();
  const double R = rep.dual_radius;
  // Slack for the reference solution, which is itself only accurate to about this level.
  const double ref_slack = 1e-8;

  const std::size_t K = std::min(run.history.size(), run.duals.size());
  for (std::size_t k = 0; k < K; ++k) {
    const MetricsRow& row = run.history[k];
    const int kk = row.k;
    rep.checks.push_back({"dual_radius", kk, run.duals[k].norm(), R});

    double dist = 0.0;
    if (k < run.maximizers.size() && run.maximizers[k].cols() > 0) {
      const PointSet grid = run.final_grid.leftCols(row.grid_size);
      dist = set_distance(grid, run.maximizers[k]);
    }
    const double grid_excess = std::isnan(row.grid_feas_excess) ? 0.0 : std::max(0.0, row.grid_feas_excess);
    rep.checks.push_back({"norm_growth", kk, row.feas_excess + 1.0,
                          1.0 + grid_excess + 0.5 * R * constants.kappa_hess * dist * dist + 10 * solver_tol});
  }

  if (reference == nullptr || !reference->measure || !reference->J_star) return rep;
  rep.has_reference = true;
  const DiscreteMeasure& mu_star = *reference->measure;
  const double J_star = *reference->J_star;
  const Index s = mu_star.size();
  const double a1 = tv_norm(mu_star);
  const double qn = reference->q_star ? reference->q_star->norm() : (-f.gradient(op.forward(mu_star))).norm();
  const double C = 0.5 * a1 * constants.kappa_hess * qn + 0.5 * f.L * a1 * a1 * constants.kappa_grad * constants.kappa_grad;

  std::size_t k0 = K;
  for (std::size_t k = 0; k < K && k < run.maximizers.size(); ++k) {
    if (run.maximizers[k].cols() == s) {
      k0 = k;
      break;
    }
  }
  for (std::size_t k = k0; k < K && k < run.maximizers.size(); ++k) {
    const MetricsRow& row = run.history[k];
    if (run.maximizers[k].cols() == 0 || std::isnan(row.J_hat)) continue;
    const double tau = set_distance(run.maximizers[k], mu_star.positions);
    rep.checks.push_back({"simple_problem_value", row.k, row.J_hat,
                          J_star + C * tau * tau + 2 * solver_tol * (1 + std::abs(J_star)) + ref_slack});
    if (k < run.hat_measures.size() && run.hat_measures[k].size() == s) {
      try {
        const AmplitudeBound b = amplitude_error_bound(run.hat_measures[k], mu_star, op, f, constants, J_star);
        rep.checks.push_back({"amplitude_error", row.k, b.lhs, b.rhs + ref_slack});
      } catch (const Error&) {
        ++rep.skipped;
      }
    } else {
      ++rep.skipped;
    }
  }
  return rep;
}

BoundReport check_bounds(const fs::path& run_dir, std::optional<OperatorConstants> constants) {
  const Problem problem = problem_from_json(read_json(run_dir / "problem.json"));
  const Json config = read_json(run_dir / "config.json");
  double solver_tol = SolverOptions{}.tol;
  {
    const Json& c = config.at("config");
    const Json& ex = c.contains("exchange") ? c.at("exchange") : c;
    if (ex.contains("solver")) solver_tol = ex.at("solver").value("tol", solver_tol);
  }
  RunOutput run;
  const CsvTable metrics = read_csv(run_dir / "metrics.csv");
  const CsvTable diag = read_csv(run_dir / "diagnostics.csv");
  const int ck = metrics.column("k"), cJ = metrics.column("J"), cJh = metrics.column("J_hat"),
            cg = metrics.column("grid_size"), cf = metrics.column("feas_excess");
  const int cge = diag.column("grid_feas_excess");
  if (ck < 0 || cJ < 0 || cJh < 0 || cg < 0 || cf < 0) throw Error("check_bounds: metrics.csv lacks required columns");
  for (std::size_t r = 0; r < metrics.rows.size(); ++r) {
    MetricsRow row;
    row.k = static_cast<int>(metrics.rows[r][ck]);
    row.J = metrics.rows[r][cJ];
    row.J_hat = metrics.rows[r][cJh];
    row.grid_size = static_cast<long>(metrics.rows[r][cg]);
    row.feas_excess = metrics.rows[r][cf];
    if (cge >= 0 && r < diag.rows.size()) row.grid_feas_excess = diag.rows[r][cge];
    run.history.push_back(row);
  }
  const Json grids = read_json(run_dir / "grids.json");
  const int d = grids.at("d").get<int>();
  run.final_grid = points_from_json(grids.at("final"), d);
  const Json iterates = read_json(run_dir / "iterates.json");
  for (const Json& it : iterates.at("iterates")) {
    run.duals.push_back(vector_from_json(it.at("dual")));
    run.maximizers.push_back(points_from_json(it.at("maximizers"), d));
    run.hat_measures.push_back(measure_from_json(it.at("hat_measure")));
  }
  std::optional<Reference> ref;
  if (fs::exists(run_dir / "reference.json")) ref = reference_from_json(read_json(run_dir / "reference.json"));
  const OperatorConstants c = constants.value_or(default_constants(problem.op));
  return check_bounds(problem, run, ref ? &*ref : nullptr, solver_tol, c);
}

}  // namespace tvx
