#pragma once

#include "tvx/exchange.hpp"
#include "tvx/hybrid.hpp"
#include "tvx/io.hpp"
#include "tvx/problem.hpp"
#include "tvx/sliding.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tvx {

struct Fourier1DParams {
  int kmin = -15;
  int kmax = 14;
  int s = 5;
  double amp_lo = 0.9;
  double amp_hi = 1.1;
  double jitter = 0.2;  // fraction of the spike spacing 1/s
  int initial_n = 8;
  double noise_std = 0.0;
  double L = 1.0;
};

/// Spikes at a randomly shifted, jittered uniform grid with random signs; y = A mu0 (+ noise).
Problem gen_fourier1d(std::uint64_t seed, const Fourier1DParams& params = {});

struct Gauss2DParams {
  int grid_n = 64;
  double sigma = 0.05;
  int s = 11;
  double spike_box = 0.4;  // spikes uniform in [-spike_box, spike_box]^2
  double amp_lo = 0.5;
  double amp_hi = 1.5;
  double min_separation = 0.1;
  double noise_rel = 0.01;              // noise std as a fraction of |A mu0|_inf
  std::optional<double> noise_std;      // absolute std, overrides noise_rel
  std::optional<std::uint64_t> noise_seed;  // defaults to a value derived from the seed
  int initial_n = 8;                    // points per axis of the initial grid on the domain
  double L = 1.0;

  /// 30 spikes and twice the noise.
  static Gauss2DParams hard();
};

Problem gen_gauss2d(std::uint64_t seed, const Gauss2DParams& params = {});

Fourier1DParams fourier1d_params_from_json(const Json& j);
Gauss2DParams gauss2d_params_from_json(const Json& j);

/// Problem built by generator name ("fourier1d" or "gauss2d") with JSON parameter overrides.
Problem generate(const std::string& generator, std::uint64_t seed, const Json& params);

struct ReferenceOptions {
  int exchange_iters = 40;
  double solver_tol = 1e-11;
  double merge_radius = 1e-3;  // relative to diam, before the final descent
  double grad_tol = 1e-11;
  int slide_max_iter = 50000;
};

/// High-accuracy solution (mu*, q*, J*) from a long hybrid run followed by a descent on G.
Reference compute_reference(const Problem& problem, const ReferenceOptions& opts = {});

enum class Algorithm { Exchange, Hybrid };

struct RunOutput {
  DiscreteMeasure measure;
  Vector dual;
  std::vector<MetricsRow> history;
  std::vector<Vector> duals;                   // q_k
  std::vector<PointSet> maximizers;            // X_k
  std::vector<DiscreteMeasure> hat_measures;   // solution on X_k
  PointSet initial_grid;
  PointSet final_grid;
  bool flagged = false;
};

RunOutput run_algorithm(const Problem& problem, Algorithm algorithm, const HybridConfig& cfg,
                        const Reference* reference = nullptr);

/// Writes problem.json, config.json, metrics.csv, diagnostics.csv, measure_final.json,
/// dual_final.json, grids.json, iterates.json and reference.json (when given).
void write_run(const std::filesystem::path& dir, const Problem& problem, Algorithm algorithm,
               const HybridConfig& cfg, const RunOutput& run, const Reference* reference);

enum class ReferenceMode { None, LongRun };

struct BatchSpec {
  std::string generator = "fourier1d";
  Json params = Json::object();
  std::vector<std::uint64_t> seeds;  // empty: 0..99
  Algorithm algorithm = Algorithm::Exchange;
  HybridConfig config;               // config.exchange is used for exchange runs
  ReferenceMode reference = ReferenceMode::LongRun;
  std::filesystem::path out_dir;
  int threads = 1;
};

BatchSpec batch_spec_from_json(const Json& j);

struct BatchResult {
  std::vector<std::uint64_t> completed;
  std::vector<std::pair<std::uint64_t, std::string>> failures;
  std::vector<std::vector<MetricsRow>> histories;  // per completed seed
};

/// Runs every seed into out_dir/seed_<seed>/ and writes out_dir/aggregate.csv and batch.json.
BatchResult run_batch(const BatchSpec& spec);

/// Nearest-rank percentile of the values: the ceil(p/100 * n)-th smallest (1-based, at least 1).
double nearest_rank(std::vector<double> values, double p);

/// Per-row percentiles over the tables: k, n, then <col>_p05,<col>_p50,<col>_p95 for every
/// other column. NaN cells are ignored.
void write_aggregate_csv(const std::filesystem::path& path, const std::vector<CsvTable>& tables);

struct BasinSpec {
  std::vector<double> gammas{0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  int runs_per_gamma = 50;
  std::uint64_t seed = 0;
  SlideConfig slide;
  int max_descent_iters = 1000;
  double success_tol = 1e-6;
};

struct BasinRow {
  double gamma = 0.0;
  int successes = 0;
  int runs = 0;
  int max_iterations = 0;  // over the successful runs
  double worst_distance = 0.0;  // largest final distance to the reference, inf if some run lost an atom
};

/// Random perturbations of relative norm gamma around (alpha*, xi), each followed by a descent on G.
std::vector<BasinRow> basin_study(const Problem& problem, const DiscreteMeasure& reference, const BasinSpec& spec);

void write_basin_csv(const std::filesystem::path& path, const std::vector<BasinRow>& rows);

struct BoundCheck {
  std::string name;
  int k = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok() const { return lhs <= rhs; }
};

struct BoundReport {
  std::vector<BoundCheck> checks;
  int skipped = 0;       // amplitude checks without a one-to-one atom match
  bool has_reference = false;
  OperatorConstants constants;
  double dual_radius = 0.0;

  int violations() const;
  Json to_json() const;
};

/// Evaluates the growth bound on |A*q_k|, the dual radius bound and, with a reference,
/// the bound on J(mu_hat_k) and the amplitude error bound for a written run directory.
BoundReport check_bounds(const std::filesystem::path& run_dir, std::optional<OperatorConstants> constants = std::nullopt);

/// Same checks on an in-memory run.
BoundReport check_bounds(const Problem& problem, const RunOutput& run, const Reference* reference, double solver_tol,
                         const OperatorConstants& constants);

/// Sampled constants inflated by 5% (exact ones unchanged).
OperatorConstants default_constants(const MeasurementOperator& op);

/// FNV-1a of the text.
std::uint64_t stable_hash(const std::string& text);

}  // namespace tvx
