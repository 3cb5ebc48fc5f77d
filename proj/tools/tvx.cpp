// Command-line front end: problem generation, solvers, batch studies and bound checks.

#include "tvx/certificate.hpp"
#include "tvx/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace tvx;

namespace {

constexpr int kOk = 0;
constexpr int kError = 1;
constexpr int kFlagged = 2;

// "key=value" overrides; the value is parsed as JSON and falls back to a string.
Json apply_overrides(Json base, const std::vector<std::string>& sets) {
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    try {
      base[key] = Json::parse(value);
    } catch (const nlohmann::json::exception&) {
      base[key] = value;
    }
  }
  return base;
}

// A file path, or inline JSON when the argument starts with '{'.
Json load_or_empty(const std::string& arg) {
  if (arg.empty()) return Json::object();
  if (arg.front() == '{') return Json::parse(arg);
  return read_json(arg);
}

std::optional<Reference> pick_reference(const Problem& problem, const std::string& ref_path, bool compute,
                                        bool use_truth) {
  if (!ref_path.empty()) return reference_from_json(read_json(ref_path));
  if (compute) return compute_reference(problem);
  if (use_truth) {
    if (!problem.truth) throw Error("--truth: the problem has no ground truth");
    Reference r;
    r.xi = problem.truth->measure.positions;
    r.measure = problem.truth->measure;
    return r;
  }
  return std::nullopt;
}

void print_summary(const RunOutput& run) {
  if (run.history.empty()) return;
  const MetricsRow& last = run.history.back();
  std::printf("iterations %zu  J %.12g  grid %ld  |X_k| %ld  feas_excess %.3e  atoms %ld\n", run.history.size(),
              last.J, last.grid_size, last.Xk_size, last.feas_excess, static_cast<long>(run.measure.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tvx: TV-regularised sparse spike recovery"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a problem file");
  std::string gen_kind, gen_params, gen_out = "problem.json";
  std::uint64_t gen_seed = 0;
  std::vector<std::string> gen_sets;
  gen->add_option("generator", gen_kind, "fourier1d or gauss2d")->required()->check(CLI::IsMember({"fourier1d", "gauss2d"}));
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--params", gen_params, "Generator parameters (JSON file or inline object)");
  gen->add_option("--set", gen_sets, "Parameter override key=value");
  gen->add_option("--out", gen_out, "Output problem file");

  // shared run options
  std::string problem_path, config_path, ref_path, out_dir = "run";
  bool compute_ref = false, use_truth = false;
  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--problem", problem_path, "Problem JSON")->required();
    sub->add_option("--config", config_path, "Config (JSON file or inline object)");
    sub->add_option("--reference", ref_path, "Reference solution JSON for error metrics");
    sub->add_flag("--compute-reference", compute_ref, "Compute a reference by a long run first");
    sub->add_flag("--truth", use_truth, "Use the ground truth as reference");
    sub->add_option("--out", out_dir, "Output directory");
  };

  auto* exch = app.add_subcommand("exchange", "Run the exchange algorithm");
  add_run_options(exch);

  auto* hyb = app.add_subcommand("hybrid", "Run the alternating exchange/sliding method");
  add_run_options(hyb);
  bool no_refit = false, no_feed_back = false;
  hyb->add_flag("--no-refit", no_refit, "Skip the amplitude re-solve after sliding");
  hyb->add_flag("--no-feed-back", no_feed_back, "Do not add slid positions to the grid");

  auto* slide = app.add_subcommand("slide", "Gradient descent on amplitudes and positions");
  std::string slide_init;
  slide->add_option("--problem", problem_path, "Problem JSON")->required();
  slide->add_option("--init", slide_init, "Initial measure JSON")->required();
  slide->add_option("--config", config_path, "Slide config (JSON file or inline object)");
  slide->add_option("--out", out_dir, "Output directory");

  auto* ref = app.add_subcommand("reference", "Compute a high-accuracy reference solution");
  ref->add_option("--problem", problem_path, "Problem JSON")->required();
  std::string ref_out = "reference.json";
  ref->add_option("--out", ref_out, "Output file");

  auto* batch = app.add_subcommand("batch", "Run many seeds and aggregate the metrics");
  std::string batch_spec;
  int batch_threads = 0;
  batch->add_option("--spec", batch_spec, "Batch spec JSON")->required();
  batch->add_option("--out", out_dir, "Output directory (overrides the batch spec)");
  batch->add_option("--threads", batch_threads, "Worker threads (overrides the batch spec)");

  auto* basin = app.add_subcommand("basin", "Success rate of sliding from perturbed optima");
  std::vector<double> gammas{0.0, 0.01, 0.02, 0.05, 0.1, 0.2};
  int basin_runs = 50, basin_iters = 1000;
  std::uint64_t basin_seed = 0;
  basin->add_option("--problem", problem_path, "Problem JSON")->required();
  basin->add_option("--reference", ref_path, "Reference JSON (computed when absent)");
  basin->add_option("--gammas", gammas, "Relative perturbation sizes")->delimiter(',');
  basin->add_option("--runs", basin_runs, "Runs per gamma");
  basin->add_option("--max-iter", basin_iters, "Descent iterations per run");
  basin->add_option("--seed", basin_seed, "Random seed");
  basin->add_option("--out", out_dir, "Output directory");

  auto* certify = app.add_subcommand("certify", "Certified maximiser search for a dual vector");
  std::string dual_path, certify_out = "certify.json";
  double diam_tol = 1e-3, margin = 1e-3;
  certify->add_option("--problem", problem_path, "Problem JSON")->required();
  certify->add_option("--dual", dual_path, "dual_final.json (default: reference dual)");
  certify->add_option("--diam-tol", diam_tol, "Cell diameter at which subdivision stops");
  certify->add_option("--margin", margin, "Cells with upper bound <= 1 - margin are discarded");
  certify->add_option("--out", certify_out, "Output file");

  auto* bounds = app.add_subcommand("check-bounds", "Check the theoretical bounds on a run directory");
  std::string run_dir, bounds_out;
  bounds->add_option("--run", run_dir, "Run directory")->required();
  bounds->add_option("--out", bounds_out, "Report JSON (default: <run>/bounds.json)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      Json params = apply_overrides(load_or_empty(gen_params), gen_sets);
      write_json(gen_out, to_json(generate(gen_kind, gen_seed, params)));
      return kOk;
    }
    if (*exch || *hyb) {
      const Problem problem = problem_from_json(read_json(problem_path));
      const Json cj = load_or_empty(config_path);
      HybridConfig cfg;
      Algorithm algo = Algorithm::Exchange;
      if (*exch) {
        cfg.exchange = exchange_config_from_json(cj);
      } else {
        algo = Algorithm::Hybrid;
        cfg = hybrid_config_from_json(cj);
        if (no_refit) cfg.refit = false;
        if (no_feed_back) cfg.feed_back = false;
      }
      const std::optional<Reference> r = pick_reference(problem, ref_path, compute_ref, use_truth);
      const RunOutput run = run_algorithm(problem, algo, cfg, r ? &*r : nullptr);
      write_run(out_dir, problem, algo, cfg, run, r ? &*r : nullptr);
      print_summary(run);
      return run.flagged ? kFlagged : kOk;
    }
    if (*slide) {
      const Problem problem = problem_from_json(read_json(problem_path));
      const SlideConfig cfg = slide_config_from_json(load_or_empty(config_path));
      const DiscreteMeasure init = measure_from_json(read_json(slide_init));
      const SlideResult res = run_sliding(init, problem.op, problem.fidelity, cfg);
      fs::create_directories(out_dir);
      write_slide_history_csv(fs::path(out_dir) / "g_history.csv", res);
      write_json(fs::path(out_dir) / "measure_final.json", to_json(res.final));
      std::printf("iterations %d  G %.15g  grad_norm %.3e  truncations %d  %s\n", res.iterations,
                  res.G_history.back(), res.grad_norm, res.truncations, res.message.c_str());
      return res.flagged ? kFlagged : kOk;
    }
    if (*ref) {
      const Problem problem = problem_from_json(read_json(problem_path));
      const Reference r = compute_reference(problem);
      write_json(ref_out, to_json(r));
      std::printf("atoms %ld  J* %.15g\n", static_cast<long>(r.xi.cols()), *r.J_star);
      return kOk;
    }
    if (*batch) {
      Json sj = read_json(batch_spec);
      BatchSpec spec = batch_spec_from_json(sj);
      if (batch->count("--out") > 0) spec.out_dir = out_dir;
      if (batch_threads > 0) spec.threads = batch_threads;
      const BatchResult res = run_batch(spec);
      std::printf("completed %zu  failed %zu\n", res.completed.size(), res.failures.size());
      for (const auto& [seed, err] : res.failures) std::fprintf(stderr, "seed %llu: %s\n", static_cast<unsigned long long>(seed), err.c_str());
      return res.failures.empty() ? kOk : kFlagged;
    }
    if (*basin) {
      const Problem problem = problem_from_json(read_json(problem_path));
      const Reference r = ref_path.empty() ? compute_reference(problem) : reference_from_json(read_json(ref_path));
      if (!r.measure) throw Error("basin: the reference has no measure");
      BasinSpec spec;
      spec.gammas = gammas;
      spec.runs_per_gamma = basin_runs;
      spec.max_descent_iters = basin_iters;
      spec.seed = basin_seed;
      const std::vector<BasinRow> rows = basin_study(problem, *r.measure, spec);
      write_basin_csv(fs::path(out_dir) / "basin.csv", rows);
      for (const BasinRow& row : rows) std::printf("gamma %-6g  %d/%d\n", row.gamma, row.successes, row.runs);
      return kOk;
    }
    if (*certify) {
      const Problem problem = problem_from_json(read_json(problem_path));
      Vector q;
      PointSet xi;
      if (!dual_path.empty()) {
        q = vector_from_json(read_json(dual_path).at("q"));
      } else {
        const Reference r = compute_reference(problem);
        q = *r.q_star;
        xi = r.xi;
      }
      const OperatorConstants c = default_constants(problem.op);
      const double kh = c.kappa_hess;
      MaximizerConfig mcfg = MaximizerConfig::defaults_for(problem.domain());
      mcfg.kappa_hess = kh;
      const Maximizers heuristic = extract_maximizers(problem.op, q, mcfg);
      const double side = problem.domain().width().minCoeff() / 8;
      const CertifiedCells cells =
          certified_maximizers(problem.op, q, tile_domain(problem.domain(), side), kh, diam_tol, margin);
      Json out{{"kappa_hess", kh},
               {"cells_visited", cells.cells_visited},
               {"confirmed", cells.confirmed.size()},
               {"undecided", cells.undecided.size()},
               {"noncritical", cells.noncritical.size()},
               {"heuristic_maximizers", points_to_json(heuristic.points)},
               {"heuristic_values", vector_to_json(heuristic.values)},
               {"sup_estimate", heuristic.sup_estimate}};
      Json centers = Json::array();
      for (const Cell& cell : cells.confirmed) centers.push_back(vector_to_json(cell.center()));
      out["confirmed_centers"] = centers;
      if (xi.cols() > 0) {
        const NondegeneracyReport nd = nondegeneracy_report(problem.op, q, xi, {1e-3, 3e-3, 1e-2, 3e-2, 0.1});
        out["gamma_hat"] = nd.gamma_hat;
        out["tau0_hat"] = nd.tau0_hat;
        out["saturation_points"] = nd.saturation_points;
      }
      write_json(certify_out, out);
      std::printf("confirmed %zu  undecided %zu  noncritical %zu  heuristic %ld\n", cells.confirmed.size(),
                  cells.undecided.size(), cells.noncritical.size(), static_cast<long>(heuristic.points.cols()));
      return kOk;
    }
    if (*bounds) {
      const BoundReport rep = check_bounds(run_dir);
      write_json(bounds_out.empty() ? fs::path(run_dir) / "bounds.json" : fs::path(bounds_out), rep.to_json());
      std::printf("checks %zu  violations %d  skipped %d  reference %s\n", rep.checks.size(), rep.violations(),
                  rep.skipped, rep.has_reference ? "yes" : "no");
      return rep.violations() == 0 ? kOk : kFlagged;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "tvx: %s\n", e.what());
    return kError;
  }
  return kOk;
}
