#include "tvx/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace tvx {

namespace fs = std::filesystem;

Json points_to_json(const PointSet& points) {
  Json arr = Json::array();
  for (Index j = 0; j < points.cols(); ++j) {
    Json p = Json::array();
    for (Index a = 0; a < points.rows(); ++a) p.push_back(points(a, j));
    arr.push_back(std::move(p));
  }
  return arr;
}

PointSet points_from_json(const Json& j, int dim) {
  if (!j.is_array()) throw Error("points: expected an array");
  PointSet out(dim, static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& p = j[i];
    if (p.is_number() && dim == 1) {
      out(0, static_cast<Index>(i)) = p.get<double>();
      continue;
    }
    if (!p.is_array() || static_cast<int>(p.size()) != dim) throw Error("points: wrong point dimension");
    for (int a = 0; a < dim; ++a) out(a, static_cast<Index>(i)) = p[static_cast<std::size_t>(a)].get<double>();
  }
  return out;
}

Json vector_to_json(const Vector& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw Error("vector: expected an array");
  Vector v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

Json to_json(const DiscreteMeasure& mu) {
  Json atoms = Json::array();
  for (Index i = 0; i < mu.size(); ++i) {
    Json x = Json::array();
    for (int a = 0; a < mu.dim(); ++a) x.push_back(mu.positions(a, i));
    atoms.push_back(Json{{"x", x}, {"a", mu.amplitudes(i)}});
  }
  return Json{{"d", mu.dim()}, {"atoms", atoms}};
}

DiscreteMeasure measure_from_json(const Json& j) {
  const int d = j.at("d").get<int>();
  if (d < 1) throw Error("measure: d must be positive");
  DiscreteMeasure mu(d);
  for (const Json& atom : j.at("atoms")) {
    const Json& x = atom.at("x");
    if (!x.is_array() || static_cast<int>(x.size()) != d) throw Error("measure: atom position has the wrong size");
    Point p(d);
    for (int a = 0; a < d; ++a) p(a) = x[static_cast<std::size_t>(a)].get<double>();
    mu.push_back({p, atom.at("a").get<double>()});
  }
  return mu;
}

namespace {

Json box_to_json(const Vector& lo, const Vector& hi) {
  Json arr = Json::array();
  for (Index a = 0; a < lo.size(); ++a) arr.push_back(Json::array({lo(a), hi(a)}));
  return arr;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw Error(std::string(what) + ": expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!keys.count(it.key())) throw Error(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

Json operator_to_json(const MeasurementOperator& op) {
  if (const auto* fo = std::get_if<Fourier1D>(&op.kind())) {
    const auto& k = fo->frequencies;
    bool contiguous = !k.empty();
    for (std::size_t i = 1; i < k.size(); ++i) contiguous = contiguous && k[i] == k[i - 1] + 1;
    if (contiguous) return Json{{"type", "fourier1d"}, {"freqs", Json::array({k.front(), k.back()})}};
    return Json{{"type", "fourier1d"}, {"freq_list", k}};
  }
  const auto& g = std::get<Gaussian2D>(op.kind());
  return Json{{"type", "gauss2d"},
              {"grid_n", g.grid_n},
              {"grid_box", Json::array({Json::array({g.grid_box(0, 0), g.grid_box(0, 1)}),
                                        Json::array({g.grid_box(1, 0), g.grid_box(1, 1)})})},
              {"sigma", g.sigma},
              {"domain", box_to_json(op.domain().lower, op.domain().upper)}};
}

MeasurementOperator operator_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "fourier1d") {
    check_keys(j, {"type", "freqs", "freq_list"}, "operator");
    if (j.contains("freq_list")) return MeasurementOperator(Fourier1D{j.at("freq_list").get<std::vector<int>>()});
    const Json& r = j.at("freqs");
    if (!r.is_array() || r.size() != 2) throw Error("operator: freqs must be [kmin, kmax]");
    return MeasurementOperator::fourier1d(r[0].get<int>(), r[1].get<int>());
  }
  if (type == "gauss2d") {
    check_keys(j, {"type", "grid_n", "grid_box", "sigma", "domain"}, "operator");
    Gaussian2D g;
    read_opt(j, "grid_n", g.grid_n);
    read_opt(j, "sigma", g.sigma);
    if (j.contains("grid_box")) {
      const Json& b = j.at("grid_box");
      for (int a = 0; a < 2; ++a) {
        g.grid_box(a, 0) = b.at(static_cast<std::size_t>(a)).at(0).get<double>();
        g.grid_box(a, 1) = b.at(static_cast<std::size_t>(a)).at(1).get<double>();
      }
    }
    Domain domain = Domain::square(-1, 1);
    if (j.contains("domain")) {
      const Json& b = j.at("domain");
      Vector lo(2), hi(2);
      for (int a = 0; a < 2; ++a) {
        lo(a) = b.at(static_cast<std::size_t>(a)).at(0).get<double>();
        hi(a) = b.at(static_cast<std::size_t>(a)).at(1).get<double>();
      }
      domain = Domain(lo, hi, false);
    }
    return MeasurementOperator(g, domain);
  }
  throw Error("operator: unknown type '" + type + "'");
}

Json to_json(const Problem& problem) {
  Json j;
  j["name"] = problem.name;
  j["operator"] = operator_to_json(problem.op);
  j["fidelity"] = Json{{"type", "quadratic"}, {"L", problem.fidelity.L}};
  j["y"] = vector_to_json(problem.fidelity.y);
  j["initial_grid"] = points_to_json(problem.initial_grid);
  if (problem.truth) {
    Json t = to_json(problem.truth->measure);
    t["noise_seed"] = problem.truth->noise_seed;
    j["truth"] = t;
  }
  return j;
}

Problem problem_from_json(const Json& j) {
  check_keys(j, {"name", "operator", "fidelity", "y", "initial_grid", "truth"}, "problem");
  MeasurementOperator op = operator_from_json(j.at("operator"));
  double L = 1.0;
  if (j.contains("fidelity")) {
    const Json& fj = j.at("fidelity");
    check_keys(fj, {"type", "L"}, "fidelity");
    if (fj.value("type", std::string("quadratic")) != "quadratic") throw Error("fidelity: only 'quadratic' is supported");
    read_opt(fj, "L", L);
  }
  Vector y = vector_from_json(j.at("y"));
  if (y.size() != op.channels()) throw Error("problem: y length differs from the channel count");
  Problem p{op, QuadraticFidelity(y, L), std::nullopt, PointSet(op.dim(), 0), j.value("name", std::string())};
  if (j.contains("initial_grid")) p.initial_grid = points_from_json(j.at("initial_grid"), op.dim());
  if (j.contains("truth")) {
    GroundTruth t;
    t.measure = measure_from_json(j.at("truth"));
    t.noise_seed = j.at("truth").value("noise_seed", std::uint64_t{0});
    p.truth = t;
  }
  return p;
}

Json to_json(const Reference& ref) {
  Json j;
  j["xi"] = points_to_json(ref.xi);
  j["d"] = ref.xi.rows();
  if (ref.measure) j["measure"] = to_json(*ref.measure);
  if (ref.q_star) j["q_star"] = vector_to_json(*ref.q_star);
  if (ref.J_star) j["J_star"] = *ref.J_star;
  return j;
}

Reference reference_from_json(const Json& j) {
  Reference ref;
  int d = j.value("d", 0);
  if (j.contains("measure")) {
    ref.measure = measure_from_json(j.at("measure"));
    d = ref.measure->dim();
  }
  if (j.contains("xi")) {
    if (d < 1) throw Error("reference: unknown dimension");
    ref.xi = points_from_json(j.at("xi"), d);
  } else if (ref.measure) {
    ref.xi = ref.measure->positions;
  }
  if (j.contains("q_star")) ref.q_star = vector_from_json(j.at("q_star"));
  if (j.contains("J_star")) ref.J_star = j.at("J_star").get<double>();
  return ref;
}

namespace {

MaximizerConfig maximizer_config_from_json(const Json& j, MaximizerConfig m) {
  check_keys(j, {"scan_n", "eps1", "eps2", "ascent_grad_tol", "ascent_max_steps", "dedupe_radius", "kappa_hess"},
             "maximizer");
  read_opt(j, "scan_n", m.scan_n);
  read_opt(j, "eps1", m.eps1);
  read_opt(j, "eps2", m.eps2);
  read_opt(j, "ascent_grad_tol", m.ascent_grad_tol);
  read_opt(j, "ascent_max_steps", m.ascent_max_steps);
  read_opt(j, "dedupe_radius", m.dedupe_radius);
  read_opt(j, "kappa_hess", m.kappa_hess);
  return m;
}

Json to_json(const MaximizerConfig& m) {
  return Json{{"scan_n", m.scan_n},
              {"eps1", m.eps1},
              {"eps2", m.eps2},
              {"ascent_grad_tol", m.ascent_grad_tol},
              {"ascent_max_steps", m.ascent_max_steps},
              {"dedupe_radius", m.dedupe_radius},
              {"kappa_hess", m.kappa_hess}};
}

SolverOptions solver_options_from_json(const Json& j, SolverOptions s) {
  check_keys(j, {"tol", "max_iter", "power_iterations", "seed", "check_every", "polish", "polish_every"}, "solver");
  read_opt(j, "tol", s.tol);
  read_opt(j, "max_iter", s.max_iter);
  read_opt(j, "power_iterations", s.power_iterations);
  read_opt(j, "seed", s.seed);
  read_opt(j, "check_every", s.check_every);
  read_opt(j, "polish", s.polish);
  read_opt(j, "polish_every", s.polish_every);
  return s;
}

Json to_json(const SolverOptions& s) {
  return Json{{"tol", s.tol},
              {"max_iter", s.max_iter},
              {"power_iterations", s.power_iterations},
              {"seed", s.seed},
              {"check_every", s.check_every},
              {"polish", s.polish},
              {"polish_every", s.polish_every}};
}

}  // namespace

ExchangeConfig exchange_config_from_json(const Json& j) {
  check_keys(j,
             {"max_iter", "stop_feas_tol", "rule", "maximizer", "solver", "initial_grid_n", "initial_points",
              "solve_on_maximizers", "certified", "certified_diam_tol", "certified_eps0", "grid_merge_radius",
              "output_merge_radius", "constants_inflation", "stop_on_solver_failure", "stop_when_stalled"},
             "exchange config");
  ExchangeConfig c;
  read_opt(j, "max_iter", c.max_iter);
  read_opt(j, "stop_feas_tol", c.stop_feas_tol);
  if (j.contains("rule")) {
    const std::string r = j.at("rule").get<std::string>();
    if (r == "all_local_maxima") {
      c.rule = UpdateRule::AllLocalMaxima;
    } else if (r == "single_argmax") {
      c.rule = UpdateRule::SingleArgmax;
    } else {
      throw Error("exchange config: unknown rule '" + r + "'");
    }
  }
  if (j.contains("maximizer")) c.extract = maximizer_config_from_json(j.at("maximizer"), MaximizerConfig{});
  if (j.contains("solver")) c.solver = solver_options_from_json(j.at("solver"), c.solver);
  read_opt(j, "initial_grid_n", c.initial_grid_n);
  if (j.contains("initial_points")) {
    const Json& pts = j.at("initial_points");
    int d = 1;
    if (!pts.empty() && pts[0].is_array()) d = static_cast<int>(pts[0].size());
    c.initial_points = points_from_json(pts, d);
  }
  read_opt(j, "solve_on_maximizers", c.solve_on_maximizers);
  read_opt(j, "certified", c.certified);
  read_opt(j, "certified_diam_tol", c.certified_diam_tol);
  read_opt(j, "certified_eps0", c.certified_eps0);
  read_opt(j, "grid_merge_radius", c.grid_merge_radius);
  read_opt(j, "output_merge_radius", c.output_merge_radius);
  read_opt(j, "constants_inflation", c.constants_inflation);
  read_opt(j, "stop_on_solver_failure", c.stop_on_solver_failure);
  read_opt(j, "stop_when_stalled", c.stop_when_stalled);
  if (c.max_iter < 1) throw Error("exchange config: max_iter must be at least 1");
  if (!(c.stop_feas_tol >= 0)) throw Error("exchange config: stop_feas_tol must be non-negative");
  return c;
}

Json to_json(const ExchangeConfig& c) {
  Json j;
  j["max_iter"] = c.max_iter;
  j["stop_feas_tol"] = c.stop_feas_tol;
  j["rule"] = c.rule == UpdateRule::AllLocalMaxima ? "all_local_maxima" : "single_argmax";
  if (c.extract) j["maximizer"] = to_json(*c.extract);
  j["solver"] = to_json(c.solver);
  j["initial_grid_n"] = c.initial_grid_n;
  if (c.initial_points.cols() > 0) j["initial_points"] = points_to_json(c.initial_points);
  j["solve_on_maximizers"] = c.solve_on_maximizers;
  j["certified"] = c.certified;
  j["certified_diam_tol"] = c.certified_diam_tol;
  j["certified_eps0"] = c.certified_eps0;
  j["grid_merge_radius"] = c.grid_merge_radius;
  j["output_merge_radius"] = c.output_merge_radius;
  j["constants_inflation"] = c.constants_inflation;
  j["stop_on_solver_failure"] = c.stop_on_solver_failure;
  j["stop_when_stalled"] = c.stop_when_stalled;
  return j;
}

SlideConfig slide_config_from_json(const Json& j) {
  check_keys(j, {"c1", "c2", "grad_tol", "max_iter", "max_expansions", "max_bisections", "eps_amp", "rounding_tol"},
             "slide config");
  SlideConfig c;
  read_opt(j, "c1", c.c1);
  read_opt(j, "c2", c.c2);
  read_opt(j, "grad_tol", c.grad_tol);
  read_opt(j, "max_iter", c.max_iter);
  read_opt(j, "max_expansions", c.max_expansions);
  read_opt(j, "max_bisections", c.max_bisections);
  read_opt(j, "eps_amp", c.eps_amp);
  read_opt(j, "rounding_tol", c.rounding_tol);
  c.validate();
  return c;
}

Json to_json(const SlideConfig& c) {
  return Json{{"c1", c.c1},
              {"c2", c.c2},
              {"grad_tol", c.grad_tol},
              {"max_iter", c.max_iter},
              {"max_expansions", c.max_expansions},
              {"max_bisections", c.max_bisections},
              {"eps_amp", c.eps_amp},
              {"rounding_tol", c.rounding_tol}};
}

HybridConfig hybrid_config_from_json(const Json& j) {
  check_keys(j, {"exchange", "slide", "slide_every", "refit", "feed_back", "count_merge_radius", "count_prune"},
             "hybrid config");
  HybridConfig c;
  if (j.contains("exchange")) c.exchange = exchange_config_from_json(j.at("exchange"));
  if (j.contains("slide")) c.slide = slide_config_from_json(j.at("slide"));
  read_opt(j, "slide_every", c.slide_every);
  read_opt(j, "refit", c.refit);
  read_opt(j, "feed_back", c.feed_back);
  read_opt(j, "count_merge_radius", c.count_merge_radius);
  read_opt(j, "count_prune", c.count_prune);
  return c;
}

Json to_json(const HybridConfig& c) {
  return Json{{"exchange", to_json(c.exchange)},
              {"slide", to_json(c.slide)},
              {"slide_every", c.slide_every},
              {"refit", c.refit},
              {"feed_back", c.feed_back},
              {"count_merge_radius", c.count_merge_radius},
              {"count_prune", c.count_prune}};
}

Json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

Json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_number(v);
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

const char* const kMetricsHeader = "k,J,J_hat,grid_size,Xk_size,feas_excess,dist_grid_xi,dist_xi_Xk,dist_Xk_xi,q_err,J_gap";
const char* const kHybridExtraHeader = "slide_iters,post_slide_J";

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<MetricsRow>& rows, bool hybrid) {
  std::ofstream out = open_out(path);
  out << kMetricsHeader;
  if (hybrid) out << ',' << kHybridExtraHeader;
  out << '\n';
  for (const MetricsRow& r : rows) {
    out << r.k << ',' << format_number(r.J) << ',' << format_number(r.J_hat) << ',' << r.grid_size << ','
        << r.Xk_size << ',' << format_number(r.feas_excess) << ',' << format_number(r.dist_grid_xi) << ','
        << format_number(r.dist_xi_Xk) << ',' << format_number(r.dist_Xk_xi) << ',' << format_number(r.q_err) << ','
        << format_number(r.J_gap);
    if (hybrid) out << ',' << r.slide_iters << ',' << format_number(r.post_slide_J);
    out << '\n';
  }
}

void write_diagnostics_csv(const fs::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out = open_out(path);
  out << "k,q_norm,grid_feas_excess,dist_grid_Xk,solver_gap,solver_iterations,solver_converged,added,"
         "unconverged_ascents,atoms\n";
  for (const MetricsRow& r : rows) {
    out << r.k << ',' << format_number(r.q_norm) << ',' << format_number(r.grid_feas_excess) << ','
        << format_number(r.dist_grid_Xk) << ','
        << format_number(r.solver_gap) << ',' << r.solver_iterations << ',' << (r.solver_converged ? 1 : 0) << ','
        << r.added << ',' << r.unconverged_ascents << ',' << r.atoms << '\n';
  }
}

void write_slide_history_csv(const fs::path& path, const SlideResult& res) {
  std::ofstream out = open_out(path);
  out << "iteration,G,grad_norm,step\n";
  for (const SlideStep& s : res.steps) {
    out << s.iteration << ',' << format_number(s.G) << ',' << format_number(s.grad_norm) << ','
        << format_number(s.step) << '\n';
  }
  out << res.iterations << ',' << format_number(res.G_history.back()) << ',' << format_number(res.grad_norm)
      << ",0\n";
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  CsvTable t;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!s.empty() && s.back() == ',') cells.emplace_back();
    return cells;
  };
  if (!std::getline(in, line)) throw Error("empty CSV " + path.string());
  t.header = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    for (const std::string& c : split(line)) {
      double v = std::nan("");
      if (c == "inf") {
        v = std::numeric_limits<double>::infinity();
      } else if (c == "-inf") {
        v = -std::numeric_limits<double>::infinity();
      } else if (!c.empty() && c != "nan") {
        const auto res = std::from_chars(c.data(), c.data() + c.size(), v);
        if (res.ec != std::errc()) v = std::nan("");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace tvx
