// ktrunc command line front end.
//
// Exit codes: 0 success, 1 bad input or usage, 2 solver non-convergence,
// 3 failed check (verification row, envelope or monotonicity invariant).

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ktrunc/ktrunc.hpp"

namespace fs = std::filesystem;
using namespace ktrunc;

namespace {

constexpr int kSchemaVersion = 1;

int log_level() {
  const char* v = std::getenv("KTRUNC_LOG");
  if (!v) return 1;
  const std::string s(v);
  if (s == "quiet" || s == "0") return 0;
  if (s == "debug" || s == "2") return 2;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[ktrunc] " << msg << "\n";
}

void debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[ktrunc:debug] " << msg << "\n";
}

struct BadInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) throw BadInput("cannot read config " + path);
  try {
    json j = json::parse(is);
    if (!j.is_object()) throw BadInput("config must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw BadInput(std::string("config is not valid JSON: ") + e.what());
  }
}

// Outputs are staged in memory and written only once the command succeeded
// far enough to produce them, so bad input never leaves partial files.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(std::string name, std::string content) { files.emplace_back(std::move(name), std::move(content)); }
  void add_json(std::string name, const json& j) { add(std::move(name), j.dump(2) + "\n"); }
  void commit(const std::string& dir) const {
    fs::create_directories(dir);
    for (auto& [name, content] : files) {
      const fs::path final_path = fs::path(dir) / name;
      const fs::path tmp = fs::path(dir) / (name + ".tmp");
      {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw Error("cannot write " + tmp.string());
        os << content;
      }
      fs::rename(tmp, final_path);
    }
  }
};

template <class T>
T get_or(const json& j, const char* key, T dflt) {
  return j.contains(key) ? j.at(key).get<T>() : dflt;
}

Partition partition_from(const json& j, int N) {
  if (!j.contains("partition")) throw BadInput("config needs a partition");
  const auto& p = j.at("partition");
  if (p.is_object()) return make_partition(p.at("N").get<int>(), p.at("blocks").get<std::vector<int>>());
  return make_partition(N, p.get<std::vector<int>>());
}

QuadratureSpec quad_from(const json& j) {
  QuadratureSpec q;
  if (!j.contains("quadrature")) return q;
  const auto& c = j.at("quadrature");
  q.core_nodes = get_or(c, "core_nodes", q.core_nodes);
  q.core_radius = get_or(c, "core_radius", q.core_radius);
  q.panel_nodes = get_or(c, "panel_nodes", q.panel_nodes);
  q.panel_ratio = get_or(c, "panel_ratio", q.panel_ratio);
  q.truncation = get_or(c, "truncation", q.truncation);
  q.angular = get_or(c, "angular", q.angular);
  q.estimate_error = get_or(c, "estimate_error", q.estimate_error);
  q.fd_step = get_or(c, "fd_step", q.fd_step);
  q.validate();
  return q;
}

OptimizerOptions opt_from(const json& j, std::uint64_t seed, int jobs) {
  OptimizerOptions o;
  if (j.contains("optimizer")) {
    const auto& c = j.at("optimizer");
    o.multistart = get_or(c, "multistart", o.multistart);
    o.max_iterations = get_or(c, "max_iterations", o.max_iterations);
    o.tolerance = get_or(c, "tolerance", o.tolerance);
    o.initial_step = get_or(c, "initial_step", o.initial_step);
    o.min_step = get_or(c, "min_step", o.min_step);
  }
  o.seed = seed;
  o.jobs = jobs;
  return o;
}

SolverOptions solver_from(const json& j, int jobs) {
  SolverOptions o;
  if (j.contains("solver")) {
    const auto& c = j.at("solver");
    o.dt_safety = get_or(c, "dt_safety", o.dt_safety);
    o.tol = get_or(c, "tol", o.tol);
    o.max_iter = get_or(c, "max_iter", o.max_iter);
    o.core = get_or(c, "core", o.core);
    o.core_factor = get_or(c, "core_factor", o.core_factor);
    o.boundary_layer = get_or(c, "boundary_layer", o.boundary_layer);
    o.boundary_interp = get_or(c, "boundary_interp", o.boundary_interp);
    o.local_steps = get_or(c, "local_steps", o.local_steps);
    o.radial_ratio = get_or(c, "radial_ratio", o.radial_ratio);
    o.radial_nodes = get_or(c, "radial_nodes", o.radial_nodes);
    o.angles = get_or(c, "angles", o.angles);
    o.random_frames = get_or(c, "random_frames", o.random_frames);
    o.angular = get_or(c, "angular", o.angular);
  }
  o.jobs = jobs;
  o.validate();
  return o;
}

json frame_json(const BlockFrame& F) {
  json cols = json::array();
  for (int c = 0; c < F.M.cols(); ++c) {
    std::vector<double> col(F.M.rows());
    for (int r = 0; r < F.M.rows(); ++r) col[r] = F.M(r, c);
    cols.push_back(col);
  }
  return cols;
}

json header(const std::string& command, std::uint64_t seed) {
  return {{"schema_version", kSchemaVersion}, {"command", command}, {"seed", seed}};
}

struct Common {
  std::string config;
  std::string out = "ktrunc_out";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = 1;
  std::vector<std::string> suites;
};

std::uint64_t seed_of(const Common& c, const json& cfg) {
  return c.seed_given ? c.seed : get_or<std::uint64_t>(cfg, "seed", 0);
}

int cmd_eval(const Common& c) {
  json cfg = read_config(c.config);
  const std::uint64_t seed = seed_of(c, cfg);
  const int N = cfg.at("dim").get<int>();
  OperatorSpec spec;
  spec.partition = partition_from(cfg, N);
  spec.sign = parse_sign(get_or<std::string>(cfg, "sign", "+"));
  spec.s = cfg.at("s").get<double>();
  spec.quad = quad_from(cfg);
  spec.opt = opt_from(cfg, seed, c.jobs);
  const std::string nm = get_or<std::string>(cfg, "normalization", "standard");
  if (nm != "standard" && nm != "unit") throw BadInput("normalization must be standard or unit");
  spec.norm = nm == "unit" ? Normalization::unit : Normalization::standard;
  auto u = field_from_json(cfg.at("field"), N, spec.partition);
  auto points = cfg.at("points").get<std::vector<std::vector<double>>>();
  if (points.empty()) throw BadInput("eval needs at least one point");

  json rows = json::array();
  std::ostringstream csv;
  csv << "x,value,quadrature_error,attained\n";
  for (auto& x : points) {
    auto r = eval_K(*u, x, spec);
    debug("eval at " + join(x) + " -> " + fmt(r.value));
    rows.push_back({{"x", x},
                    {"value", r.value},
                    {"quadrature_error", r.quadrature_error},
                    {"attained", r.attained_flag},
                    {"evaluations", r.evaluations},
                    {"best_frame", frame_json(r.best_frame)}});
    csv << '"' << join(x) << "\"," << fmt(r.value) << ',' << fmt(r.quadrature_error) << ','
        << (r.attained_flag ? 1 : 0) << "\n";
  }
  json out = header("eval", seed);
  out["field"] = {{"type", u->tag()}, {"params", u->params()}};
  out["partition"] = spec.partition.blocks;
  out["dim"] = N;
  out["sign"] = to_string(spec.sign);
  out["s"] = spec.s;
  out["results"] = rows;
  Outputs o;
  o.add_json("eval.json", out);
  o.add("eval.csv", csv.str());
  o.commit(c.out);
  info("eval: " + std::to_string(points.size()) + " points");
  return 0;
}

int cmd_verify(const Common& c) {
  json cfg = read_config(c.config);
  VerifyConfig vc;
  vc.seed = seed_of(c, cfg);
  vc.jobs = c.jobs;
  vc.quad = quad_from(cfg);
  vc.opt = opt_from(cfg, vc.seed, 1);
  vc.suites = c.suites.empty() ? get_or<std::vector<std::string>>(cfg, "suites", {}) : c.suites;
  if (cfg.contains("partition")) {
    const auto& p = cfg.at("partition");
    if (!p.is_object()) throw BadInput("verify partition must be {\"N\":..., \"blocks\":[...]}");
    vc.partition = partition_from(cfg, 0);
  }
  auto reports = run_verify(vc);
  json out = header("verify", vc.seed);
  json suites = json::array();
  bool all = true;
  std::ostringstream csv;
  csv << "suite,case,error,tolerance,pass\n";
  for (auto& r : reports) {
    suites.push_back({{"name", r.name}, {"passed", r.passed}, {"rows", r.rows}});
    all = all && r.passed;
    for (auto& row : r.rows)
      csv << r.name << ",\"" << row.value("case", std::string()) << "\"," << fmt(row.at("error").get<double>()) << ','
          << fmt(row.at("tolerance").get<double>()) << ',' << (row.at("pass").get<bool>() ? 1 : 0) << "\n";
    info("suite " + r.name + ": " + (r.passed ? "pass" : "FAIL"));
  }
  out["suites"] = suites;
  out["passed"] = all;
  Outputs o;
  o.add_json("verify.json", out);
  o.add("verify.csv", csv.str());
  o.commit(c.out);
  return all ? 0 : 3;
}

DirichletProblem problem_from(const json& cfg, std::uint64_t seed, int jobs) {
  DirichletProblem P;
  P.domain = Domain::from_json(cfg.at("domain"));
  const int N = P.domain.dim();
  P.partition = partition_from(cfg, N);
  P.sign = parse_sign(get_or<std::string>(cfg, "sign", "+"));
  P.s = cfg.at("s").get<double>();
  P.f = field_from_json(cfg.at("f"), N, P.partition);
  if (cfg.contains("c") && !cfg.at("c").is_null()) P.c = field_from_json(cfg.at("c"), N, P.partition);
  P.h = cfg.at("grid").at("h").get<double>();
  P.solver = solver_from(cfg, jobs);
  P.seed = seed;
  validate_problem(P);
  return P;
}

int cmd_solve(const Common& c) {
  json cfg = read_config(c.config);
  const std::uint64_t seed = seed_of(c, cfg);
  DirichletProblem P = problem_from(cfg, seed, c.jobs);
  info("solve: h=" + fmt(P.h));
  auto rep = solve_dirichlet(P);
  std::optional<double> hopf;
  std::string hopf_note;
  try {
    hopf = hopf_fit(rep, P);
  } catch (const std::exception& e) {
    hopf_note = e.what();
  }
  json out = header("solve", seed);
  out["problem"] = {{"domain", P.domain.to_json()},
                    {"partition", P.partition.blocks},
                    {"sign", to_string(P.sign)},
                    {"s", P.s},
                    {"f", {{"type", P.f->tag()}, {"params", P.f->params()}}},
                    {"h", P.h}};
  out["iterations"] = rep.iterations;
  out["converged"] = rep.converged;
  out["residual_sup"] = rep.residual_sup;
  out["residual_history"] = rep.residual_history;
  out["scaled_residual_monotone"] = rep.residual_monotone;
  out["interior_nodes"] = rep.interior_nodes;
  out["lambda_max"] = rep.lambda;
  out["dt_min"] = rep.dt;
  out["envelope"] = {{"violations", rep.envelope_violations},
                     {"M", rep.envelope.M},
                     {"M_discrete", rep.envelope.M_discrete},
                     {"radius_inflation_h", rep.envelope.inflation}};
  if (hopf) {
    out["hopf_constant"] = *hopf;
  } else {
    out["hopf_constant"] = nullptr;
    out["hopf_note"] = hopf_note;
  }

  Outputs o;
  std::ostringstream csv;
  write_grid_csv(*rep.solution, csv);
  o.add("solution.csv", csv.str());
  o.add_json("solution.json", grid_metadata(*rep.solution));
  o.add_json("report.json", out);
  o.commit(c.out);
  if (!rep.converged) {
    info("solve: no convergence after " + std::to_string(rep.iterations) + " iterations");
    return 2;
  }
  if (rep.envelope_violations > 0 || !rep.residual_monotone) {
    info("solve: invariant violated");
    return 3;
  }
  info("solve: converged in " + std::to_string(rep.iterations) + " iterations");
  return 0;
}

int cmd_limit(const Common& c) {
  json cfg = read_config(c.config);
  const std::uint64_t seed = seed_of(c, cfg);
  const int N = cfg.at("dim").get<int>();
  OperatorSpec spec;
  spec.partition = partition_from(cfg, N);
  spec.sign = parse_sign(get_or<std::string>(cfg, "sign", "+"));
  spec.quad = quad_from(cfg);
  spec.opt = opt_from(cfg, seed, c.jobs);
  auto u = field_from_json(cfg.at("field"), N, spec.partition);
  auto s_list = get_or<std::vector<double>>(cfg, "s_list", {0.6, 0.8, 0.9, 0.95, 0.99});
  auto points = cfg.at("points").get<std::vector<std::vector<double>>>();
  json res = json::array();
  std::ostringstream csv;
  csv << "x,s,value,reference,error\n";
  for (auto& x : points) {
    auto rows = s_to_1_limit_study(*u, x, spec, s_list);
    json t = json::array();
    for (auto& r : rows) {
      t.push_back({{"s", r.s}, {"K", r.K}, {"P", r.P}, {"abs_err", r.abs_err}});
      csv << '"' << join(x) << "\"," << fmt(r.s) << ',' << fmt(r.K) << ',' << fmt(r.P) << ',' << fmt(r.abs_err) << "\n";
    }
    res.push_back({{"x", x}, {"rows", t}});
  }
  json out = header("limit", seed);
  out["field"] = {{"type", u->tag()}, {"params", u->params()}};
  out["partition"] = spec.partition.blocks;
  out["sign"] = to_string(spec.sign);
  out["results"] = res;
  Outputs o;
  o.add_json("limit.json", out);
  o.add("limit.csv", csv.str());
  o.commit(c.out);
  return 0;
}

int cmd_eigen(const Common& c) {
  json cfg = read_config(c.config);
  const std::uint64_t seed = seed_of(c, cfg);
  Domain dom = Domain::from_json(cfg.at("domain"));
  Partition p = partition_from(cfg, dom.dim());
  Sign sign = parse_sign(get_or<std::string>(cfg, "sign", "-"));
  const double s = cfg.at("s").get<double>();
  json out = header("eigen", seed);
  out["domain"] = dom.to_json();
  out["partition"] = p.blocks;
  out["sign"] = to_string(sign);
  out["s"] = s;
  if (cfg.contains("grid")) {
    const double h = cfg.at("grid").at("h").get<double>();
    auto est = eigen_estimate(dom, p, sign, s, h, solver_from(cfg, c.jobs), seed);
    out["mu_upper"] = est.mu_upper;
    out["mu_lower"] = est.mu_lower;
    out["witness"] = est.witness;
  }
  if (cfg.contains("mu_scan")) {
    json scan = json::array();
    for (double mu : cfg.at("mu_scan").get<std::vector<double>>()) {
      auto w = eigen_lower_scan(dom, p, s, mu);
      if (w) scan.push_back({{"mu", mu}, {"alpha", w->alpha}, {"worst_ratio", w->worst}, {"samples", w->samples}});
      else scan.push_back({{"mu", mu}, {"alpha", nullptr}});
    }
    out["lower_scan"] = scan;
  }
  Outputs o;
  o.add_json("eigen.json", out);
  o.commit(c.out);
  return 0;
}

int cmd_liouville(const Common& c) {
  json cfg = read_config(c.config);
  LiouvilleParams L;
  L.p = cfg.at("p").get<double>();
  L.N = get_or(cfg, "dim", L.N);
  if (cfg.contains("partition")) L.blocks = partition_from(cfg, L.N).blocks;
  L.s = get_or(cfg, "s", L.s);
  L.a = get_or(cfg, "a", L.a);
  L.R = get_or(cfg, "R", L.R);
  L.samples = get_or(cfg, "samples", L.samples);
  L.seed = seed_of(c, cfg);
  L.quad = quad_from(cfg);
  L.opt = opt_from(cfg, L.seed, c.jobs);
  auto res = liouville_study(L);
  json out = header("liouville", L.seed);
  out["p"] = L.p;
  out["family"] = res.family;
  out["constant"] = res.constant;
  out["reference_point"] = res.reference;
  out["tolerance"] = res.tolerance;
  out["max_relative"] = res.max_relative;
  out["passed"] = res.max_relative <= res.tolerance;
  json rows = json::array();
  std::ostringstream csv;
  csv << "x,value,reference,error\n";
  for (auto& r : res.rows) {
    rows.push_back({{"x", r.x}, {"K", r.K}, {"u_p", r.up}, {"residual", r.residual}, {"relative", r.relative},
                    {"pass", r.relative <= res.tolerance}});
    csv << '"' << join(r.x) << "\"," << fmt(r.K) << ',' << fmt(-r.up) << ',' << fmt(r.relative) << "\n";
  }
  out["rows"] = rows;
  Outputs o;
  o.add_json("liouville.json", out);
  o.add("liouville.csv", csv.str());
  o.commit(c.out);
  return res.max_relative <= res.tolerance ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ktrunc: truncated fractional Laplacians"};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", c.config, "JSON config file")->required();
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--seed", c.seed, "random seed (overrides the config)")->each([&](const std::string&) {
      c.seed_given = true;
    });
    sub->add_option("--jobs", c.jobs, "worker threads (0: all cores)");
  };
  std::map<std::string, std::function<int(const Common&)>> handlers{
      {"eval", cmd_eval},   {"verify", cmd_verify}, {"solve", cmd_solve},
      {"limit", cmd_limit}, {"eigen", cmd_eigen},   {"liouville", cmd_liouville}};
  std::map<std::string, CLI::App*> subs;
  subs["eval"] = app.add_subcommand("eval", "evaluate the extremal operator at points");
  subs["verify"] = app.add_subcommand("verify", "run the identity suites");
  subs["solve"] = app.add_subcommand("solve", "solve a Dirichlet problem");
  subs["limit"] = app.add_subcommand("limit", "s -> 1 study against the local operator");
  subs["eigen"] = app.add_subcommand("eigen", "principal eigenvalue bounds");
  subs["liouville"] = app.add_subcommand("liouville", "calibrate and check explicit radial solutions");
  for (auto& [name, sub] : subs) add_common(sub);
  subs["verify"]->add_option("--suite", c.suites, "suite to run (repeatable)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }
  if (c.jobs < 0) {
    std::cerr << "ktrunc: --jobs must be >= 0\n";
    return 1;
  }
  for (auto& [name, sub] : subs) {
    if (!sub->parsed()) continue;
    try {
      return handlers.at(name)(c);
    } catch (const NonConvergence& e) {
      std::cerr << "ktrunc: " << e.what() << "\n";
      return 2;
    } catch (const RegimeMismatch& e) {
      std::cerr << "ktrunc: regime mismatch: " << e.what() << "\n";
      return 1;
    } catch (const QuadratureRefused& e) {
      std::cerr << "ktrunc: quadrature refused: " << e.what() << "\n";
      return 1;
    } catch (const BadInput& e) {
      std::cerr << "ktrunc: " << e.what() << "\n";
      return 1;
    } catch (const json::exception& e) {
      std::cerr << "ktrunc: invalid config: " << e.what() << "\n";
      return 1;
    } catch (const std::invalid_argument& e) {
      std::cerr << "ktrunc: invalid input: " << e.what() << "\n";
      return 1;
    } catch (const std::exception& e) {
      std::cerr << "ktrunc: " << e.what() << "\n";
      return 3;
    }
  }
  return 1;
}
