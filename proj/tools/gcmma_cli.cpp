// Experiment runner: steepest descent benchmark, GCMMA runs, run comparison
// and mesh generation. Exit codes: 0 success, 2 config error, 3 solver
// nonconvergence, 1 anything else.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gcmma/descent.hpp"
#include "gcmma/errors.hpp"
#include "gcmma/fem.hpp"
#include "gcmma/fspace.hpp"
#include "gcmma/gcmma.hpp"
#include "gcmma/io.hpp"
#include "gcmma/mesh.hpp"
#include "gcmma/mesh_io.hpp"
#include "gcmma/problems.hpp"

namespace {

using nlohmann::json;
using namespace gcmma;

constexpr int kExitConfig = 2;
constexpr int kExitNonConvergence = 3;

/// JSON experiment files: top-level keys are option names of the
/// subcommand, arrays become repeated inputs. Flags given on the command
/// line take precedence.
struct JsonConfig {
  CLI::App* app;
  std::string path;

  void apply() const {
    if (path.empty())
      return;
    std::ifstream in(path);
    if (!in)
      throw CLI::FileError::Missing(path);
    json j;
    try {
      in >> j;
    } catch (const json::exception& ex) {
      throw CLI::ConversionError("config is not valid JSON: " + std::string(ex.what()));
    }
    if (!j.is_object())
      throw CLI::ConversionError("config must be a JSON object");
    for (const auto& [key, v] : j.items()) {
      CLI::Option* opt = app->get_option_no_throw("--" + key);
      if (opt == nullptr || key == "config" || v.is_object())
        throw CLI::ConversionError("unknown config key '" + key + "' for " + app->get_name());
      if (opt->count() > 0)
        continue;
      std::vector<std::string> inputs;
      if (v.is_array())
        for (const auto& e : v)
          inputs.push_back(scalar(e));
      else
        inputs.push_back(scalar(v));
      opt->add_result(inputs);
      opt->run_callback();
    }
  }

private:
  static std::string scalar(const json& v) {
    if (v.is_string())
      return v.get<std::string>();
    if (v.is_boolean())
      return v.get<bool>() ? "true" : "false";
    return v.dump();
  }
};

std::vector<std::unique_ptr<JsonConfig>> configs;

void attach_config(CLI::App* sub) {
  auto& c = configs.emplace_back(std::make_unique<JsonConfig>(JsonConfig{sub, {}}));
  sub->add_option("--config", c->path, "JSON experiment file; command-line flags override it")
      ->check(CLI::ExistingFile);
}

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out)
    throw ConfigError("cannot write '" + path + "'");
  return out;
}

// ---------------------------------------------------------------------------
// Mesh options shared by `mesh gen` and `gcmma`

struct MeshSpec {
  std::string file;
  std::string kind = "cantilever";
  std::size_t n = 16;
  double a = 0.0, b = 1.0;
  std::size_t nx = 50, ny = 20;
  double width = 100.0, height = 40.0;
  double grade_x = 1.0, grade_y = 1.0;
  std::string pattern = "uniform";
  std::size_t fine_rows = 0;
  double fine_height = 0.0;
  double load_band = 8.0;

  void add_generator_options(CLI::App* app) {
    app->add_option("--kind", kind, "uniform1d | log1d | rect | cantilever")
        ->check(CLI::IsMember({"uniform1d", "log1d", "rect", "cantilever"}))
        ->capture_default_str();
    app->add_option("--n", n, "uniform1d: element count; log1d: n + 1 elements")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--a", a, "uniform1d left end")->capture_default_str();
    app->add_option("--b", b, "uniform1d right end")->capture_default_str();
    app->add_option("--nx", nx, "2-D columns")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--ny", ny, "2-D rows (below the fine strip, if any)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--width", width)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--height", height)->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--grade-x", grade_x, "geometric ratio of consecutive column widths")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--grade-y", grade_y, "geometric ratio of consecutive row heights")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app->add_option("--pattern", pattern, "diagonal layout: uniform | alternating")
        ->check(CLI::IsMember({"uniform", "alternating"}))
        ->capture_default_str();
    app->add_option("--fine-rows", fine_rows, "rows in a refined strip along the top")
        ->capture_default_str();
    app->add_option("--fine-height", fine_height, "height of the refined strip")->capture_default_str();
    app->add_option("--load-band", load_band, "cantilever: height of the loaded band")
        ->capture_default_str();
  }

  [[nodiscard]] json to_json() const {
    if (!file.empty())
      return {{"file", file}};
    return {{"kind", kind},       {"n", n},
            {"a", a},             {"b", b},
            {"nx", nx},           {"ny", ny},
            {"width", width},     {"height", height},
            {"grade_x", grade_x}, {"grade_y", grade_y},
            {"pattern", pattern}, {"fine_rows", fine_rows},
            {"fine_height", fine_height}, {"load_band", load_band}};
  }

  [[nodiscard]] AnyMesh build() const {
    if (!file.empty())
      return read_mesh(file);
    if (kind == "uniform1d")
      return uniform_mesh_1d(n, a, b);
    if (kind == "log1d")
      return log_mesh_1d(n);
    if (kind == "cantilever" && grade_x == 1.0 && grade_y == 1.0 && pattern == "uniform") {
      fem::CantileverSpec s;
      s.nx = nx;
      s.ny = ny;
      s.width = width;
      s.height = height;
      s.load_band = load_band;
      s.fine_rows = fine_rows;
      s.fine_height = fine_height;
      return fem::cantilever_mesh(s);
    }
    const Grading gx = grade_x == 1.0 ? Grading{} : geometric_grading(grade_x, nx);
    Grading gy = grade_y == 1.0 ? Grading{} : geometric_grading(grade_y, ny);
    std::size_t rows = ny;
    if (fine_rows > 0) {
      if (grade_y != 1.0)
        throw ConfigError("--grade-y and --fine-rows are mutually exclusive");
      if (!(fine_height > 0.0 && fine_height < height))
        throw ConfigError("--fine-height must lie in (0, height)");
      gy = two_zone_grading(ny, fine_rows, 1.0 - fine_height / height);
      rows += fine_rows;
    }
    const auto pat = pattern == "alternating" ? DiagonalPattern::alternating : DiagonalPattern::uniform;
    Mesh2D m = structured_tri_mesh(nx, rows, width, height, gx, gy, pat);
    if (kind == "cantilever")
      m = fem::tag_cantilever_load(m, width, height, load_band);
    return m;
  }
};

/// Reference element size for the filter scale: the column width of a
/// generated mesh, sqrt(2 |D| / n_elements) for a mesh file.
double element_size(const MeshSpec& spec, const Mesh2D& m) {
  if (spec.file.empty())
    return spec.width / static_cast<double>(spec.nx);
  return std::sqrt(2.0 * m.measures()->total() / static_cast<double>(m.num_elements()));
}

// ---------------------------------------------------------------------------
// steepest

struct SteepestOpts {
  std::string experiment = "steepest";
  std::size_t n = 10;
  std::string space = "l2";
  double tol = 1e-7;
  std::size_t max_iter = descent::kDefaultMaxIter;
  std::string out;
};

int run_steepest(const SteepestOpts& o) {
  const auto mesh = descent::benchmark_mesh(o.n);
  const auto prob = descent::assemble_quadratic(mesh);
  const SpaceMode mode = parse_space_mode(o.space);
  const descent::History h = mode == SpaceMode::l2 ? descent::run_l2(prob, o.tol, o.max_iter)
                                                  : descent::run_rn(prob, o.tol, o.max_iter);
  const json cfg = {{"command", "steepest"}, {"experiment", o.experiment}, {"n", o.n},
                    {"space", o.space}, {"tol", o.tol}, {"max_iter", o.max_iter}};
  if (!o.out.empty()) {
    auto out = open_out(o.out);
    io::write_descent_csv(out, h, io::config_fingerprint(cfg));
  }
  std::cout << "iterations: " << h.iterations() << '\n';
  std::cout << "final_error: " << io::fmt(h.entries.back().error) << '\n';
  if (!h.converged) {
    std::cerr << "steepest: no convergence within " << o.max_iter << " iterations\n";
    return kExitNonConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// gcmma

struct GcmmaOpts {
  std::string experiment = "gcmma";
  std::string problem = "quad";
  MeshSpec mesh;
  std::string space = "l2";
  std::size_t max_outer = 200;
  std::size_t max_inner = 15;
  double kkt_tol = 0.0;
  double initial = -1.0; ///< < 0 picks the problem default
  double fraction = 0.3;
  double target = 0.9;
  double kappa = -1.0; ///< < 0 scales the reference length with the mesh
  double kappa_ref = 0.2;
  double h_ref = 0.25;
  std::string dirichlet_tag = "left";
  std::string load_tag = "load";
  double traction_x = 0.0, traction_y = -1.0;
  std::string out;
  std::string design_out;
  std::string mesh_out;
  std::string trace_out;
  bool quiet = false;
};

int run_gcmma(const GcmmaOpts& o) {
  const SpaceMode mode = parse_space_mode(o.space);
  const AnyMesh mesh = o.mesh.build();
  const Measures measures = element_measures(mesh);

  OptimizationProblem prob;
  std::unique_ptr<fem::HelmholtzFilter> filter;
  double initial = o.initial;
  double kappa = 0.0;
  if (o.problem == "quad") {
    prob = quadratic_volume_problem(measures, {o.target, o.fraction});
    if (initial < 0.0)
      initial = 0.5;
  } else {
    const auto* m2 = std::get_if<Mesh2D>(&mesh);
    if (!m2)
      throw ConfigError("compliance problem needs a 2-D mesh");
    kappa = o.kappa >= 0.0 ? o.kappa : fem::scale_kappa(o.kappa_ref, o.h_ref, element_size(o.mesh, *m2));
    fem::LoadCase load;
    load.dirichlet_tag = o.dirichlet_tag;
    load.traction_tag = o.load_tag;
    load.traction = {o.traction_x, o.traction_y};
    if (!m2->has_tag(load.dirichlet_tag) || !m2->has_tag(load.traction_tag))
      throw ConfigError("mesh lacks tag '" +
                        (m2->has_tag(load.dirichlet_tag) ? load.traction_tag : load.dirichlet_tag) +
                        "'");
    prob = fem::compliance_problem(*m2, {}, load, {kappa}, o.fraction);
    filter = std::make_unique<fem::HelmholtzFilter>(*m2, fem::FilterConfig{kappa});
    if (initial < 0.0)
      initial = 0.1;
  }

  GcmmaConfig cfg = GcmmaConfig::defaults(prob.num_constraints);
  cfg.space = mode;
  cfg.max_outer = o.max_outer;
  cfg.max_inner = o.max_inner;
  cfg.kkt_tolerance = o.kkt_tol;
  cfg.keep_designs = false;
  if (!o.quiet)
    cfg.log = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };

  const json jcfg = {{"command", "gcmma"},        {"experiment", o.experiment},
                     {"problem", o.problem},      {"mesh", o.mesh.to_json()},
                     {"space", o.space},          {"max_outer", o.max_outer},
                     {"max_inner", o.max_inner},  {"kkt_tol", o.kkt_tol},
                     {"initial", initial},        {"fraction", o.fraction},
                     {"target", o.target},        {"kappa", kappa},
                     {"dirichlet_tag", o.dirichlet_tag}, {"load_tag", o.load_tag},
                     {"traction", {o.traction_x, o.traction_y}}};
  const std::string fp = io::config_fingerprint(jcfg);

  const GcmmaResult res = solve(prob, cfg, PrimalField(measures, initial));
  const auto& last = res.history.back();

  if (!o.out.empty()) {
    auto out = open_out(o.out);
    io::write_history_csv(out, res, prob.num_constraints, fp);
  }
  if (!o.design_out.empty()) {
    auto out = open_out(o.design_out);
    io::write_design_csv(out, res.nu, filter ? filter->apply(res.nu) : res.nu, fp);
  }
  if (!o.mesh_out.empty())
    write_mesh(o.mesh_out, mesh);
  if (!o.trace_out.empty()) {
    auto out = open_out(o.trace_out);
    out << io::kFingerprintPrefix << fp << '\n' << kTraceHeader << '\n';
    for (const auto& t : res.last_subproblem.trace)
      out << io::fmt(t.barrier) << ',' << t.newton_iter << ',' << io::fmt(t.q_norm) << ','
          << io::fmt(t.tau) << '\n';
  }

  std::cout << "outer_iterations: " << last.iter << '\n';
  for (std::size_t i = 0; i < last.theta.size(); ++i)
    std::cout << "theta" << i << ": " << io::fmt(last.theta[i]) << '\n';
  std::cout << "kkt: " << io::fmt(last.kkt) << '\n';
  for (std::size_t i = 0; i < res.lambda.size(); ++i)
    std::cout << "lambda" << i + 1 << ": " << io::fmt(res.lambda[i]) << '\n';
  std::cout << "warnings: " << res.warnings.size() << '\n';
  if (o.kkt_tol > 0.0 && !res.converged) {
    std::cerr << "gcmma: KKT tolerance " << o.kkt_tol << " not reached in " << o.max_outer
              << " outer iterations\n";
    return kExitNonConvergence;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareOpts {
  std::string a, b;
  std::string mesh_a, mesh_b, design_a, design_b;
  std::string out;
};

int run_compare(const CompareOpts& o) {
  const auto ta = io::read_csv_file(o.a);
  const auto tb = io::read_csv_file(o.b);
  io::CompareReport r = io::compare_histories(ta, tb);
  const bool any_design = !o.design_a.empty() || !o.design_b.empty();
  if (any_design) {
    if (o.design_a.empty() || o.design_b.empty() || o.mesh_a.empty() || o.mesh_b.empty())
      throw ConfigError("design comparison needs --mesh-a, --design-a, --mesh-b and --design-b");
    io::add_design_distance(r, read_mesh(o.mesh_a), io::design_values(io::read_csv_file(o.design_a)),
                            read_mesh(o.mesh_b), io::design_values(io::read_csv_file(o.design_b)));
  }
  if (!o.out.empty()) {
    auto out = open_out(o.out);
    io::write_report(out, r);
  }
  std::cout << "max_theta0_rel_diff: " << io::fmt(r.max_theta0_rel) << '\n';
  if (r.design_distance) {
    std::cout << "design_l2_distance: " << io::fmt(*r.design_distance) << '\n';
    std::cout << "design_rel_l2_distance: " << io::fmt(*r.design_relative_distance) << '\n';
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"GCMMA experiments in L2 and R^n"};
  app.require_subcommand(1);

  SteepestOpts so;
  auto* steep = app.add_subcommand("steepest", "1-D steepest descent benchmark");
  attach_config(steep);
  steep->add_option("--experiment", so.experiment)->capture_default_str();
  steep->add_option("--n", so.n, "number of design variables")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  steep->add_option("--space", so.space)->check(CLI::IsMember({"l2", "rn"}))->capture_default_str();
  steep->add_option("--tol", so.tol, "stop once the error is below this (inf allowed)")
      ->check(CLI::Validator(
          [](const std::string& v) {
            const double x = std::strtod(v.c_str(), nullptr);
            return x > 0 ? std::string() : "must be positive: " + v;
          },
          "POSITIVE"))
      ->capture_default_str();
  steep->add_option("--max-iter", so.max_iter)->capture_default_str();
  steep->add_option("--out", so.out, "CSV history iter,error");

  GcmmaOpts go;
  auto* gc = app.add_subcommand("gcmma", "GCMMA on the quadratic or compliance problem");
  attach_config(gc);
  gc->add_option("--experiment", go.experiment)->capture_default_str();
  gc->add_option("--problem", go.problem)
      ->check(CLI::IsMember({"quad", "compliance"}))
      ->capture_default_str();
  gc->add_option("--mesh", go.mesh.file, "mesh file; otherwise the generator options apply")
      ->check(CLI::ExistingFile);
  go.mesh.add_generator_options(gc);
  gc->add_option("--space", go.space)->check(CLI::IsMember({"l2", "rn"}))->capture_default_str();
  gc->add_option("--max-outer", go.max_outer)->capture_default_str();
  gc->add_option("--max-inner", go.max_inner)->capture_default_str();
  gc->add_option("--kkt-tol", go.kkt_tol, "stop when the KKT metric drops below; 0 disables")
      ->capture_default_str();
  gc->add_option("--initial", go.initial, "uniform initial design (default 0.5 quad, 0.1 compliance)");
  gc->add_option("--fraction", go.fraction, "volume fraction")->capture_default_str();
  gc->add_option("--target", go.target, "quad: value the objective pulls towards")
      ->capture_default_str();
  gc->add_option("--kappa", go.kappa, "filter length^2; default scales --kappa-ref with the mesh");
  gc->add_option("--kappa-ref", go.kappa_ref)->capture_default_str();
  gc->add_option("--h-ref", go.h_ref, "element size at which --kappa-ref applies")
      ->capture_default_str();
  gc->add_option("--dirichlet-tag", go.dirichlet_tag)->capture_default_str();
  gc->add_option("--load-tag", go.load_tag)->capture_default_str();
  gc->add_option("--traction-x", go.traction_x)->capture_default_str();
  gc->add_option("--traction-y", go.traction_y)->capture_default_str();
  gc->add_option("--out", go.out, "CSV history");
  gc->add_option("--design-out", go.design_out, "CSV element_id,nu,nu_hat");
  gc->add_option("--mesh-out", go.mesh_out, "write the mesh used");
  gc->add_option("--trace-out", go.trace_out, "interior-point trace of the last subproblem");
  gc->add_flag("--quiet", go.quiet, "suppress warnings on stderr");

  CompareOpts co;
  auto* cmp = app.add_subcommand("compare", "compare two GCMMA runs");
  attach_config(cmp);
  cmp->add_option("--a", co.a, "history CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--b", co.b, "history CSV")->required()->check(CLI::ExistingFile);
  cmp->add_option("--mesh-a", co.mesh_a)->check(CLI::ExistingFile);
  cmp->add_option("--mesh-b", co.mesh_b)->check(CLI::ExistingFile);
  cmp->add_option("--design-a", co.design_a)->check(CLI::ExistingFile);
  cmp->add_option("--design-b", co.design_b)->check(CLI::ExistingFile);
  cmp->add_option("--out", co.out, "report file");

  MeshSpec ms;
  std::string mesh_path;
  auto* mesh_cmd = app.add_subcommand("mesh", "mesh utilities");
  mesh_cmd->require_subcommand(1);
  auto* gen = mesh_cmd->add_subcommand("gen", "generate a mesh file");
  attach_config(gen);
  ms.add_generator_options(gen);
  gen->add_option("--out", mesh_path, "mesh file")->required();

  try {
    app.parse(argc, argv);
    for (const auto& c : configs)
      if (c->app->parsed())
        c->apply();
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*steep)
      return run_steepest(so);
    if (*gc)
      return run_gcmma(go);
    if (*cmp)
      return run_compare(co);
    if (*gen) {
      const AnyMesh m = ms.build();
      write_mesh(mesh_path, m);
      std::cout << "elements: "
                << std::visit([](const auto& x) { return x.num_elements(); }, m) << '\n';
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NonConvergence& e) {
    std::cerr << "nonconvergence: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return kExitNonConvergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
