// Command-line surface: fit, simulate, ingest, verify.
//
// Exit codes: 0 success, 1 property failure (verify), 2 input error,
// 3 non-convergence (fit hit max sweeps).

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vreml/errors.hpp"
#include "vreml/graph.hpp"
#include "vreml/ingest.hpp"
#include "vreml/io.hpp"
#include "vreml/model.hpp"
#include "vreml/oracle.hpp"
#include "vreml/simulate.hpp"
#include "vreml/verify.hpp"
#include "vreml/version.hpp"
#include "vreml/vreml.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPropertyFailure = 1;
constexpr int kExitInputError = 2;
constexpr int kExitNotConverged = 3;

const char* assumption_tag(vreml::Errc code) {
  switch (code) {
    case vreml::Errc::rank_deficient_design:
    case vreml::Errc::design_too_wide:
      return " [assumption A-1]";
    case vreml::Errc::disconnected:
      return " [assumption A-2]";
    case vreml::Errc::not_positive_definite_on_e:
      return " [assumption A-3]";
    default:
      return "";
  }
}

std::string default_out_dir() {
  if (const char* env = std::getenv("VREML_OUT_DIR")) return env;
  return ".";
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) vreml::raise(vreml::Errc::io_error, "cannot create output directory '" + out + "'");
  return dir;
}

struct ManifestTimer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::map<std::string, std::string>& inputs, double wall_time) {
  json manifest;
  manifest["command"] = command;
  manifest["library_version"] = vreml::kVersion;
  manifest["config"] = config;
  json digests = json::object();
  for (const auto& [path, digest] : inputs) digests[path] = digest;
  manifest["inputs"] = digests;
  manifest["wall_time_seconds"] = wall_time;
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) vreml::raise(vreml::Errc::io_error, "failed writing manifest.json");
}

void write_json_file(const fs::path& path, const json& value) {
  std::ofstream out(path);
  out << value.dump(2) << '\n';
  if (!out) vreml::raise(vreml::Errc::io_error, "failed writing '" + path.string() + "'");
}

// fit -----------------------------------------------------------------------

struct FitArgs {
  std::string adjacency, design, response;
  std::string method = "vreml";
  double tol = 1e-8;
  int max_sweeps = 500;
  std::optional<double> init_tau_y, init_tau_u;
  bool relative_tol = false;
  std::string out = default_out_dir();
};

void write_effects_csv(const fs::path& path, const Eigen::VectorXd& mu,
                       const Eigen::VectorXd& fitted) {
  std::ofstream out(path);
  out << "node,mu,fitted\n";
  for (Eigen::Index i = 0; i < mu.size(); ++i)
    out << i << ',' << vreml::io::format_double(mu[i]) << ','
        << vreml::io::format_double(fitted[i]) << '\n';
  if (!out) vreml::raise(vreml::Errc::io_error, "failed writing effects.csv");
}

int run_fit(const FitArgs& args) {
  ManifestTimer timer;
  const fs::path dir = prepare_out_dir(args.out);

  const vreml::AdjacencyGraph graph = vreml::io::read_adjacency_auto(args.adjacency);
  const vreml::IcarStructure icar = vreml::build_icar(graph);
  const Eigen::MatrixXd x = vreml::io::read_design_csv(args.design);
  const Eigen::VectorXd y = vreml::io::read_response_csv(args.response);
  const vreml::ModelData model = vreml::load_model(y, x);
  if (!model.has_intercept_column())
    std::cerr << "warning: design has no intercept column; the level of the response is "
                 "identified by the design alone\n";

  json config{{"adjacency", args.adjacency}, {"design", args.design},
              {"response", args.response},  {"method", args.method},
              {"tol", args.tol},            {"max_sweeps", args.max_sweeps},
              {"relative_tol", args.relative_tol}, {"out", args.out}};
  if (args.init_tau_y) config["init_tau_y"] = *args.init_tau_y;
  if (args.init_tau_u) config["init_tau_u"] = *args.init_tau_u;
  const std::map<std::string, std::string> inputs = {
      {args.adjacency, vreml::io::file_digest(args.adjacency)},
      {args.design, vreml::io::file_digest(args.design)},
      {args.response, vreml::io::file_digest(args.response)}};

  json out;
  out["method"] = args.method;
  out["n"] = model.n();
  out["p"] = model.p();

  int exit_code = kExitOk;
  if (args.method == "vreml") {
    vreml::FitConfig fit_config;
    fit_config.tol = args.tol;
    fit_config.max_sweeps = args.max_sweeps;
    fit_config.init_tau_y = args.init_tau_y;
    fit_config.init_tau_u = args.init_tau_u;
    fit_config.relative_tol = args.relative_tol;
    const vreml::FitReport report = vreml::fit(model, icar, fit_config);

    out["tau_y"] = report.state.tau_y;
    out["tau_u"] = report.state.tau_u;
    out["sigma_sq_eps"] = report.sigma_sq_y;
    out["sigma_sq_u"] = report.sigma_sq_u;
    out["beta"] = std::vector<double>(report.beta_hat.begin(), report.beta_hat.end());
    out["convergence"] = json{{"converged", report.converged},
                              {"sweeps", report.sweeps},
                              {"tol", args.tol},
                              {"max_sweeps", args.max_sweeps},
                              {"final_elbo", report.final_elbo}};
    out["fixed_point_residuals"] = json{{"mu", report.residuals.mu},
                                        {"sigma", report.residuals.sigma},
                                        {"tau_y", report.residuals.tau_y},
                                        {"tau_u", report.residuals.tau_u}};
    out["elbo_trace"] = report.state.elbo_trace;
    write_effects_csv(dir / "effects.csv", report.state.mu, report.fitted);
    if (!report.converged) {
      std::cerr << "warning: not converged after " << report.sweeps << " sweeps\n";
      exit_code = kExitNotConverged;
    }
  } else {
    const auto parsed = vreml::parse_fit_method(args.method);
    if (!parsed || *parsed == vreml::FitMethod::vreml)
      vreml::raise(vreml::Errc::invalid_config, "unknown method '" + args.method + "'");
    const vreml::OracleMethod method = *parsed == vreml::FitMethod::exact_reml
                                           ? vreml::OracleMethod::exact_reml
                                           : vreml::OracleMethod::exact_mle;
    const vreml::OracleEstimates estimates = vreml::maximize(method, model, icar);
    const vreml::RecoveredEffects effects = vreml::recover_effects(
        method, estimates.tau_y_hat, estimates.tau_u_hat, model, icar);

    out["tau_y"] = estimates.tau_y_hat;
    out["tau_u"] = estimates.tau_u_hat;
    out["sigma_sq_eps"] = 1.0 / estimates.tau_y_hat;
    out["sigma_sq_u"] = 1.0 / estimates.tau_u_hat;
    out["beta"] = std::vector<double>(effects.beta.begin(), effects.beta.end());
    out["objective"] = json{{"value", estimates.objective_value},
                            {"evaluations", estimates.evaluations},
                            {"gradient_norm", estimates.gradient_norm}};
    write_effects_csv(dir / "effects.csv", effects.u, effects.fitted);
  }

  write_json_file(dir / "fit.json", out);
  write_manifest(dir, "fit", config, inputs, timer.seconds());
  return exit_code;
}

// simulate --------------------------------------------------------------------

struct SimulateArgs {
  int n0 = 7;
  int nsim = 0;
  std::uint64_t seed = 0;
  std::string methods = "vreml";
  std::string scheme = "rook";
  int threads = 1;
  double tol = 1e-8;
  int max_sweeps = 500;
  std::string out = default_out_dir();
};

int run_simulate(const SimulateArgs& args) {
  ManifestTimer timer;
  const fs::path dir = prepare_out_dir(args.out);

  vreml::SimConfig config;
  config.n0 = args.n0;
  config.n_sim = args.nsim;
  config.seed = args.seed;
  config.threads = args.threads;
  config.fit.tol = args.tol;
  config.fit.max_sweeps = args.max_sweeps;
  if (args.scheme == "rook") config.scheme = vreml::AdjacencyScheme::rook;
  else if (args.scheme == "queen") config.scheme = vreml::AdjacencyScheme::queen;
  else vreml::raise(vreml::Errc::invalid_config, "unknown scheme '" + args.scheme + "'");

  config.methods.clear();
  std::stringstream list(args.methods);
  std::string token;
  while (std::getline(list, token, ',')) {
    const auto method = vreml::parse_fit_method(token);
    if (!method) vreml::raise(vreml::Errc::invalid_config, "unknown method '" + token + "'");
    config.methods.push_back(*method);
  }

  const vreml::SimResult result = vreml::run_study(config);

  {
    std::ofstream raw(dir / "raw.csv");
    vreml::write_raw_csv(raw, result);
    if (!raw) vreml::raise(vreml::Errc::io_error, "failed writing raw.csv");
  }
  {
    std::ofstream agg(dir / "aggregate.csv");
    vreml::write_aggregate_csv(agg, result);
    if (!agg) vreml::raise(vreml::Errc::io_error, "failed writing aggregate.csv");
  }

  json manifest_config{{"n0", args.n0},           {"nsim", args.nsim},
                       {"seed", args.seed},       {"methods", args.methods},
                       {"scheme", args.scheme},   {"threads", args.threads},
                       {"tol", args.tol},         {"max_sweeps", args.max_sweeps},
                       {"beta", std::vector<double>{config.beta[0], config.beta[1],
                                                    config.beta[2]}},
                       {"sigma_eps_sq", config.sigma_eps_sq},
                       {"sigma_u_sq", config.sigma_u_sq},
                       {"out", args.out}};
  write_manifest(dir, "simulate", manifest_config, {}, timer.seconds());

  int failed = 0;
  for (const auto& agg : result.aggregates) failed += agg.replications_failed;
  if (failed > 0) std::cerr << "warning: " << failed << " replication fit(s) failed\n";
  return kExitOk;
}

// ingest ----------------------------------------------------------------------

struct IngestArgs {
  std::string cells;
  std::string grid;
  std::optional<double> cell_width;
  std::string out = default_out_dir();
};

int run_ingest(const IngestArgs& args) {
  ManifestTimer timer;
  const fs::path dir = prepare_out_dir(args.out);

  vreml::GridSpec spec;
  if (!args.grid.empty() && args.cell_width)
    vreml::raise(vreml::Errc::invalid_config, "--grid and --cell-width are mutually exclusive");
  if (args.grid.empty() && !args.cell_width)
    vreml::raise(vreml::Errc::invalid_config, "one of --grid or --cell-width is required");
  if (args.cell_width) {
    spec = vreml::GridSpec::width(*args.cell_width);
  } else {
    int nx = 0, ny = 0;
    const auto cross = args.grid.find('x');
    try {
      if (cross == std::string::npos) {
        nx = ny = std::stoi(args.grid);
      } else {
        nx = std::stoi(args.grid.substr(0, cross));
        ny = std::stoi(args.grid.substr(cross + 1));
      }
    } catch (const std::exception&) {
      vreml::raise(vreml::Errc::invalid_config, "cannot parse --grid '" + args.grid + "'");
    }
    spec = vreml::GridSpec::per_side(nx, ny);
  }

  const vreml::CellTable cells = vreml::io::read_cells_csv(args.cells);
  const vreml::GridDataset dataset = vreml::bin_cells(cells, spec);

  vreml::io::write_response_csv((dir / "response.csv").string(), dataset.z);
  vreml::io::write_design_csv((dir / "design.csv").string(), dataset.covariates,
                              vreml::grid_covariate_names());
  vreml::io::write_adjacency_matrix_market((dir / "adjacency.mtx").string(), dataset.adjacency);

  json summary{{"cells", static_cast<int>(dataset.cells.size())},
               {"input_rows", dataset.input_rows},
               {"dropped_rows", dataset.dropped_rows},
               {"edges", dataset.adjacency.num_edges()},
               {"connected", true},
               {"grid", json{{"nx", dataset.grid_nx},
                             {"ny", dataset.grid_ny},
                             {"cell_width_x", dataset.cell_width_x},
                             {"cell_width_y", dataset.cell_width_y}}}};
  write_json_file(dir / "summary.json", summary);

  json config{{"cells", args.cells}, {"out", args.out}};
  if (!args.grid.empty()) config["grid"] = args.grid;
  if (args.cell_width) config["cell_width"] = *args.cell_width;
  write_manifest(dir, "ingest", config,
                 {{args.cells, vreml::io::file_digest(args.cells)}}, timer.seconds());
  return kExitOk;
}

// verify ----------------------------------------------------------------------

struct VerifyArgs {
  int n = 36;
  int trials = 25;
  std::uint64_t seed = 1;
  std::string sabotage;
  std::string out = default_out_dir();
};

int run_verify(const VerifyArgs& args) {
  ManifestTimer timer;
  const fs::path dir = prepare_out_dir(args.out);

  vreml::VerifyConfig config;
  config.n = args.n;
  config.trials = args.trials;
  config.seed = args.seed;
  if (!args.sabotage.empty()) {
    if (args.sabotage != "tau-order")
      vreml::raise(vreml::Errc::invalid_config, "unknown sabotage mode '" + args.sabotage + "'");
    config.sabotage_tau_order = true;
  }

  const vreml::VerifyReport report = vreml::run_verification(config);
  vreml::print_verification(std::cout, report);

  json manifest_config{{"n", args.n},
                       {"trials", args.trials},
                       {"seed", args.seed},
                       {"sabotage", args.sabotage},
                       {"out", args.out}};
  write_manifest(dir, "verify", manifest_config, {}, timer.seconds());
  return report.all_passed() ? kExitOk : kExitPropertyFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variational REML for Gaussian ICAR spatial models"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "Fit a spatial model from data files");
  fit_cmd->add_option("--adjacency", fit_args.adjacency,
                      "Adjacency file (Matrix Market .mtx or edge-list CSV with header i,j)")
      ->required();
  fit_cmd->add_option("--design", fit_args.design, "Design matrix CSV with named columns")
      ->required();
  fit_cmd->add_option("--response", fit_args.response, "Response CSV with header y")->required();
  fit_cmd->add_option("--method", fit_args.method, "vreml | exact-reml | exact-mle")
      ->default_val("vreml");
  fit_cmd->add_option("--tol", fit_args.tol, "ELBO-change stopping threshold")
      ->default_val(1e-8);
  fit_cmd->add_option("--max-sweeps", fit_args.max_sweeps, "Sweep budget")->default_val(500);
  fit_cmd->add_option("--init-tau-y", fit_args.init_tau_y, "Initial observation precision");
  fit_cmd->add_option("--init-tau-u", fit_args.init_tau_u, "Initial spatial precision");
  fit_cmd->add_flag("--relative-tol", fit_args.relative_tol,
                    "Scale the stopping threshold by 1 + |ELBO|");
  fit_cmd->add_option("--out", fit_args.out,
                      "Output directory (default $VREML_OUT_DIR or .); writes fit.json, "
                      "effects.csv, manifest.json");

  SimulateArgs sim_args;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "Run the lattice simulation study");
  sim_cmd->add_option("--n0", sim_args.n0, "Lattice side length")->required();
  sim_cmd->add_option("--nsim", sim_args.nsim, "Number of replications")->required();
  sim_cmd->add_option("--seed", sim_args.seed, "RNG seed")->required();
  sim_cmd->add_option("--methods", sim_args.methods,
                      "Comma list of vreml,exact-reml,exact-mle")
      ->default_val("vreml");
  sim_cmd->add_option("--scheme", sim_args.scheme, "Lattice adjacency: rook | queen")
      ->default_val("rook");
  sim_cmd->add_option("--threads", sim_args.threads,
                      "Worker threads (outputs are identical for any value)")
      ->default_val(1);
  sim_cmd->add_option("--tol", sim_args.tol, "Fit stopping threshold")->default_val(1e-8);
  sim_cmd->add_option("--max-sweeps", sim_args.max_sweeps, "Fit sweep budget")->default_val(500);
  sim_cmd->add_option("--out", sim_args.out,
                      "Output directory; writes raw.csv, aggregate.csv, manifest.json");

  IngestArgs ingest_args;
  CLI::App* ingest_cmd =
      app.add_subcommand("ingest", "Aggregate point observations onto a regular grid");
  ingest_cmd->add_option("--cells", ingest_args.cells,
                         "Point table CSV with columns x,y,count,library_size")
      ->required();
  ingest_cmd->add_option("--grid", ingest_args.grid, "Cells per side: INT or INTxINT");
  ingest_cmd->add_option("--cell-width", ingest_args.cell_width, "Absolute square cell width");
  ingest_cmd->add_option("--out", ingest_args.out,
                         "Output directory; writes response.csv, design.csv, adjacency.mtx, "
                         "summary.json, manifest.json");

  VerifyArgs verify_args;
  CLI::App* verify_cmd =
      app.add_subcommand("verify", "Run the randomized invariant suite and print a table");
  verify_cmd->add_option("--n", verify_args.n, "Units per instance (perfect square)")
      ->default_val(36);
  verify_cmd->add_option("--trials", verify_args.trials, "Number of random instances")
      ->default_val(25);
  verify_cmd->add_option("--seed", verify_args.seed, "RNG seed")->default_val(1);
  verify_cmd->add_option("--sabotage", verify_args.sabotage,
                         "Deliberately mis-specified variant (tau-order) used to check that "
                         "the invariant suite can fail");
  verify_cmd->add_option("--out", verify_args.out, "Output directory for manifest.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (sim_cmd->parsed()) return run_simulate(sim_args);
    if (ingest_cmd->parsed()) return run_ingest(ingest_args);
    if (verify_cmd->parsed()) return run_verify(verify_args);
  } catch (const vreml::Error& e) {
    std::cerr << "error: " << e.what() << assumption_tag(e.code());
    if (e.code() == vreml::Errc::disconnected_grid)
      std::cerr << " (hint: increase --cell-width or decrease --grid)";
    std::cerr << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitInputError;
}
