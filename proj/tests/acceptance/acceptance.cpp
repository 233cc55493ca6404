// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Needs the CLI binary (--cli) and the fixture directory
// (--fixtures) for the determinism checks.

#include <Eigen/Dense>

#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vreml/errors.hpp"
#include "vreml/ingest.hpp"
#include "vreml/io.hpp"
#include "vreml/oracle.hpp"
#include "vreml/rng.hpp"
#include "vreml/simulate.hpp"
#include "vreml/verify.hpp"
#include "vreml/vreml.hpp"

namespace fs = std::filesystem;
using namespace vreml;

namespace {

std::string g_cli;
fs::path g_fixtures;
int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, const std::string& name, bool passed, const std::string& detail) {
  std::cout << (passed ? "[PASS]" : "[FAIL]") << " criterion " << criterion << " (" << name
            << "): " << detail << "\n";
  if (!passed) ++g_failures;
}

void run_criterion(int criterion, const std::string& name,
                   const std::function<std::pair<bool, std::string>()>& body) {
  try {
    const auto [passed, detail] = body();
    report(criterion, name, passed, detail);
  } catch (const std::exception& e) {
    report(criterion, name, false, std::string("exception: ") + e.what());
  }
}

SimDraw instance(int n0, std::uint64_t seed) {
  SimConfig config;
  config.n0 = n0;
  config.seed = seed;
  config.n_sim = 1;
  return generate(config, 0);
}

std::string fmt(double v) { return io::format_double(v); }

// ---------------------------------------------------------------------------

std::pair<bool, std::string> exactness_at_posterior() {
  Timer timer;
  double worst = 0.0;
  for (int trial = 0; trial < 25; ++trial) {
    const SimDraw draw = instance(5, 9000 + trial);
    const SumToZeroBasis basis = make_basis(draw.model.n());
    const double scale =
        (draw.model.n() - draw.model.p()) / projected_quadratic(draw.model, draw.model.y());
    CounterRng rng(4242, trial);
    for (int probe = 0; probe < 5; ++probe) {
      const double tau_y = scale * std::exp(rng.normal());
      const double tau_u = scale * std::exp(rng.normal());
      const VariationalState posterior =
          variational_block_update(draw.model, draw.icar, basis, tau_y, tau_u);
      const double bound = elbo(posterior, draw.model, draw.icar);
      const double exact = restricted_loglik(tau_y, tau_u, draw.model, draw.icar);
      worst = std::max(worst, std::abs(bound - exact) / (1.0 + std::abs(exact)));
    }
  }
  const double elapsed = timer.seconds();
  const bool ok = worst <= 1e-8 && elapsed < 10.0;
  return {ok, "25 instances x 5 precision pairs, worst gap " + fmt(worst) + " (tol 1e-8), " +
                  fmt(elapsed) + " s (< 10 s)"};
}

std::pair<bool, std::string> estimator_equivalence() {
  Timer timer;
  // Fixed draws with interior restricted maximisers; boundary draws (variance
  // estimates degenerating to zero) have no finite optimum to compare.
  const std::vector<std::pair<int, std::uint64_t>> instances = {
      {5, 1}, {5, 4}, {5, 21}, {5, 22}, {7, 1}, {7, 2}, {7, 3}, {10, 1}, {10, 5}, {10, 6}};
  double worst = 0.0;
  for (const auto& [n0, seed] : instances) {
    const SimDraw draw = instance(n0, seed);
    FitConfig config;
    config.tol = 1e-12;
    config.max_sweeps = 5000;
    const FitReport report = fit(draw.model, draw.icar, config);
    if (!report.converged)
      return {false, "fit did not converge on n0=" + std::to_string(n0) + " seed " +
                         std::to_string(seed)};
    const OracleEstimates oracle = maximize(OracleMethod::exact_reml, draw.model, draw.icar);
    worst = std::max(worst, std::abs(report.state.tau_y - oracle.tau_y_hat) / oracle.tau_y_hat);
    worst = std::max(worst, std::abs(report.state.tau_u - oracle.tau_u_hat) / oracle.tau_u_hat);
  }
  const double elapsed = timer.seconds();
  const bool ok = worst <= 1e-4 && elapsed < 60.0;
  return {ok, "10 instances, n in {25,49,100}, worst relative gap " + fmt(worst) +
                  " (tol 1e-4), " + fmt(elapsed) + " s (< 60 s)"};
}

// Shared pool for criteria 3 and 4.
struct PoolFit {
  bool converged = false;
  double worst_drop = 0.0;  // scaled ELBO decrease across sweeps
  double residual = 0.0;
};

std::vector<PoolFit> fit_pool() {
  std::vector<PoolFit> pool;
  int converged_count = 0;
  for (std::uint64_t seed = 1000; seed < 1400; ++seed) {
    if (pool.size() >= 100 && converged_count >= 100) break;
    const SimDraw draw = instance(6, seed);
    FitConfig config;
    config.tol = 1e-12;
    config.max_sweeps = 8000;
    const FitReport report = fit(draw.model, draw.icar, config);
    PoolFit entry;
    entry.converged = report.converged;
    const auto& trace = report.state.elbo_trace;
    for (size_t t = 1; t < trace.size(); ++t)
      entry.worst_drop = std::max(
          entry.worst_drop, (trace[t - 1] - trace[t]) / (1.0 + std::abs(trace[t - 1])));
    entry.residual = report.residuals.max_abs();
    pool.push_back(entry);
    if (entry.converged) ++converged_count;
  }
  return pool;
}

std::pair<bool, std::string> monotonicity(const std::vector<PoolFit>& pool) {
  int violations = 0;
  double worst = 0.0;
  int counted = 0;
  for (const PoolFit& entry : pool) {
    if (counted == 100) break;
    ++counted;
    worst = std::max(worst, entry.worst_drop);
    if (entry.worst_drop > 1e-9) ++violations;
  }
  const bool ok = counted == 100 && violations == 0;
  return {ok, std::to_string(counted) + " fits at n=36, worst scaled ELBO drop " + fmt(worst) +
                  " (slack 1e-9), " + std::to_string(violations) + " violations"};
}

std::pair<bool, std::string> stationarity(const std::vector<PoolFit>& pool) {
  int counted = 0;
  double worst = 0.0;
  for (const PoolFit& entry : pool) {
    if (!entry.converged) continue;  // boundary drift: no interior stationary point
    if (counted == 100) break;
    ++counted;
    worst = std::max(worst, entry.residual);
  }
  const bool ok = counted == 100 && worst <= 1e-6;
  return {ok, std::to_string(counted) + " converged fits, worst scaled residual " + fmt(worst) +
                  " (tol 1e-6)"};
}

std::pair<bool, std::string> gradient_correctness() {
  double worst = 0.0;
  int states = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const SimDraw draw = instance(6, 500 + trial);
    const int n = draw.model.n();
    const SumToZeroBasis basis = make_basis(n);
    const double scale =
        (n - draw.model.p()) / projected_quadratic(draw.model, draw.model.y());
    CounterRng rng(8888, trial);
    for (int probe = 0; probe < 5; ++probe) {
      ++states;
      const double tau_y = scale * std::exp(rng.normal());
      const double tau_u = scale * std::exp(rng.normal());
      VariationalState state{
          basis.lift(rng.normal_vector(n - 1)),
          precision_operator(draw.model, draw.icar, basis, scale * std::exp(rng.normal()),
                             scale * std::exp(rng.normal())),
          tau_y, tau_u, {}};
      const ElboGradients grads = elbo_gradients(state, draw.model, draw.icar);
      auto eval = [&](double ty, double tu, const Eigen::VectorXd& mu) {
        VariationalState probe_state{mu, state.sigma, ty, tu, {}};
        return elbo(probe_state, draw.model, draw.icar);
      };
      auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
      };
      const double hy = 1e-6 * tau_y;
      worst = std::max(worst, rel((eval(tau_y + hy, tau_u, state.mu) -
                                   eval(tau_y - hy, tau_u, state.mu)) /
                                      (2.0 * hy),
                                  grads.tau_y));
      const double hu = 1e-6 * tau_u;
      worst = std::max(worst, rel((eval(tau_y, tau_u + hu, state.mu) -
                                   eval(tau_y, tau_u - hu, state.mu)) /
                                      (2.0 * hu),
                                  grads.tau_u));
      Eigen::VectorXd direction = basis.lift(rng.normal_vector(n - 1)).normalized();
      const double hm = 1e-6 * (1.0 + state.mu.norm());
      worst = std::max(worst, rel((eval(tau_y, tau_u, state.mu + hm * direction) -
                                   eval(tau_y, tau_u, state.mu - hm * direction)) /
                                      (2.0 * hm),
                                  grads.mu.dot(direction)));
    }
  }
  const bool ok = states == 20 && worst <= 1e-4;
  return {ok, "20 random states, worst relative gradient gap " + fmt(worst) + " (tol 1e-4)"};
}

std::pair<bool, std::string> jensen_bound() {
  VerifyConfig config;
  config.n = 36;
  config.trials = 25;
  config.seed = 1;
  const VerifyReport report = run_verification(config);
  double jensen_worst = 0.0;
  bool jensen_pass = false;
  for (const VerifyCheck& check : report.checks) {
    if (check.name == "jensen-bound") {
      jensen_worst = check.worst;
      jensen_pass = check.passed;
    }
  }
  return {jensen_pass, "verify suite (25 trials, n=36): worst signed excess " +
                           fmt(jensen_worst) + " (tol 1e-8)"};
}

std::pair<bool, std::string> simulation_trend() {
  Timer timer;
  SimConfig base;
  base.seed = 42;
  base.n_sim = 200;
  base.threads = 4;
  base.n0 = 7;
  const SimResult small = run_study(base);
  base.n0 = 15;
  const SimResult large = run_study(base);
  const MethodAggregate& a = small.aggregates.at(0);
  const MethodAggregate& b = large.aggregates.at(0);
  const double elapsed = timer.seconds();
  const bool ok = b.rmse_sigma_u_sq < a.rmse_sigma_u_sq &&
                  b.rmse_sigma_eps_sq < a.rmse_sigma_eps_sq && elapsed < 600.0;
  return {ok, "seed 42, 200 replications: rmse(sigma_u^2) " + fmt(a.rmse_sigma_u_sq) + " -> " +
                  fmt(b.rmse_sigma_u_sq) + ", rmse(sigma_eps^2) " + fmt(a.rmse_sigma_eps_sq) +
                  " -> " + fmt(b.rmse_sigma_eps_sq) + " from n0=7 to n0=15, " + fmt(elapsed) +
                  " s (< 600 s)"};
}

std::pair<bool, std::string> posterior_identity() {
  double worst = 0.0;
  for (int n0 : {5, 6, 7}) {
    const SimDraw draw = instance(n0, 700 + n0);
    const SumToZeroBasis basis = make_basis(draw.model.n());
    CounterRng rng(31337, n0);
    for (int probe = 0; probe < 3; ++probe) {
      const double tau_y = std::exp(rng.normal());
      const double tau_u = std::exp(rng.normal());
      const ConstrainedPosterior exact =
          exact_posterior(tau_y, tau_u, draw.model, draw.icar);
      const VariationalState block =
          variational_block_update(draw.model, draw.icar, basis, tau_y, tau_u);
      worst = std::max(worst, (block.mu - exact.mean).norm());
      worst = std::max(worst, (block.sigma.sigma_dense() - exact.covariance).norm());
    }
  }
  const bool ok = worst <= 1e-8;
  return {ok, "one block update vs exact posterior on n in {25,36,49}, worst norm gap " +
                  fmt(worst) + " (tol 1e-8)"};
}

std::pair<bool, std::string> ingestion_correctness() {
  // smooth signal plus an independent per-cell level so the aggregated
  // response keeps a nugget
  const int grid = 8;
  CounterRng rng(2718, 0);
  CounterRng level_rng(2718, 1);
  std::vector<double> cell_level(grid * grid);
  for (double& level : cell_level) level = 1.5 * level_rng.normal();
  CellTable table;
  table.rows.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    CellRow row;
    row.x = grid * rng.uniform();
    row.y = grid * rng.uniform();
    const int gx = std::min(static_cast<int>(row.x), grid - 1);
    const int gy = std::min(static_cast<int>(row.y), grid - 1);
    const double intensity = 6.0 + 2.5 * std::sin(0.7 * row.x) + 2.0 * std::cos(0.5 * row.y) +
                             cell_level[static_cast<size_t>(gy * grid + gx)];
    row.count = std::max(0.0, std::floor(intensity + 3.0 * rng.uniform()));
    row.library_size = 60.0 + 80.0 * rng.uniform();
    table.rows.push_back(row);
  }
  const GridDataset dataset = bin_cells(table, GridSpec::per_side(grid, grid));

  double x_min = table.rows[0].x, y_min = table.rows[0].y;
  for (const CellRow& row : table.rows) {
    x_min = std::min(x_min, row.x);
    y_min = std::min(y_min, row.y);
  }
  std::map<std::pair<int, int>, std::array<long double, 3>> oracle;
  for (const CellRow& row : table.rows) {
    const int gx = std::min(static_cast<int>((row.x - x_min) / dataset.cell_width_x),
                            dataset.grid_nx - 1);
    const int gy = std::min(static_cast<int>((row.y - y_min) / dataset.cell_width_y),
                            dataset.grid_ny - 1);
    auto& acc = oracle[{gx, gy}];
    acc[0] += static_cast<long double>(row.count);
    acc[1] += static_cast<long double>(row.library_size);
    acc[2] += 1.0L;
  }
  if (oracle.size() != dataset.cells.size())
    return {false, "group-by oracle disagrees on the retained cell count"};
  double worst = 0.0;
  long long total = 0;
  for (const GridCell& cell : dataset.cells) {
    const auto& acc = oracle.at({cell.gx, cell.gy});
    worst = std::max(worst, std::abs(cell.y_bar - static_cast<double>(acc[0] / acc[2])));
    worst = std::max(worst, std::abs(cell.l_bar - static_cast<double>(acc[1] / acc[2])));
    if (cell.cell_count != static_cast<int>(acc[2]))
      return {false, "cell count mismatch against the group-by oracle"};
    total += cell.cell_count;
  }
  if (total != 10000) return {false, "binned points do not sum to the input rows"};

  const auto [model, graph] = dataset_to_model(dataset);
  const FitReport report = fit(model, build_icar(graph));
  const bool ok = worst <= 1e-12 && report.converged;
  return {ok, "10000-row table on an 8x8 grid, worst mean gap " + fmt(worst) +
                  " (tol 1e-12); end-to-end fit converged=" +
                  std::string(report.converged ? "true" : "false")};
}

// criterion 10 helpers ------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string command = g_cli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return (status >= 0 && WIFEXITED(status)) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string manifest_without_wall_time(const fs::path& path) {
  std::istringstream in(read_file(path));
  std::ostringstream kept;
  std::string line;
  while (std::getline(in, line))
    if (line.find("wall_time") == std::string::npos) kept << line << '\n';
  return kept.str();
}

std::pair<bool, std::string> determinism() {
  if (g_cli.empty()) return {false, "no --cli binary given"};
  const fs::path scratch =
      fs::temp_directory_path() / ("vreml_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(scratch);
  struct Cleanup {
    fs::path path;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(path, ec);
    }
  } cleanup{scratch};

  // identical argv twice into the same directory, snapshotting between runs
  const fs::path sim_dir = scratch / "sim";
  const fs::path snapshot = scratch / "snapshot";
  fs::create_directories(snapshot);
  const std::string sim =
      "simulate --n0 6 --nsim 16 --seed 5 --out " + sim_dir.string();
  if (run_cli(sim + " --threads 1") != 0) return {false, "simulate run failed"};
  for (const char* file : {"raw.csv", "aggregate.csv", "manifest.json"})
    fs::copy_file(sim_dir / file, snapshot / file, fs::copy_options::overwrite_existing);
  if (run_cli(sim + " --threads 1") != 0) return {false, "simulate rerun failed"};

  for (const std::string& file : {std::string("raw.csv"), std::string("aggregate.csv")}) {
    const std::string reference = read_file(snapshot / file);
    if (reference.empty()) return {false, file + " missing"};
    if (reference != read_file(sim_dir / file))
      return {false, file + " differs between identical runs"};
  }
  if (manifest_without_wall_time(snapshot / "manifest.json") !=
      manifest_without_wall_time(sim_dir / "manifest.json"))
    return {false, "manifest differs beyond wall time"};

  // thread count must not change the data either
  if (run_cli("simulate --n0 6 --nsim 16 --seed 5 --threads 4 --out " +
              (scratch / "threaded").string()) != 0)
    return {false, "threaded simulate run failed"};
  for (const std::string& file : {std::string("raw.csv"), std::string("aggregate.csv")})
    if (read_file(snapshot / file) != read_file(scratch / "threaded" / file))
      return {false, file + " differs under --threads 4"};

  const fs::path base = g_fixtures / "lattice5";
  const fs::path fit_dir = scratch / "fit";
  const std::string fit_args = "fit --adjacency " + (base / "adjacency.mtx").string() +
                               " --design " + (base / "design.csv").string() + " --response " +
                               (base / "response.csv").string() + " --out " + fit_dir.string();
  if (run_cli(fit_args) != 0) return {false, "fit run failed"};
  for (const char* file : {"fit.json", "effects.csv", "manifest.json"})
    fs::copy_file(fit_dir / file, snapshot / file, fs::copy_options::overwrite_existing);
  if (run_cli(fit_args) != 0) return {false, "fit rerun failed"};
  for (const std::string& file : {std::string("fit.json"), std::string("effects.csv")}) {
    const std::string reference = read_file(snapshot / file);
    if (reference.empty()) return {false, file + " missing"};
    if (reference != read_file(fit_dir / file))
      return {false, file + " differs between identical runs"};
  }
  if (manifest_without_wall_time(snapshot / "manifest.json") !=
      manifest_without_wall_time(fit_dir / "manifest.json"))
    return {false, "fit manifest differs beyond wall time"};

  return {true, "simulate (serial x2, threaded x1) and fit (x2) byte-identical; manifests "
                "differ only in wall time"};
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string flag = argv[i];
    if (flag == "--cli") g_cli = argv[i + 1];
    if (flag == "--fixtures") g_fixtures = argv[i + 1];
  }

  run_criterion(1, "exactness", exactness_at_posterior);
  run_criterion(2, "estimator equivalence", estimator_equivalence);

  std::vector<PoolFit> pool;
  try {
    pool = fit_pool();
  } catch (const std::exception& e) {
    std::cout << "[FAIL] criteria 3-4 pool: " << e.what() << "\n";
    g_failures += 2;
  }
  if (!pool.empty()) {
    run_criterion(3, "monotonicity", [&pool] { return monotonicity(pool); });
    run_criterion(4, "stationarity", [&pool] { return stationarity(pool); });
  }

  run_criterion(5, "gradient correctness", gradient_correctness);
  run_criterion(6, "jensen bound", jensen_bound);
  run_criterion(7, "simulation trend", simulation_trend);
  run_criterion(8, "oracle posterior identity", posterior_identity);
  run_criterion(9, "ingestion correctness", ingestion_correctness);
  run_criterion(10, "determinism", determinism);

  if (g_failures == 0) {
    std::cout << "all acceptance criteria passed\n";
    return 0;
  }
  std::cout << g_failures << " acceptance criteria failed\n";
  return 1;
}
