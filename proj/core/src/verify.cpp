#include "vreml/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "vreml/errors.hpp"
#include "vreml/oracle.hpp"
#include "vreml/rng.hpp"
#include "vreml/simulate.hpp"
#include "vreml/vreml.hpp"

namespace vreml {

namespace {

struct Worst {
  double value = 0.0;
  void feed(double v) { value = std::max(value, v); }
};

double rel_gap(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

SimConfig trial_config(const VerifyConfig& config, int n0, int trial) {
  // Instance randomness comes from dedicated streams so it never collides
  // with the data streams used inside generate().
  CounterRng rng(config.seed, 1'000'000u + static_cast<std::uint64_t>(trial));
  SimConfig sim;
  sim.n0 = n0;
  sim.n_sim = 1;
  sim.beta = Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal());
  sim.sigma_eps_sq = 0.7 * std::exp(0.4 * rng.normal());
  sim.sigma_u_sq = 1.3 * std::exp(0.4 * rng.normal());
  sim.seed = config.seed * 7919u + static_cast<std::uint64_t>(trial);
  return sim;
}

}  // namespace

void VerifyConfig::validate() const {
  if (trials < 1) raise(Errc::invalid_config, "trials must be at least 1");
  const int n0 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (n < 9 || n0 * n0 != n)
    raise(Errc::invalid_config, "n must be a perfect square >= 9 (lattice instances)");
}

VerifyReport run_verification(const VerifyConfig& config) {
  config.validate();
  const int n0 = static_cast<int>(std::lround(std::sqrt(static_cast<double>(config.n))));

  Worst monotonicity, residuals, exactness, jensen;
  Worst grad_tau_y, grad_tau_u, grad_mu, idempotence;

  for (int trial = 0; trial < config.trials; ++trial) {
    const SimConfig sim = trial_config(config, n0, trial);
    const SimDraw draw = generate(sim, 0);
    const ModelData& model = draw.model;
    const IcarStructure& icar = draw.icar;
    const int n = model.n();
    const int p = model.p();

    FitConfig fit_config;
    fit_config.tol = 1e-12;
    fit_config.max_sweeps = 5000;
    fit_config.sabotage_tau_order = config.sabotage_tau_order;
    const FitReport report = fit(model, icar, fit_config);

    // ELBO monotone across sweeps (scaled slack).
    const auto& trace = report.state.elbo_trace;
    for (size_t t = 1; t < trace.size(); ++t)
      monotonicity.feed((trace[t - 1] - trace[t]) / (1.0 + std::abs(trace[t - 1])));

    // Stationarity at convergence.
    residuals.feed(report.residuals.max_abs());

    // Random precisions around the method-of-moments scale.
    CounterRng rng(config.seed, 2'000'000u + static_cast<std::uint64_t>(trial));
    const double tau_scale = (n - p) / projected_quadratic(model, model.y());
    const SumToZeroBasis basis = make_basis(n);

    for (int probe = 0; probe < 3; ++probe) {
      const double tau_y = tau_scale * std::exp(rng.normal());
      const double tau_u = tau_scale * std::exp(rng.normal());
      const double reference = restricted_loglik(tau_y, tau_u, model, icar);

      // Exactness: the bound is attained at the posterior.
      VariationalState posterior = variational_block_update(model, icar, basis, tau_y, tau_u);
      exactness.feed(rel_gap(elbo(posterior, model, icar), reference));

      // Jensen: any state stays below the restricted log-likelihood.
      VariationalState state{
          basis.lift(rng.normal_vector(n - 1)),
          precision_operator(model, icar, basis, tau_scale * std::exp(rng.normal()),
                             tau_scale * std::exp(rng.normal())),
          tau_y, tau_u, {}};
      const double bound_gap =
          (elbo(state, model, icar) - reference) / (1.0 + std::abs(reference));
      jensen.feed(bound_gap);

      // Finite-difference gradient checks at the random state.
      const ElboGradients grads = elbo_gradients(state, model, icar);
      auto elbo_at = [&](double ty, double tu, const Eigen::VectorXd& mu) {
        VariationalState probe_state{mu, state.sigma, ty, tu, {}};
        return elbo(probe_state, model, icar);
      };
      {
        const double h = 1e-6 * tau_y;
        const double fd =
            (elbo_at(tau_y + h, tau_u, state.mu) - elbo_at(tau_y - h, tau_u, state.mu)) /
            (2.0 * h);
        grad_tau_y.feed(rel_gap(fd, grads.tau_y));
      }
      {
        const double h = 1e-6 * tau_u;
        const double fd =
            (elbo_at(tau_y, tau_u + h, state.mu) - elbo_at(tau_y, tau_u - h, state.mu)) /
            (2.0 * h);
        grad_tau_u.feed(rel_gap(fd, grads.tau_u));
      }
      {
        Eigen::VectorXd direction = basis.lift(rng.normal_vector(n - 1));
        direction.normalize();
        const double h = 1e-6 * (1.0 + state.mu.norm());
        const double fd = (elbo_at(tau_y, tau_u, state.mu + h * direction) -
                           elbo_at(tau_y, tau_u, state.mu - h * direction)) /
                          (2.0 * h);
        grad_mu.feed(rel_gap(fd, grads.mu.dot(direction)));
      }

      // Re-running the block updates from their own output is a no-op.
      VariationalState repeated =
          variational_block_update(model, icar, basis, tau_y, tau_u);
      idempotence.feed((repeated.mu - posterior.mu).norm() / (1.0 + posterior.mu.norm()));
      const auto taus_once = tau_fixed_point(posterior, model, icar);
      VariationalState moved = posterior;
      moved.tau_y = taus_once.first;
      moved.tau_u = taus_once.second;
      const auto taus_twice = tau_fixed_point(moved, model, icar);
      idempotence.feed(rel_gap(taus_once.first, taus_twice.first));
      idempotence.feed(rel_gap(taus_once.second, taus_twice.second));
    }
  }

  VerifyReport report;
  auto add = [&report](std::string name, double tolerance, double worst) {
    report.checks.push_back({std::move(name), tolerance, worst, worst <= tolerance});
  };
  add("elbo-monotone", 1e-9, monotonicity.value);
  add("fixed-point-residuals", 1e-6, residuals.value);
  add("elbo-exactness-at-posterior", 1e-8, exactness.value);
  add("jensen-bound", 1e-8, jensen.value);
  add("grad-tau-y-vs-fd", 1e-4, grad_tau_y.value);
  add("grad-tau-u-vs-fd", 1e-4, grad_tau_u.value);
  add("grad-mu-vs-fd", 1e-4, grad_mu.value);
  add("block-update-idempotence", 1e-12, idempotence.value);
  return report;
}

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(),
                     [](const VerifyCheck& check) { return check.passed; });
}

void print_verification(std::ostream& out, const VerifyReport& report) {
  out << std::left << std::setw(30) << "property" << std::setw(12) << "tolerance"
      << std::setw(16) << "worst" << "status\n";
  for (const VerifyCheck& check : report.checks) {
    out << std::left << std::setw(30) << check.name << std::setw(12) << check.tolerance
        << std::setw(16) << check.worst << (check.passed ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace vreml
