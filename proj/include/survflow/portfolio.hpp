#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

#include "survflow/data.hpp"
#include "survflow/flow.hpp"

namespace survflow::portfolio {

/// Common sampling interface: one matrix of event-time draws per call,
/// scenarios in rows, entities in columns. Deterministic given the seed.
class EventTimeSampler {
 public:
  virtual ~EventTimeSampler() = default;
  virtual int entity_count() const = 0;
  virtual Eigen::MatrixXd sample_times(int n_scenarios, std::uint64_t seed) const = 0;
};

/// Flow-backed sampler over fixed (standardized) entity covariates.
class FlowSampler : public EventTimeSampler {
 public:
  FlowSampler(const dyn::FlowModel& model, Eigen::MatrixXd covariates,
              odeint::SolverConfig cfg = odeint::SolverConfig::training());
  int entity_count() const override;
  Eigen::MatrixXd sample_times(int n_scenarios, std::uint64_t seed) const override;

 private:
  const dyn::FlowModel& model_;
  Eigen::MatrixXd covariates_;
  odeint::SolverConfig cfg_;
};

/// Per-class censored-Weibull baseline.
struct WeibullBaseline {
  Eigen::VectorXd shapes;   // per class
  Eigen::VectorXd scales;   // per class
  std::vector<int> classes;  // class index per entity
};

class WeibullSampler : public EventTimeSampler {
 public:
  explicit WeibullSampler(WeibullBaseline baseline);
  int entity_count() const override;
  Eigen::MatrixXd sample_times(int n_scenarios, std::uint64_t seed) const override;
  const WeibullBaseline& baseline() const { return baseline_; }

 private:
  WeibullBaseline baseline_;
};

/// Ground-truth sampler: the synthetic generator's conditional event law.
class TrueLawSampler : public EventTimeSampler {
 public:
  TrueLawSampler(data::SyntheticSpec spec, Eigen::MatrixXd covariates);
  int entity_count() const override;
  Eigen::MatrixXd sample_times(int n_scenarios, std::uint64_t seed) const override;

 private:
  data::SyntheticSpec spec_;
  Eigen::MatrixXd covariates_;
};

/// Scenario matrix of default indicators: entry (j, i) = 1{T_ij <= horizon_i}.
Eigen::MatrixXd simulate_default_scenarios(const EventTimeSampler& sampler,
                                           const Eigen::VectorXd& horizons,
                                           int n_scenarios, std::uint64_t seed);

/// Fair prices p_i = E[1{T_i <= d_i}], estimated by Monte Carlo and clamped
/// to [1e-6, 1 - 1e-6].
Eigen::VectorXd fair_prices(const EventTimeSampler& sampler,
                            const Eigen::VectorXd& horizons, int n_scenarios,
                            std::uint64_t seed);

/// L(w) = sum_i w_i (D_i - p_i) for one scenario row.
double portfolio_loss(const Eigen::VectorXd& weights, const Eigen::VectorXd& defaults,
                      const Eigen::VectorXd& prices);

/// Empirical CVaR at level alpha: mean of the worst (1 - alpha) tail with the
/// fractional-tail correction, equal to min_beta beta + mean[(L-beta)^+]/(1-alpha).
double expected_shortfall(const Eigen::VectorXd& losses, double alpha);

struct PortfolioInstance {
  Eigen::MatrixXd defaults;  // n_scenarios x n_entities, binary
  Eigen::VectorXd prices;    // in (0, 1)
  Eigen::VectorXd horizons;
  double budget = 0.0;       // w . p = budget
  double alpha = 0.95;
};

void validate(const PortfolioInstance& instance);

struct CvarOptions {
  int max_iters = 20000;
  double tolerance = 1e-10;  // relative plateau width for convergence
  int plateau_window = 500;
};

struct CvarSolution {
  Eigen::VectorXd weights;
  double var_beta = 0.0;    // the optimal dual threshold (empirical VaR)
  double objective = 0.0;   // expected shortfall at the returned weights
  int iterations = 0;
};

/// Minimizes the scenario expected shortfall over {0 <= w <= 1, w.p = budget}
/// by projected subgradient descent with iterate averaging on the
/// beta-eliminated piecewise-linear objective.
CvarSolution optimize_cvar(const PortfolioInstance& instance,
                           const CvarOptions& opts = {});

/// Censored Weibull maximum likelihood for one group of (y, delta) pairs.
std::pair<double, double> fit_weibull_censored(const Eigen::VectorXd& times,
                                               std::span<const int> events);

/// Per-class baseline over a dataset with class labels.
WeibullBaseline fit_weibull_baseline(const data::Dataset& ds,
                                     std::span<const int> record_classes,
                                     std::span<const int> entity_classes);

struct ExperimentSpec {
  double alpha = 0.95;
  double budget_fraction = 0.25;    // budget = fraction * sum(prices)
  double horizon = 1.0;
  int pricing_scenarios = 100000;
  int optimization_scenarios = 10000;
  int realization_scenarios = 100000;
  std::uint64_t seed = 0;
};

struct ExperimentReport {
  Eigen::VectorXd prices;
  double budget = 0.0;
  double horizon = 0.0;
  Eigen::VectorXd weights_flow;
  Eigen::VectorXd weights_weibull;
  double objective_flow = 0.0;     // in-sample optimized ES
  double objective_weibull = 0.0;
  double realized_es_flow = 0.0;   // ES under ground-truth scenarios
  double realized_es_weibull = 0.0;
  Eigen::VectorXd realized_losses_flow;
  Eigen::VectorXd realized_losses_weibull;
};

/// Prices the book with the Weibull candidate, optimizes the CVaR program once
/// per candidate model, then evaluates both portfolios under fresh
/// ground-truth scenarios.
ExperimentReport run_experiment(const EventTimeSampler& flow_candidate,
                                const EventTimeSampler& weibull_candidate,
                                const EventTimeSampler& truth,
                                const ExperimentSpec& spec);

}  // namespace survflow::portfolio
