#include "survflow/portfolio.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "survflow/errors.hpp"

namespace survflow::portfolio {

using Eigen::MatrixXd;
using Eigen::VectorXd;

FlowSampler::FlowSampler(const dyn::FlowModel& model, MatrixXd covariates,
                         odeint::SolverConfig cfg)
    : model_(model), covariates_(std::move(covariates)), cfg_(cfg) {}

int FlowSampler::entity_count() const { return static_cast<int>(covariates_.cols()); }

MatrixXd FlowSampler::sample_times(int n_scenarios, std::uint64_t seed) const {
  const int n = entity_count();
  MatrixXd times(n_scenarios, n);
  for (int i = 0; i < n; ++i) {
    rng::Engine rng(rng::derive(seed, 0xF10 + static_cast<std::uint64_t>(i)));
    times.col(i) =
        flow::sample_batch(model_, covariates_.col(i), n_scenarios, rng, cfg_);
  }
  return times;
}

WeibullSampler::WeibullSampler(WeibullBaseline baseline) : baseline_(std::move(baseline)) {}

int WeibullSampler::entity_count() const {
  return static_cast<int>(baseline_.classes.size());
}

MatrixXd WeibullSampler::sample_times(int n_scenarios, std::uint64_t seed) const {
  const int n = entity_count();
  MatrixXd times(n_scenarios, n);
  for (int i = 0; i < n; ++i) {
    rng::Engine rng(rng::derive(seed, 0xE18 + static_cast<std::uint64_t>(i)));
    const int k = baseline_.classes[static_cast<std::size_t>(i)];
    for (int j = 0; j < n_scenarios; ++j) {
      times(j, i) = data::weibull_sample(baseline_.shapes[k], baseline_.scales[k], rng);
    }
  }
  return times;
}

TrueLawSampler::TrueLawSampler(data::SyntheticSpec spec, MatrixXd covariates)
    : spec_(std::move(spec)), covariates_(std::move(covariates)) {}

int TrueLawSampler::entity_count() const { return static_cast<int>(covariates_.cols()); }

MatrixXd TrueLawSampler::sample_times(int n_scenarios, std::uint64_t seed) const {
  const int n = entity_count();
  MatrixXd times(n_scenarios, n);
  for (int i = 0; i < n; ++i) {
    rng::Engine rng(rng::derive(seed, 0x717 + static_cast<std::uint64_t>(i)));
    for (int j = 0; j < n_scenarios; ++j) {
      times(j, i) = data::draw_event_censor(spec_, covariates_.col(i), rng).first;
    }
  }
  return times;
}

MatrixXd simulate_default_scenarios(const EventTimeSampler& sampler,
                                    const VectorXd& horizons, int n_scenarios,
                                    std::uint64_t seed) {
  if (n_scenarios < 1) throw DomainError("simulate_default_scenarios: n_scenarios < 1");
  if (horizons.size() != sampler.entity_count()) {
    throw DimensionError("simulate_default_scenarios: horizon per entity required");
  }
  MatrixXd times = sampler.sample_times(n_scenarios, seed);
  MatrixXd defaults(times.rows(), times.cols());
  for (Eigen::Index i = 0; i < times.cols(); ++i) {
    defaults.col(i) = (times.col(i).array() <= horizons[i]).cast<double>();
  }
  return defaults;
}

VectorXd fair_prices(const EventTimeSampler& sampler, const VectorXd& horizons,
                     int n_scenarios, std::uint64_t seed) {
  const MatrixXd defaults =
      simulate_default_scenarios(sampler, horizons, n_scenarios, seed);
  VectorXd p = defaults.colwise().mean().transpose();
  return p.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
}

double portfolio_loss(const VectorXd& weights, const VectorXd& defaults,
                      const VectorXd& prices) {
  if (weights.size() != defaults.size() || weights.size() != prices.size()) {
    throw DimensionError("portfolio_loss: dimension mismatch");
  }
  return weights.dot(defaults - prices);
}

double expected_shortfall(const VectorXd& losses, double alpha) {
  const Eigen::Index n = losses.size();
  if (n == 0) throw DomainError("expected_shortfall: empty losses");
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw DomainError("expected_shortfall: alpha must lie in (0, 1)");
  }
  const double k = (1.0 - alpha) * static_cast<double>(n);
  std::vector<double> sorted(losses.data(), losses.data() + n);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto m = static_cast<Eigen::Index>(std::floor(k));
  const double theta = k - static_cast<double>(m);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < m; ++j) acc += sorted[static_cast<std::size_t>(j)];
  if (m < n && theta > 0.0) acc += theta * sorted[static_cast<std::size_t>(m)];
  // k < 1 scenario in the tail: the estimator degenerates to the maximum.
  if (m == 0 && theta == 0.0) return sorted[0];
  return acc / std::min(k, static_cast<double>(n));
}

void validate(const PortfolioInstance& instance) {
  const Eigen::Index n = instance.prices.size();
  if (instance.defaults.cols() != n || instance.horizons.size() != n) {
    throw DimensionError("PortfolioInstance: dimension mismatch");
  }
  if (instance.defaults.rows() < 1) throw DomainError("PortfolioInstance: no scenarios");
  if (!(instance.alpha > 0.0 && instance.alpha < 1.0)) {
    throw DomainError("PortfolioInstance: alpha outside (0, 1)");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(instance.prices[i] > 0.0 && instance.prices[i] < 1.0)) {
      throw DomainError("PortfolioInstance: prices must lie in (0, 1)");
    }
  }
  if (((instance.defaults.array() != 0.0) && (instance.defaults.array() != 1.0)).any()) {
    throw DomainError("PortfolioInstance: defaults must be binary");
  }
  if (instance.budget < -1e-12 || instance.budget > instance.prices.sum() + 1e-12) {
    throw InfeasibleError("PortfolioInstance: budget outside [0, sum(prices)]");
  }
}

namespace {

// Euclidean projection onto {0 <= w <= 1, p.w = budget}: w = clip(v - mu p)
// with mu chosen by bisection on the monotone function p.clip(v - mu p).
VectorXd project_feasible(const VectorXd& v, const VectorXd& p, double budget) {
  auto value = [&](double mu) {
    return p.dot((v - mu * p).cwiseMax(0.0).cwiseMin(1.0));
  };
  double lo = -1.0, hi = 1.0;
  // Expand the bracket until value(lo) >= budget >= value(hi).
  for (int it = 0; it < 200 && value(lo) < budget; ++it) lo *= 2.0;
  for (int it = 0; it < 200 && value(hi) > budget; ++it) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (value(mid) > budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double mu = 0.5 * (lo + hi);
  return (v - mu * p).cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

CvarSolution optimize_cvar(const PortfolioInstance& instance, const CvarOptions& opts) {
  validate(instance);
  const Eigen::Index n = instance.prices.size();
  const Eigen::Index N = instance.defaults.rows();
  const double k = (1.0 - instance.alpha) * static_cast<double>(N);

  // Residual matrix D - p per scenario row; losses are R w.
  MatrixXd R = instance.defaults;
  R.rowwise() -= instance.prices.transpose();

  VectorXd w = project_feasible(
      VectorXd::Constant(n, instance.budget / std::max(instance.prices.sum(), 1e-300)),
      instance.prices, instance.budget);

  VectorXd losses(N), grad(n);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(N));

  auto objective_and_subgrad = [&](const VectorXd& weights, VectorXd* g) {
    losses.noalias() = R * weights;
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    const auto m = static_cast<Eigen::Index>(std::floor(k));
    const double theta = k - static_cast<double>(m);
    const Eigen::Index take = std::min<Eigen::Index>(m + (theta > 0.0 ? 1 : 0), N);
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(),
                      [&](Eigen::Index a, Eigen::Index b) { return losses[a] > losses[b]; });
    double acc = 0.0;
    if (g) g->setZero();
    for (Eigen::Index j = 0; j < std::min(m, N); ++j) {
      acc += losses[idx[static_cast<std::size_t>(j)]];
      if (g) *g += R.row(idx[static_cast<std::size_t>(j)]).transpose();
    }
    if (m < N && theta > 0.0) {
      acc += theta * losses[idx[static_cast<std::size_t>(m)]];
      if (g) *g += theta * R.row(idx[static_cast<std::size_t>(m)]).transpose();
    }
    const double denom = (m == 0 && theta == 0.0) ? 1.0 : std::min(k, static_cast<double>(N));
    if (m == 0 && theta == 0.0) {
      acc = losses[idx[0]];
      if (g) *g = R.row(idx[0]).transpose();
    }
    if (g) *g /= denom;
    return acc / denom;
  };

  double best_obj = objective_and_subgrad(w, nullptr);
  VectorXd best_w = w;
  VectorXd avg_w = w;
  const double radius = std::sqrt(static_cast<double>(n));
  double last_improvement_obj = best_obj;
  int iters = 0;
  int since_check = 0;
  bool plateaued = false;

  for (int t = 1; t <= opts.max_iters; ++t) {
    iters = t;
    const double obj = objective_and_subgrad(w, &grad);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
    }
    const double gnorm = grad.norm();
    if (gnorm < 1e-15) break;  // flat objective
    const double step = radius / (gnorm * std::sqrt(static_cast<double>(t)));
    w = project_feasible(w - step * grad, instance.prices, instance.budget);
    avg_w += (w - avg_w) / (t + 1.0);

    if (++since_check >= opts.plateau_window) {
      since_check = 0;
      const VectorXd avg_proj =
          project_feasible(avg_w, instance.prices, instance.budget);
      const double avg_obj = objective_and_subgrad(avg_proj, nullptr);
      if (avg_obj < best_obj) {
        best_obj = avg_obj;
        best_w = avg_proj;
      }
      const double scale = std::max({std::abs(best_obj), std::abs(last_improvement_obj), 1e-8});
      if (last_improvement_obj - best_obj <= opts.tolerance * scale) {
        plateaued = true;
        break;
      }
      last_improvement_obj = best_obj;
    }
  }

  if (!plateaued && iters >= opts.max_iters) {
    const VectorXd avg_proj = project_feasible(avg_w, instance.prices, instance.budget);
    const double avg_obj = objective_and_subgrad(avg_proj, nullptr);
    if (avg_obj < best_obj) {
      best_obj = avg_obj;
      best_w = avg_proj;
    }
    const double scale = std::max(std::abs(best_obj), 1e-8);
    if (last_improvement_obj - best_obj > 100.0 * opts.tolerance * scale) {
      throw NotConvergedError("optimize_cvar: iteration cap hit while still improving");
    }
  }

  CvarSolution sol;
  sol.weights = best_w;
  losses.noalias() = R * best_w;
  sol.objective = expected_shortfall(losses, instance.alpha);
  // Empirical VaR: the threshold attaining the Rockafellar-Uryasev minimum.
  {
    std::vector<double> sorted(losses.data(), losses.data() + losses.size());
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const auto m = static_cast<Eigen::Index>(std::floor(k));
    sol.var_beta = sorted[static_cast<std::size_t>(std::min<Eigen::Index>(m, N - 1))];
  }
  sol.iterations = iters;
  return sol;
}

std::pair<double, double> fit_weibull_censored(const VectorXd& times,
                                               std::span<const int> events) {
  const Eigen::Index n = times.size();
  if (n == 0 || static_cast<Eigen::Index>(events.size()) != n) {
    throw DimensionError("fit_weibull_censored: bad inputs");
  }
  double n_events = 0.0, log_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(times[i] > 0.0)) throw DomainError("fit_weibull_censored: nonpositive time");
    if (events[static_cast<std::size_t>(i)]) {
      n_events += 1.0;
      log_sum += std::log(times[i]);
    }
  }
  if (n_events == 0.0) {
    throw DegenerateError("fit_weibull_censored: class has no observed events");
  }

  // Profile likelihood in the shape a (scale eliminated in closed form):
  //   d l / d a = n_d / a + sum_d log y - n_d * S1(a) / S0(a)
  // with S0 = sum y^a, S1 = sum y^a log y, S2 = sum y^a (log y)^2.
  auto moments = [&](double a) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double ly = std::log(times[i]);
      const double p = std::pow(times[i], a);
      s0 += p;
      s1 += p * ly;
      s2 += p * ly * ly;
    }
    return std::array<double, 3>{s0, s1, s2};
  };
  auto score = [&](double a) {
    const auto [s0, s1, s2] = moments(a);
    const double g = n_events / a + log_sum - n_events * s1 / s0;
    const double dg = -n_events / (a * a) - n_events * (s2 * s0 - s1 * s1) / (s0 * s0);
    return std::pair<double, double>{g, dg};
  };

  // Safeguarded Newton: keep a bracket with score(lo) > 0 > score(hi).
  double lo = 1e-3, hi = 1e3;
  for (int it = 0; it < 60 && score(lo).first <= 0.0; ++it) lo *= 0.5;
  for (int it = 0; it < 60 && score(hi).first >= 0.0; ++it) hi *= 2.0;
  double a = std::clamp(1.0, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const auto [g, dg] = score(a);
    if (std::abs(g) < 1e-8) break;
    if (g > 0.0) {
      lo = a;
    } else {
      hi = a;
    }
    double next = a - g / dg;
    if (!(next > lo && next < hi) || !std::isfinite(next)) next = 0.5 * (lo + hi);
    a = next;
  }
  const auto [s0, s1, s2] = moments(a);
  (void)s1;
  (void)s2;
  const double scale = std::pow(s0 / n_events, 1.0 / a);
  return {a, scale};
}

WeibullBaseline fit_weibull_baseline(const data::Dataset& ds,
                                     std::span<const int> record_classes,
                                     std::span<const int> entity_classes) {
  if (static_cast<Eigen::Index>(record_classes.size()) != ds.size()) {
    throw DimensionError("fit_weibull_baseline: class label per record required");
  }
  int n_classes = 0;
  for (int k : record_classes) n_classes = std::max(n_classes, k + 1);
  WeibullBaseline baseline;
  baseline.shapes.resize(n_classes);
  baseline.scales.resize(n_classes);
  for (int k = 0; k < n_classes; ++k) {
    std::vector<double> times;
    std::vector<int> events;
    for (Eigen::Index i = 0; i < ds.size(); ++i) {
      if (record_classes[static_cast<std::size_t>(i)] == k) {
        times.push_back(ds.times[i]);
        events.push_back(ds.events[static_cast<std::size_t>(i)]);
      }
    }
    if (times.empty()) {
      throw DegenerateError("fit_weibull_baseline: empty class " + std::to_string(k));
    }
    const auto [shape, scale] = fit_weibull_censored(
        Eigen::Map<const VectorXd>(times.data(), static_cast<Eigen::Index>(times.size())),
        events);
    baseline.shapes[k] = shape;
    baseline.scales[k] = scale;
  }
  baseline.classes.assign(entity_classes.begin(), entity_classes.end());
  return baseline;
}

ExperimentReport run_experiment(const EventTimeSampler& flow_candidate,
                                const EventTimeSampler& weibull_candidate,
                                const EventTimeSampler& truth,
                                const ExperimentSpec& spec) {
  const int n = flow_candidate.entity_count();
  if (weibull_candidate.entity_count() != n || truth.entity_count() != n) {
    throw DimensionError("run_experiment: entity count mismatch");
  }
  ExperimentReport report;
  report.horizon = spec.horizon;
  const VectorXd horizons = VectorXd::Constant(n, spec.horizon);

  // Prices come from the reference (Weibull) model.
  report.prices = fair_prices(weibull_candidate, horizons, spec.pricing_scenarios,
                              rng::derive(spec.seed, 100));
  report.budget = spec.budget_fraction * report.prices.sum();

  auto optimize_with = [&](const EventTimeSampler& sampler, std::uint64_t seed_tag) {
    PortfolioInstance instance;
    instance.defaults = simulate_default_scenarios(
        sampler, horizons, spec.optimization_scenarios, rng::derive(spec.seed, seed_tag));
    instance.prices = report.prices;
    instance.horizons = horizons;
    instance.budget = report.budget;
    instance.alpha = spec.alpha;
    return optimize_cvar(instance);
  };
  const CvarSolution flow_sol = optimize_with(flow_candidate, 200);
  const CvarSolution weib_sol = optimize_with(weibull_candidate, 201);
  report.weights_flow = flow_sol.weights;
  report.weights_weibull = weib_sol.weights;
  report.objective_flow = flow_sol.objective;
  report.objective_weibull = weib_sol.objective;

  // Realized performance under the true law.
  const MatrixXd truth_defaults = simulate_default_scenarios(
      truth, horizons, spec.realization_scenarios, rng::derive(spec.seed, 300));
  MatrixXd R = truth_defaults;
  R.rowwise() -= report.prices.transpose();
  report.realized_losses_flow = R * flow_sol.weights;
  report.realized_losses_weibull = R * weib_sol.weights;
  report.realized_es_flow = expected_shortfall(report.realized_losses_flow, spec.alpha);
  report.realized_es_weibull =
      expected_shortfall(report.realized_losses_weibull, spec.alpha);
  return report;
}

}  // namespace survflow::portfolio
