#include "survflow/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "survflow/errors.hpp"

namespace survflow::pipeline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<train::ObservedRecord> standardized_records(const data::Dataset& ds,
                                                        const data::Standardizer& st) {
  std::vector<train::ObservedRecord> out;
  out.reserve(static_cast<std::size_t>(ds.size()));
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    out.push_back(train::ObservedRecord{ds.times[i], ds.events[static_cast<std::size_t>(i)],
                                        st.apply(Eigen::VectorXd(ds.X.col(i)))});
  }
  return out;
}

double empirical_quantile(VectorXd values, double q) {
  std::sort(values.data(), values.data() + values.size());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

}  // namespace

TrainedModel train_on_dataset(const data::Dataset& ds, const dyn::DynamicsConfig& mcfg,
                              std::uint64_t model_seed, const train::TrainConfig& tcfg,
                              double train_fraction, double val_fraction,
                              const train::EpochCallback& on_epoch,
                              const std::optional<Eigen::VectorXd>& warm_start) {
  dyn::DynamicsConfig cfg = mcfg;
  cfg.covariate_dim = ds.dim();

  rng::Engine split_rng(rng::derive(tcfg.seed, 23));
  const data::SplitResult parts = data::split(ds, train_fraction, val_fraction, split_rng);
  if (parts.validation.size() == 0) {
    throw DomainError("train_on_dataset: validation split is empty");
  }

  TrainedModel out;
  out.standardizer = data::Standardizer::fit(parts.train.X);
  out.feature_names = ds.feature_names;

  dyn::FlowModel initial = dyn::init_model(cfg, model_seed);
  if (warm_start) {
    dyn::unpack(initial, *warm_start);
  }
  out.fit = train::fit(standardized_records(parts.train, out.standardizer),
                       standardized_records(parts.validation, out.standardizer), tcfg,
                       initial, on_epoch);
  out.model = out.fit.model;
  return out;
}

EvalReport evaluate_model(const dyn::FlowModel& model,
                          const data::Standardizer& standardizer,
                          const data::Dataset& test, const io::EvalConfig& eval_cfg) {
  if (test.size() == 0) throw DomainError("evaluate_model: empty test set");
  EvalReport report;
  report.n = test.size();
  report.censoring_rate = test.censoring_rate();

  const std::vector<train::ObservedRecord> records =
      standardized_records(test, standardizer);
  const MatrixXd Xs = standardizer.apply(test.X);

  metrics::RiskScoreConfig rcfg;
  rcfg.samples_per_record = eval_cfg.risk_samples;
  rcfg.kind = eval_cfg.score_kind;
  rcfg.seed = eval_cfg.seed;
  rcfg.threads = eval_cfg.threads;
  const VectorXd scores = metrics::sampled_risk_scores(model, Xs, rcfg);
  report.concordance = metrics::harrell_concordance(records, scores);
  report.nll = train::censored_nll(model, records, eval_cfg.solver);

  // Quantile calibration among uncensored records.
  Eigen::Index n_events = 0;
  for (int e : test.events) n_events += e;
  for (double u : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
    CalibrationPoint pt;
    pt.u = u;
    if (n_events > 0) {
      const double z = special::norm_quantile(u);
      const VectorXd q = flow::push_forward_batch(
          model, VectorXd::Constant(test.size(), z), Xs, eval_cfg.solver);
      Eigen::Index covered = 0;
      for (Eigen::Index i = 0; i < test.size(); ++i) {
        if (test.events[static_cast<std::size_t>(i)] && test.times[i] <= q[i]) ++covered;
      }
      pt.event_coverage = static_cast<double>(covered) / static_cast<double>(n_events);
    }
    report.calibration.push_back(pt);
  }
  return report;
}

PortfolioRun run_portfolio_experiment(const io::PortfolioConfig& pcfg,
                                      const dyn::DynamicsConfig& mcfg,
                                      std::uint64_t model_seed,
                                      const train::TrainConfig& tcfg,
                                      const train::EpochCallback& on_epoch,
                                      const std::optional<TrainedModel>& pretrained) {
  PortfolioRun run;
  run.spec = data::SyntheticSpec::calibrated(10, rng::derive(pcfg.seed, 31));
  const int n_entities = pcfg.classes * pcfg.entities_per_class;
  const data::PortfolioCovariates universe =
      data::generate_portfolio_covariates(pcfg.classes, n_entities,
                                          rng::derive(pcfg.seed, 32));

  // Censored training histories: obs_per_entity observations per entity.
  const data::Dataset history = data::generate_at_covariates(
      run.spec, universe.X, pcfg.obs_per_entity, rng::derive(pcfg.seed, 33));
  run.training_censoring_rate = history.censoring_rate();

  std::vector<int> record_classes(static_cast<std::size_t>(history.size()));
  for (Eigen::Index r = 0; r < history.size(); ++r) {
    record_classes[static_cast<std::size_t>(r)] =
        universe.classes[static_cast<std::size_t>(r / pcfg.obs_per_entity)];
  }

  TrainedModel trained;
  if (pretrained) {
    trained = *pretrained;
  } else {
    trained = train_on_dataset(history, mcfg, model_seed, tcfg, 0.8, 0.2, on_epoch);
  }

  const portfolio::WeibullBaseline baseline =
      portfolio::fit_weibull_baseline(history, record_classes, universe.classes);

  run.horizon = empirical_quantile(history.times, pcfg.horizon_quantile);

  const odeint::SolverConfig sample_cfg = odeint::SolverConfig::training(tcfg.fixed_steps);
  const portfolio::FlowSampler flow_sampler(trained.model,
                                            trained.standardizer.apply(universe.X),
                                            sample_cfg);
  const portfolio::WeibullSampler weibull_sampler(baseline);
  const portfolio::TrueLawSampler truth(run.spec, universe.X);

  portfolio::ExperimentSpec espec;
  espec.alpha = pcfg.alpha;
  espec.budget_fraction = pcfg.budget_fraction;
  espec.horizon = run.horizon;
  espec.pricing_scenarios = pcfg.pricing_scenarios;
  espec.optimization_scenarios = pcfg.optimization_scenarios;
  espec.realization_scenarios = pcfg.realization_scenarios;
  espec.seed = rng::derive(pcfg.seed, 34);
  run.report = portfolio::run_experiment(flow_sampler, weibull_sampler, truth, espec);
  return run;
}

}  // namespace survflow::pipeline
