#pragma once

#include <optional>
#include <string>
#include <vector>

#include "survflow/portfolio.hpp"
#include "survflow/serialize.hpp"

namespace survflow::pipeline {

struct TrainedModel {
  dyn::FlowModel model;
  data::Standardizer standardizer;
  train::FitResult fit;
  std::vector<std::string> feature_names;
};

/// Splits the dataset, standardizes covariates on the training split, and
/// fits the flow.
TrainedModel train_on_dataset(const data::Dataset& ds, const dyn::DynamicsConfig& mcfg,
                              std::uint64_t model_seed, const train::TrainConfig& tcfg,
                              double train_fraction, double val_fraction,
                              const train::EpochCallback& on_epoch = {},
                              const std::optional<Eigen::VectorXd>& warm_start = {});

struct CalibrationPoint {
  double u = 0.0;
  double event_coverage = 0.0;  // share of uncensored records with y <= q_u
};

struct EvalReport {
  double concordance = 0.0;
  double nll = 0.0;
  Eigen::Index n = 0;
  double censoring_rate = 0.0;
  std::vector<CalibrationPoint> calibration;
};

/// Concordance (sampling-based risk scores), censored NLL and a quantile
/// calibration grid on a standardized test set.
EvalReport evaluate_model(const dyn::FlowModel& model,
                          const data::Standardizer& standardizer,
                          const data::Dataset& test, const io::EvalConfig& eval_cfg);

struct PortfolioRun {
  portfolio::ExperimentReport report;
  data::SyntheticSpec spec;
  double horizon = 0.0;
  double training_censoring_rate = 0.0;
};

/// The full credit experiment: clustered universe, censored training data,
/// flow + per-class Weibull candidates, pricing, CVaR optimization and
/// ground-truth realization. `pretrained` skips the flow training step.
PortfolioRun run_portfolio_experiment(
    const io::PortfolioConfig& pcfg, const dyn::DynamicsConfig& mcfg,
    std::uint64_t model_seed, const train::TrainConfig& tcfg,
    const train::EpochCallback& on_epoch = {},
    const std::optional<TrainedModel>& pretrained = {});

}  // namespace survflow::pipeline
